#include <algorithm>
#include <set>

#include "vexploit/vex/parser.hpp"
#include "vexploit/vex/program.hpp"

namespace vexploit {

namespace {

// -1 means variadic with at least one argument.
int builtin_arity(Builtin b) {
  switch (b) {
    case Builtin::Len: return 1;
    case Builtin::Substr: return 3;
    case Builtin::Concat: return -1;
    case Builtin::Contains: return 2;
    case Builtin::StartsWith: return 2;
    case Builtin::ToInt: return 1;
    case Builtin::ToStr: return 1;
    case Builtin::ToFloat: return 1;
    case Builtin::CharAt: return 2;
    case Builtin::Open: return 1;
    case Builtin::ReadFile: return 1;
    case Builtin::NetSend: return 2;
    case Builtin::SqlExec: return 1;
    case Builtin::Log: return 1;
  }
  return 0;
}

class Linker {
 public:
  Linker(Program& program, std::vector<BranchSite>& branches, std::vector<CallSite>& calls,
         std::vector<Diagnostic>& diags)
      : program_(program), branches_(branches), calls_(calls), diags_(diags) {}

  void link_function(const Program::Module& mod, FunctionDecl& fn) {
    mod_ = &mod;
    fn_ = &fn;
    slots_.clear();
    for (const auto& p : fn.params) slots_.emplace(p.name, static_cast<int>(slots_.size()));
    collect_declarations(fn.body);
    fn.slot_count = static_cast<int>(slots_.size());
    link_block(fn.body);
  }

 private:
  void error(SourceLoc loc, std::string msg) { diags_.push_back({mod_->ast.origin, loc, std::move(msg)}); }

  void declare(const std::string& name) {
    if (!slots_.count(name)) slots_.emplace(name, static_cast<int>(slots_.size()));
  }

  // Variables are function-scoped: every let and catch binding gets a slot.
  void collect_declarations(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) {
      if (s->kind == StmtKind::Let || s->kind == StmtKind::Try) declare(s->name);
      collect_declarations(s->body);
      collect_declarations(s->else_body);
    }
  }

  void link_block(std::vector<StmtPtr>& body) {
    for (auto& s : body) link_stmt(*s);
  }

  void link_stmt(Stmt& s) {
    if (s.kind == StmtKind::Let || s.kind == StmtKind::Try) s.slot = slots_.at(s.name);
    if (s.kind == StmtKind::If || s.kind == StmtKind::While) {
      s.branch_site = static_cast<int>(branches_.size());
      branches_.push_back({s.branch_site, fn_->qname, s.loc, s.kind == StmtKind::While});
    }
    if (s.target) link_expr(*s.target);
    if (s.expr) link_expr(*s.expr);
    link_block(s.body);
    link_block(s.else_body);
  }

  void link_expr(Expr& e) {
    for (auto& op : e.operands) link_expr(*op);
    switch (e.kind) {
      case ExprKind::Var: {
        auto it = slots_.find(e.name);
        if (it == slots_.end()) {
          error(e.loc, "unknown variable '" + e.name + "' in " + fn_->qname.str());
        } else {
          e.slot = it->second;
        }
        return;
      }
      case ExprKind::Call:
        link_call(e);
        return;
      default:
        return;
    }
  }

  void link_call(Expr& e) {
    if (e.call_kind == CallKind::Builtin) {
      int arity = builtin_arity(e.builtin);
      int given = static_cast<int>(e.operands.size());
      if ((arity >= 0 && given != arity) || (arity < 0 && given < 1)) {
        error(e.loc, "@" + e.name + " expects " + (arity < 0 ? std::string("at least 1") : std::to_string(arity)) +
                         " argument(s), got " + std::to_string(given));
      }
      return;
    }
    QualifiedName callee{e.call_kind == CallKind::Qualified ? e.module : mod_->ast.name, e.name};
    const FunctionDecl* target = program_.find(callee);
    if (!target) {
      error(e.loc, "unresolved call to '" + callee.str() + "' in " + fn_->qname.str());
      return;
    }
    if (callee.module != mod_->ast.name && !target->is_public) {
      error(e.loc, "call to private function '" + callee.str() + "' from module '" + mod_->ast.name + "'");
      return;
    }
    if (target->params.size() != e.operands.size()) {
      error(e.loc, "'" + callee.str() + "' expects " + std::to_string(target->params.size()) +
                       " argument(s), got " + std::to_string(e.operands.size()));
      return;
    }
    e.target = target;
    e.call_site = static_cast<int>(calls_.size());
    calls_.push_back({e.call_site, fn_->qname, callee, e.loc});
  }

  Program& program_;
  std::vector<BranchSite>& branches_;
  std::vector<CallSite>& calls_;
  std::vector<Diagnostic>& diags_;
  const Program::Module* mod_ = nullptr;
  FunctionDecl* fn_ = nullptr;
  std::unordered_map<std::string, int> slots_;
};

}  // namespace

const Program::Module* Program::module(std::string_view name) const {
  for (const auto& m : modules_) {
    if (m.ast.name == name) return &m;
  }
  return nullptr;
}

const FunctionDecl* Program::find(const QualifiedName& name) const {
  auto it = by_name_.find(name.str());
  return it == by_name_.end() ? nullptr : functions_[static_cast<std::size_t>(it->second)];
}

Program link_program(std::vector<Program::Module> modules) {
  Program p;
  std::vector<Diagnostic> diags;
  std::set<std::string> names;
  for (const auto& m : modules) {
    if (!names.insert(m.ast.name).second) {
      diags.push_back({m.ast.origin, {}, "module name collision: '" + m.ast.name + "' is defined more than once"});
    }
  }
  if (!diags.empty()) throw DiagnosticError(std::move(diags));

  p.modules_ = std::move(modules);
  for (auto& m : p.modules_) {
    for (auto& fn : m.ast.functions) {
      fn->qname = QualifiedName{m.ast.name, fn->name};
      fn->index = static_cast<int>(p.functions_.size());
      p.by_name_.emplace(fn->qname.str(), fn->index);
      p.functions_.push_back(fn.get());
      p.roles_.push_back(m.role);
    }
  }
  Linker linker(p, p.branch_sites_, p.call_sites_, diags);
  for (auto& m : p.modules_) {
    for (auto& fn : m.ast.functions) linker.link_function(m, *fn);
  }
  if (!diags.empty()) throw DiagnosticError(std::move(diags));
  return p;
}

Program link_sources(const std::vector<std::pair<SourceUnit, ModuleRole>>& sources) {
  std::vector<Program::Module> modules;
  std::vector<Diagnostic> diags;
  for (const auto& [unit, role] : sources) {
    auto parsed = parse_module(unit);
    if (!parsed.ok()) {
      diags.insert(diags.end(), parsed.diagnostics.begin(), parsed.diagnostics.end());
      continue;
    }
    modules.push_back({std::move(*parsed.module), role});
  }
  if (!diags.empty()) throw DiagnosticError(std::move(diags));
  return link_program(std::move(modules));
}

std::vector<SourceUnit> load_sources(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".vex") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceUnit> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(SourceUnit::from_file(f));
  return out;
}

Program resolve_project(const std::filesystem::path& project_dir,
                        const std::vector<std::filesystem::path>& library_dirs) {
  if (!std::filesystem::is_directory(project_dir)) {
    throw DiagnosticError({{project_dir.string(), {}, "project directory does not exist"}});
  }
  std::vector<std::pair<SourceUnit, ModuleRole>> sources;
  auto src = project_dir / "src";
  for (auto& u : load_sources(std::filesystem::is_directory(src) ? src : project_dir)) {
    sources.emplace_back(std::move(u), ModuleRole::Project);
  }
  for (auto& u : load_sources(project_dir / "tests")) sources.emplace_back(std::move(u), ModuleRole::Test);
  for (const auto& lib : library_dirs) {
    if (!std::filesystem::is_directory(lib)) {
      throw DiagnosticError({{lib.string(), {}, "library directory does not exist"}});
    }
    for (auto& u : load_sources(lib)) sources.emplace_back(std::move(u), ModuleRole::Library);
  }
  return link_sources(sources);
}

}  // namespace vexploit

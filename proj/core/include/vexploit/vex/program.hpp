#pragma once

#include <filesystem>
#include <unordered_map>
#include <vector>

#include "vexploit/vex/ast.hpp"
#include "vexploit/vex/source.hpp"

namespace vexploit {

enum class ModuleRole { Project, Library, Test, Script };

struct BranchSite {
  int id = -1;
  QualifiedName function;
  SourceLoc loc;
  bool is_loop = false;
};

struct CallSite {
  int id = -1;
  QualifiedName caller;
  QualifiedName callee;
  SourceLoc loc;
};

/// A set of linked modules. Every call expression carries its resolved
/// target; the program is immutable once linked and safe to share.
class Program {
 public:
  struct Module {
    ModuleAst ast;
    ModuleRole role = ModuleRole::Project;
  };

  Program() = default;
  Program(Program&&) noexcept = default;
  Program& operator=(Program&&) noexcept = default;
  Program(const Program&) = delete;
  Program& operator=(const Program&) = delete;

  const std::vector<Module>& modules() const noexcept { return modules_; }
  const Module* module(std::string_view name) const;

  const FunctionDecl* find(const QualifiedName& name) const;
  const FunctionDecl& function(int index) const { return *functions_[static_cast<std::size_t>(index)]; }
  std::size_t function_count() const noexcept { return functions_.size(); }
  ModuleRole role_of(const FunctionDecl& fn) const { return roles_[static_cast<std::size_t>(fn.index)]; }

  const std::vector<BranchSite>& branch_sites() const noexcept { return branch_sites_; }
  const std::vector<CallSite>& call_sites() const noexcept { return call_sites_; }

 private:
  friend Program link_program(std::vector<Module> modules);

  std::vector<Module> modules_;
  std::vector<const FunctionDecl*> functions_;
  std::vector<ModuleRole> roles_;
  std::unordered_map<std::string, int> by_name_;
  std::vector<BranchSite> branch_sites_;
  std::vector<CallSite> call_sites_;
};

/// Resolves every call, assigns variable slots, and numbers branch and call
/// sites. Throws DiagnosticError listing every problem found.
Program link_program(std::vector<Program::Module> modules);

/// Parses then links; parse diagnostics are reported the same way.
Program link_sources(const std::vector<std::pair<SourceUnit, ModuleRole>>& sources);

/// All `*.vex` files directly inside `dir`, sorted by file name.
std::vector<SourceUnit> load_sources(const std::filesystem::path& dir);

/// Links a client project against its libraries. Project modules come from
/// `project_dir/src` when it exists (else `project_dir` itself); tests from
/// `project_dir/tests` are linked alongside with the Test role.
Program resolve_project(const std::filesystem::path& project_dir,
                        const std::vector<std::filesystem::path>& library_dirs);

}  // namespace vexploit

#include "vexploit/static_analysis.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace vexploit {

namespace {

constexpr std::size_t kEnumerationLimit = 4096;

bool edge_less(const CallEdge& a, const CallEdge& b) {
  if (a.caller != b.caller) return a.caller < b.caller;
  return a.callee < b.callee;
}

void collect_guards(const std::vector<StmtPtr>& body, const QualifiedName& next, std::vector<GuardBranch>& enclosing,
                    std::vector<std::vector<GuardBranch>>& out);

void collect_in_expr(const Expr& e, const QualifiedName& next, const std::vector<GuardBranch>& enclosing,
                     std::vector<std::vector<GuardBranch>>& out) {
  if (e.kind == ExprKind::Call && e.target && e.target->qname == next) out.push_back(enclosing);
  for (const auto& op : e.operands) collect_in_expr(*op, next, enclosing, out);
}

void collect_guards(const std::vector<StmtPtr>& body, const QualifiedName& next, std::vector<GuardBranch>& enclosing,
                    std::vector<std::vector<GuardBranch>>& out) {
  for (const auto& s : body) {
    if (s->target) collect_in_expr(*s->target, next, enclosing, out);
    if (s->expr) collect_in_expr(*s->expr, next, enclosing, out);
    if (s->kind == StmtKind::If || s->kind == StmtKind::While) {
      enclosing.push_back({s->branch_site, true});
      collect_guards(s->body, next, enclosing, out);
      enclosing.back().required = false;
      collect_guards(s->else_body, next, enclosing, out);
      enclosing.pop_back();
    } else {
      collect_guards(s->body, next, enclosing, out);
      collect_guards(s->else_body, next, enclosing, out);
    }
  }
}

}  // namespace

bool StaticCallGraph::has_node(const QualifiedName& n) const { return std::binary_search(nodes.begin(), nodes.end(), n); }

bool StaticCallGraph::has_edge(const QualifiedName& caller, const QualifiedName& callee) const {
  CallEdge key{caller, callee, {}};
  return std::binary_search(edges.begin(), edges.end(), key, edge_less);
}

std::vector<QualifiedName> StaticCallGraph::callees(const QualifiedName& caller) const {
  std::vector<QualifiedName> out;
  auto it = std::lower_bound(edges.begin(), edges.end(), CallEdge{caller, {}, {}}, edge_less);
  for (; it != edges.end() && it->caller == caller; ++it) out.push_back(it->callee);
  return out;
}

std::string CallPath::str() const {
  std::string out;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (i) out += " -> ";
    out += functions[i].str();
  }
  return out;
}

StaticCallGraph build_call_graph(const Program& program) {
  StaticCallGraph g;
  for (std::size_t i = 0; i < program.function_count(); ++i) {
    const FunctionDecl& fn = program.function(static_cast<int>(i));
    g.nodes.push_back(fn.qname);
    if (program.role_of(fn) == ModuleRole::Project) g.project_scope.insert(fn.qname);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  for (const auto& site : program.call_sites()) g.edges.push_back({site.caller, site.callee, site.loc});
  std::stable_sort(g.edges.begin(), g.edges.end(), edge_less);
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end(),
                            [](const CallEdge& a, const CallEdge& b) { return a.caller == b.caller && a.callee == b.callee; }),
                g.edges.end());
  return g;
}

std::set<QualifiedName> reaching(const StaticCallGraph& graph, const QualifiedName& target) {
  std::map<QualifiedName, std::vector<QualifiedName>> reverse;
  for (const auto& e : graph.edges) reverse[e.callee].push_back(e.caller);
  std::set<QualifiedName> seen{target};
  std::vector<QualifiedName> work{target};
  while (!work.empty()) {
    QualifiedName n = work.back();
    work.pop_back();
    for (const auto& p : reverse[n]) {
      if (seen.insert(p).second) work.push_back(p);
    }
  }
  return seen;
}

std::vector<CallPath> find_paths(const StaticCallGraph& graph, const QualifiedName& from, const QualifiedName& to,
                                 std::size_t max_paths) {
  std::vector<CallPath> found;
  if (!graph.has_node(from) || !graph.has_node(to)) return found;
  std::set<QualifiedName> useful = reaching(graph, to);
  if (!useful.count(from)) return found;

  std::vector<QualifiedName> stack{from};
  std::set<QualifiedName> on_stack{from};
  std::vector<std::vector<QualifiedName>> raw;
  // Depth-first over simple paths; nodes that cannot reach `to` are pruned.
  auto dfs = [&](auto&& self, const QualifiedName& node) -> void {
    if (raw.size() >= kEnumerationLimit) return;
    if (node == to) {
      raw.push_back(stack);
      return;
    }
    for (const auto& next : graph.callees(node)) {
      if (!useful.count(next) || on_stack.count(next)) continue;
      stack.push_back(next);
      on_stack.insert(next);
      self(self, next);
      on_stack.erase(next);
      stack.pop_back();
    }
  };
  dfs(dfs, from);
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  if (raw.size() > max_paths) raw.resize(max_paths);
  for (auto& p : raw) {
    CallPath cp;
    cp.functions = std::move(p);
    cp.guard_branches.resize(cp.functions.size() > 0 ? cp.functions.size() - 1 : 0);
    found.push_back(std::move(cp));
  }
  return found;
}

void fill_guard_branches(const Program& program, CallPath& path) {
  path.guard_branches.assign(path.functions.empty() ? 0 : path.functions.size() - 1, {});
  for (std::size_t i = 0; i + 1 < path.functions.size(); ++i) {
    const FunctionDecl* fn = program.find(path.functions[i]);
    if (!fn) continue;
    std::vector<GuardBranch> enclosing;
    std::vector<std::vector<GuardBranch>> per_call;
    collect_guards(fn->body, path.functions[i + 1], enclosing, per_call);
    // Keep a conditional only if every call to the next hop needs the same
    // direction from it.
    std::vector<GuardBranch> common;
    if (!per_call.empty()) {
      common = per_call[0];
      for (std::size_t c = 1; c < per_call.size(); ++c) {
        std::vector<GuardBranch> keep;
        for (const auto& g : common) {
          if (std::find(per_call[c].begin(), per_call[c].end(), g) != per_call[c].end()) keep.push_back(g);
        }
        common = std::move(keep);
      }
    }
    path.guard_branches[i] = std::move(common);
  }
}

std::vector<EntryCandidate> discover_entries(const Program& program, const StaticCallGraph& graph,
                                             const QualifiedName& vulnerable) {
  std::vector<EntryCandidate> out;
  if (!graph.has_node(vulnerable)) return out;
  std::set<QualifiedName> useful = reaching(graph, vulnerable);
  std::set<QualifiedName> has_project_caller;
  for (const auto& e : graph.edges) {
    if (e.caller != e.callee && graph.project_scope.count(e.caller)) has_project_caller.insert(e.callee);
  }
  struct Keyed {
    bool called;
    std::size_t length;
    EntryCandidate cand;
  };
  std::vector<Keyed> keyed;
  for (const auto& name : graph.project_scope) {
    if (name == vulnerable || !useful.count(name)) continue;
    const FunctionDecl* fn = program.find(name);
    if (!fn || !fn->is_public) continue;
    auto paths = find_paths(graph, name, vulnerable, 1);
    if (paths.empty()) continue;
    EntryCandidate c{name, std::move(paths[0]), 0};
    fill_guard_branches(program, c.path);
    keyed.push_back({has_project_caller.count(name) != 0, c.path.functions.size(), std::move(c)});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.called != b.called) return !a.called;
    if (a.length != b.length) return a.length < b.length;
    return a.cand.function < b.cand.function;
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    keyed[i].cand.rank = static_cast<int>(i);
    out.push_back(std::move(keyed[i].cand));
  }
  return out;
}

std::string to_edge_list(const StaticCallGraph& graph) {
  std::ostringstream out;
  for (const auto& e : graph.edges) {
    out << e.caller.str() << " -> " << e.callee.str() << "  # " << e.loc.line << ':' << e.loc.column << '\n';
  }
  return out.str();
}

std::string to_dot(const StaticCallGraph& graph, const std::vector<QualifiedName>& highlight) {
  std::set<QualifiedName> hl(highlight.begin(), highlight.end());
  std::ostringstream out;
  out << "digraph callgraph {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& n : graph.nodes) {
    out << "  \"" << n.str() << "\"";
    std::vector<std::string> attrs;
    if (graph.project_scope.count(n)) attrs.push_back("style=filled, fillcolor=\"#e8f0fe\"");
    if (hl.count(n)) attrs.push_back("color=red, penwidth=2");
    if (!attrs.empty()) {
      out << " [";
      for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? ", " : "") << attrs[i];
      out << "]";
    }
    out << ";\n";
  }
  for (const auto& e : graph.edges) {
    out << "  \"" << e.caller.str() << "\" -> \"" << e.callee.str() << "\"";
    if (hl.count(e.caller) && hl.count(e.callee)) out << " [color=red]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace vexploit

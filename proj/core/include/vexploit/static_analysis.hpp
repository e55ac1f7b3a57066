#pragma once

#include <set>
#include <string>
#include <vector>

#include "vexploit/vex/program.hpp"

namespace vexploit {

struct CallEdge {
  QualifiedName caller;
  QualifiedName callee;
  SourceLoc loc;  // first call site in source order
};

struct StaticCallGraph {
  std::vector<QualifiedName> nodes;  // sorted
  std::vector<CallEdge> edges;       // sorted by (caller, callee), one per pair
  std::set<QualifiedName> project_scope;

  bool has_node(const QualifiedName& n) const;
  bool has_edge(const QualifiedName& caller, const QualifiedName& callee) const;
  std::vector<QualifiedName> callees(const QualifiedName& caller) const;
};

/// A conditional that must go `required` for the call to the next hop to run.
struct GuardBranch {
  int site = -1;
  bool required = true;

  bool operator==(const GuardBranch&) const = default;
};

struct CallPath {
  std::vector<QualifiedName> functions;
  /// guard_branches[i] guards the call from functions[i] to functions[i + 1].
  std::vector<std::vector<GuardBranch>> guard_branches;

  std::string str() const;
};

struct EntryCandidate {
  QualifiedName function;
  CallPath path;
  int rank = 0;
};

/// One edge per distinct (caller, callee) over every module of the program.
/// Project-role modules form the project scope.
StaticCallGraph build_call_graph(const Program& program);

/// Simple paths from `from` to `to`, shortest first then lexicographic,
/// truncated to `max_paths`. Guards are left empty.
std::vector<CallPath> find_paths(const StaticCallGraph& graph, const QualifiedName& from, const QualifiedName& to,
                                 std::size_t max_paths = 32);

/// Public project functions with a path to `vulnerable`, best first: functions
/// without project callers, then shorter paths, then by name.
std::vector<EntryCandidate> discover_entries(const Program& program, const StaticCallGraph& graph,
                                             const QualifiedName& vulnerable);

/// Fills `path.guard_branches` from the conditionals enclosing each hop's call.
void fill_guard_branches(const Program& program, CallPath& path);

/// Functions from which `target` is reachable (including `target`).
std::set<QualifiedName> reaching(const StaticCallGraph& graph, const QualifiedName& target);

std::string to_edge_list(const StaticCallGraph& graph);
/// DOT rendering; nodes on `highlight` are emphasized.
std::string to_dot(const StaticCallGraph& graph, const std::vector<QualifiedName>& highlight = {});

}  // namespace vexploit

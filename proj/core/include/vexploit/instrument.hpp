#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "vexploit/vex/interpreter.hpp"

namespace vexploit {

/// An entry-function invocation with literal arguments.
struct TestCase {
  QualifiedName entry;
  std::vector<Value> args;

  /// `module::fn(lit, ...)`, the canonical text identity of the test.
  std::string render_call() const;
  std::uint64_t id() const { return fnv1a(render_call()); }

  bool operator==(const TestCase& other) const { return entry == other.entry && args == other.args; }
};

struct ParamSubstitution {
  QualifiedName function;
  std::size_t position = 0;
  Value value;
};

struct CallEvent {
  enum class Kind { Push, Pop };
  Kind kind = Kind::Push;
  QualifiedName function;
  std::vector<Value> args;  // snapshot on push, empty on pop
  int depth_after = 0;
};

struct DynamicCallGraph {
  std::vector<QualifiedName> path;  // outermost frame first, target last
  std::vector<Value> capture_args;

  bool operator==(const DynamicCallGraph&) const = default;
};

struct BranchRecord {
  int site = -1;
  bool taken = false;
  std::optional<BranchOperands> operands;
};

struct InstrumentOptions {
  bool record_events = false;
  /// Only these branch sites are traced when non-empty (indexed by site id).
  std::vector<bool> branch_filter;
  std::size_t max_branch_records = 20000;
};

struct InstrumentedRun {
  ExecutionOutcome outcome;
  std::optional<DynamicCallGraph> dyn_graph;
  int target_hit_count = 0;
  /// What the first target invocation returned, when it returned normally.
  std::optional<Value> target_return;
  std::vector<BranchRecord> branch_trace;
  std::set<QualifiedName> functions_executed;
  std::vector<CallEvent> events;

  bool executed(const QualifiedName& fn) const { return functions_executed.count(fn) != 0; }
};

/// Runs `test` with call-stack tracking. The first entry into `target` fixes
/// the dynamic call graph and captured arguments. A substitution rewrites one
/// argument of the outermost call of its function before the body runs.
/// Throws std::out_of_range for a substitution position beyond the arity.
InstrumentedRun run_instrumented(const Program& program, const TestCase& test, const QualifiedName& target,
                                 const std::optional<ParamSubstitution>& substitution, const Budgets& budgets,
                                 const std::filesystem::path& sandbox_root = {}, const InstrumentOptions& options = {});

/// Replays push/pop events; the stack at the first push of `target` is the
/// path. Throws std::logic_error on an unbalanced sequence.
std::optional<DynamicCallGraph> collect_dynamic_call_graph(const std::vector<CallEvent>& events,
                                                           const QualifiedName& target);

}  // namespace vexploit

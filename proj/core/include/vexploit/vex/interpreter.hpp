#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vexploit/vex/program.hpp"
#include "vexploit/vex/value.hpp"

namespace vexploit {

struct Budgets {
  std::uint64_t max_steps = 1'000'000;
  int max_call_depth = 512;
};

struct NetEvent {
  std::string url;
  std::string body;

  bool operator==(const NetEvent&) const = default;
};

struct FileEvent {
  std::string requested;
  std::string resolved;
  bool allowed = false;

  bool operator==(const FileEvent&) const = default;
};

struct SinkLog {
  std::vector<NetEvent> net;
  std::vector<std::string> sql;
  std::vector<FileEvent> files;
  std::vector<std::string> console;

  bool operator==(const SinkLog&) const = default;
};

enum class OutcomeKind { Returned, UncaughtException, StepBudgetExceeded, DepthBudgetExceeded };

std::string_view outcome_kind_name(OutcomeKind kind) noexcept;

struct ExecutionOutcome {
  OutcomeKind kind = OutcomeKind::Returned;
  Value value;          // returned value, or the thrown value when uncaught
  std::string message;  // display form of the uncaught exception
  std::uint64_t steps_used = 0;
  int max_depth_seen = 0;
  SinkLog sinks;
};

/// Operands of a comparison guarding a branch, reported only when both sides
/// are numbers, strings or booleans.
struct BranchOperands {
  BinaryOp op = BinaryOp::Eq;
  Value lhs;
  Value rhs;
};

/// Observer interface. `on_call_enter` may rewrite the arguments before the
/// body runs. Every enter is matched by exactly one exit; frames abandoned by
/// an exception or a budget abort exit with `ret == nullptr`.
class InstrumentationHooks {
 public:
  virtual ~InstrumentationHooks() = default;
  virtual void on_call_enter(const FunctionDecl& fn, std::vector<Value>& args, int depth) {
    (void)fn, (void)args, (void)depth;
  }
  virtual void on_call_exit(const FunctionDecl& fn, const Value* ret, int depth) noexcept {
    (void)fn, (void)ret, (void)depth;
  }
  virtual void on_branch(int site, bool taken, const BranchOperands* operands) {
    (void)site, (void)taken, (void)operands;
  }
};

/// Runs `call` with `args`. Arity mismatch and unknown functions throw
/// std::invalid_argument; everything the program itself does ends in an outcome.
ExecutionOutcome execute(const Program& program, const QualifiedName& call, std::vector<Value> args,
                         const Budgets& budgets = {}, InstrumentationHooks* hooks = nullptr,
                         const std::filesystem::path& sandbox_root = {});

/// Evaluates one builtin outside of a program. Vex-level failures are thrown
/// as VexException.
Value eval_builtin(Builtin builtin, std::vector<Value> args, SinkLog& sinks, const std::filesystem::path& sandbox_root);

/// A value thrown by Vex code (or by a builtin on bad input).
struct VexException {
  Value value;
};

/// Vex truthiness: null, false, 0, 0.0, "" and empty collections are false.
bool truthy(const Value& v) noexcept;

/// `==` semantics: structural, with Int and Float compared numerically.
bool loose_equals(const Value& a, const Value& b);

/// Lexical sandbox resolution used by @open. Returns the normalized path
/// relative to `root` when it stays inside, nullopt otherwise.
std::optional<std::string> sandbox_relative(const std::filesystem::path& root, std::string_view requested,
                                            std::string* resolved_out = nullptr);

}  // namespace vexploit

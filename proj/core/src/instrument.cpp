#include "vexploit/instrument.hpp"

#include <stdexcept>

namespace vexploit {

std::string TestCase::render_call() const {
  std::string out = entry.str() + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += render_literal(args[i]);
  }
  out += ")";
  return out;
}

namespace {

class Tracker : public InstrumentationHooks {
 public:
  Tracker(const Program& program, const QualifiedName& target, const std::optional<ParamSubstitution>& sub,
          const InstrumentOptions& options, InstrumentedRun& run)
      : target_(program.find(target)),
        sub_fn_(sub ? program.find(sub->function) : nullptr),
        sub_(sub),
        options_(options),
        run_(run),
        executed_(program.function_count(), false) {}

  void on_call_enter(const FunctionDecl& fn, std::vector<Value>& args, int depth) override {
    if (&fn == sub_fn_) {
      if (sub_active_ == 0) args[sub_->position] = sub_->value;
      ++sub_active_;
    }
    stack_.push_back(&fn);
    executed_[static_cast<std::size_t>(fn.index)] = true;
    if (options_.record_events) run_.events.push_back({CallEvent::Kind::Push, fn.qname, args, depth});
    if (&fn == target_) {
      if (run_.target_hit_count++ == 0) {
        DynamicCallGraph g;
        g.path.reserve(stack_.size());
        for (const auto* f : stack_) g.path.push_back(f->qname);
        g.capture_args = args;
        run_.dyn_graph = std::move(g);
        first_hit_depth_ = depth;
      }
    }
  }

  void on_call_exit(const FunctionDecl& fn, const Value* ret, int depth) noexcept override {
    if (&fn == sub_fn_) --sub_active_;
    stack_.pop_back();
    if (&fn == target_ && depth == first_hit_depth_) {
      first_hit_depth_ = -1;
      if (ret) run_.target_return = *ret;
    }
    if (options_.record_events) {
      try {
        run_.events.push_back({CallEvent::Kind::Pop, fn.qname, {}, depth - 1});
      } catch (...) {
        std::terminate();
      }
    }
  }

  void on_branch(int site, bool taken, const BranchOperands* operands) override {
    if (!options_.branch_filter.empty() &&
        (static_cast<std::size_t>(site) >= options_.branch_filter.size() ||
         !options_.branch_filter[static_cast<std::size_t>(site)])) {
      return;
    }
    if (run_.branch_trace.size() >= options_.max_branch_records) return;
    BranchRecord rec{site, taken, std::nullopt};
    if (operands) rec.operands = *operands;
    run_.branch_trace.push_back(std::move(rec));
  }

  const std::vector<bool>& executed() const { return executed_; }

 private:
  const FunctionDecl* target_;
  const FunctionDecl* sub_fn_;
  const std::optional<ParamSubstitution>& sub_;
  const InstrumentOptions& options_;
  InstrumentedRun& run_;
  std::vector<const FunctionDecl*> stack_;
  std::vector<bool> executed_;
  int sub_active_ = 0;
  int first_hit_depth_ = -1;
};

}  // namespace

InstrumentedRun run_instrumented(const Program& program, const TestCase& test, const QualifiedName& target,
                                 const std::optional<ParamSubstitution>& substitution, const Budgets& budgets,
                                 const std::filesystem::path& sandbox_root, const InstrumentOptions& options) {
  if (substitution) {
    const FunctionDecl* fn = program.find(substitution->function);
    if (!fn) throw std::invalid_argument("unknown substitution function " + substitution->function.str());
    if (substitution->position >= fn->params.size()) {
      throw std::out_of_range("substitution position " + std::to_string(substitution->position) + " out of range for " +
                              substitution->function.str());
    }
  }
  InstrumentedRun run;
  Tracker tracker(program, target, substitution, options, run);
  run.outcome = execute(program, test.entry, test.args, budgets, &tracker, sandbox_root);
  const auto& executed = tracker.executed();
  for (std::size_t i = 0; i < executed.size(); ++i) {
    if (executed[i]) run.functions_executed.insert(program.function(static_cast<int>(i)).qname);
  }
  return run;
}

std::optional<DynamicCallGraph> collect_dynamic_call_graph(const std::vector<CallEvent>& events,
                                                           const QualifiedName& target) {
  std::vector<const CallEvent*> stack;
  std::optional<DynamicCallGraph> out;
  for (const auto& e : events) {
    if (e.kind == CallEvent::Kind::Push) {
      stack.push_back(&e);
      if (!out && e.function == target) {
        DynamicCallGraph g;
        for (const auto* s : stack) g.path.push_back(s->function);
        g.capture_args = e.args;
        out = std::move(g);
      }
    } else {
      if (stack.empty() || !(stack.back()->function == e.function)) {
        throw std::logic_error("unbalanced call events: pop of " + e.function.str());
      }
      stack.pop_back();
    }
  }
  if (!stack.empty()) throw std::logic_error("unbalanced call events: " + std::to_string(stack.size()) + " open frames");
  return out;
}

}  // namespace vexploit

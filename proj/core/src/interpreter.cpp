#include "vexploit/vex/interpreter.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace vexploit {

namespace {

struct BudgetAbort {
  OutcomeKind kind;
};

enum class Flow { Normal, Return };

[[noreturn]] void fail(std::string message) { throw VexException{Value::string(std::move(message))}; }

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

bool operand_reportable(const Value& v) {
  return v.is_number() || v.is(ValueKind::Str) || v.is(ValueKind::Bool);
}

std::string type_error(std::string_view what, const Value& a, const Value& b) {
  return std::string("bad operand types for ") + std::string(what) + ": " + std::string(kind_name(a.kind())) +
         " and " + std::string(kind_name(b.kind()));
}

int compare_values(BinaryOp op, const Value& a, const Value& b) {
  if (a.is(ValueKind::Int) && b.is(ValueKind::Int)) {
    return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int() ? 1 : 0);
  }
  if (a.is_number() && b.is_number()) {
    double x = a.as_number(), y = b.as_number();
    if (std::isnan(x) || std::isnan(y)) return 2;  // unordered
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (a.is(ValueKind::Str) && b.is(ValueKind::Str)) {
    int c = a.as_str().compare(b.as_str());
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  fail(type_error(binary_op_text(op), a, b));
}

Value arithmetic(BinaryOp op, const Value& a, const Value& b) {
  if (op == BinaryOp::Add) {
    if (a.is(ValueKind::Str) || b.is(ValueKind::Str)) {
      std::string s = display(a);
      s += display(b);
      return Value::string(std::move(s));
    }
    if (a.is(ValueKind::List) && b.is(ValueKind::List)) {
      List out = a.as_list();
      out.insert(out.end(), b.as_list().begin(), b.as_list().end());
      return Value::list(std::move(out));
    }
  }
  if (!a.is_number() || !b.is_number()) fail(type_error(binary_op_text(op), a, b));
  if (a.is(ValueKind::Int) && b.is(ValueKind::Int)) {
    std::int64_t x = a.as_int(), y = b.as_int();
    switch (op) {
      case BinaryOp::Add: return Value::integer(wrap_add(x, y));
      case BinaryOp::Sub: return Value::integer(wrap_sub(x, y));
      case BinaryOp::Mul: return Value::integer(wrap_mul(x, y));
      case BinaryOp::Div:
        if (y == 0) fail("division by zero");
        if (y == -1) return Value::integer(wrap_sub(0, x));
        return Value::integer(x / y);
      case BinaryOp::Mod:
        if (y == 0) fail("division by zero");
        if (y == -1) return Value::integer(0);
        return Value::integer(x % y);
      default: break;
    }
  }
  double x = a.as_number(), y = b.as_number();
  switch (op) {
    case BinaryOp::Add: return Value::real(x + y);
    case BinaryOp::Sub: return Value::real(x - y);
    case BinaryOp::Mul: return Value::real(x * y);
    case BinaryOp::Div: return Value::real(x / y);
    case BinaryOp::Mod: return Value::real(std::fmod(x, y));
    default: break;
  }
  throw std::logic_error("not an arithmetic operator");
}

std::int64_t want_int(const Value& v, std::string_view builtin) {
  if (!v.is(ValueKind::Int)) fail("@" + std::string(builtin) + ": expected int, got " + std::string(kind_name(v.kind())));
  return v.as_int();
}

const std::string& want_str(const Value& v, std::string_view builtin) {
  if (!v.is(ValueKind::Str)) fail("@" + std::string(builtin) + ": expected str, got " + std::string(kind_name(v.kind())));
  return v.as_str();
}

Value builtin_to_int(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Int: return v;
    case ValueKind::Bool: return Value::integer(v.as_bool() ? 1 : 0);
    case ValueKind::Float: {
      double d = v.as_float();
      if (!std::isfinite(d) || d >= 9.2233720368547758e18 || d < -9.2233720368547758e18) fail("bad int");
      return Value::integer(static_cast<std::int64_t>(d));
    }
    case ValueKind::Str: {
      const std::string& s = v.as_str();
      std::size_t start = (!s.empty() && s[0] == '+') ? 1 : 0;
      std::int64_t out = 0;
      auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + s.size(), out);
      if (s.size() == start || ec != std::errc() || ptr != s.data() + s.size() || (start && s[1] == '-')) fail("bad int");
      return Value::integer(out);
    }
    default: fail("bad int");
  }
}

Value builtin_to_float(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Float: return v;
    case ValueKind::Int: return Value::real(static_cast<double>(v.as_int()));
    case ValueKind::Str: {
      const std::string& s = v.as_str();
      std::size_t start = (!s.empty() && s[0] == '+') ? 1 : 0;
      double out = 0;
      auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + s.size(), out);
      if (s.size() == start || ec != std::errc() || ptr != s.data() + s.size()) fail("bad float");
      return Value::real(out);
    }
    default: fail("bad float");
  }
}

class Interpreter {
 public:
  Interpreter(const Program& program, const Budgets& budgets, InstrumentationHooks* hooks,
              const std::filesystem::path& sandbox)
      : program_(program), budgets_(budgets), hooks_(hooks), sandbox_(sandbox) {}

  ExecutionOutcome run(const FunctionDecl& fn, std::vector<Value> args) {
    ExecutionOutcome out;
    try {
      out.value = call(fn, std::move(args));
      out.kind = OutcomeKind::Returned;
    } catch (const VexException& e) {
      out.kind = OutcomeKind::UncaughtException;
      out.value = e.value;
      out.message = display(e.value);
    } catch (const BudgetAbort& a) {
      out.kind = a.kind;
    }
    out.steps_used = steps_;
    out.max_depth_seen = max_depth_;
    out.sinks = std::move(sinks_);
    return out;
  }

 private:
  // Pairs every on_call_enter with an on_call_exit, including during unwinding.
  struct FrameGuard {
    InstrumentationHooks* hooks;
    const FunctionDecl& fn;
    int depth;
    const Value* ret = nullptr;
    ~FrameGuard() {
      if (hooks) hooks->on_call_exit(fn, ret, depth);
    }
  };

  void step() {
    if (++steps_ > budgets_.max_steps) {
      steps_ = budgets_.max_steps;
      throw BudgetAbort{OutcomeKind::StepBudgetExceeded};
    }
  }

  Value call(const FunctionDecl& fn, std::vector<Value> args) {
    Value result;
    int depth = depth_ + 1;
    if (depth > budgets_.max_call_depth) throw BudgetAbort{OutcomeKind::DepthBudgetExceeded};
    if (hooks_) hooks_->on_call_enter(fn, args, depth);
    FrameGuard guard{hooks_, fn, depth};
    depth_ = depth;
    max_depth_ = std::max(max_depth_, depth);

    std::vector<Value> frame(static_cast<std::size_t>(fn.slot_count));
    for (std::size_t i = 0; i < args.size(); ++i) frame[i] = std::move(args[i]);
    std::vector<Value>* saved = frame_;
    frame_ = &frame;

    try {
      if (exec_block(fn.body) == Flow::Return) result = std::move(return_value_);
    } catch (...) {
      frame_ = saved;
      depth_ = depth - 1;
      throw;
    }
    frame_ = saved;
    depth_ = depth - 1;
    guard.ret = &result;
    return result;
  }

  Flow exec_block(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) {
      if (exec(*s) == Flow::Return) return Flow::Return;
    }
    return Flow::Normal;
  }

  Flow exec(const Stmt& s) {
    step();
    switch (s.kind) {
      case StmtKind::Let:
        (*frame_)[static_cast<std::size_t>(s.slot)] = eval(*s.expr);
        return Flow::Normal;
      case StmtKind::Assign:
        assign(*s.target, *s.expr);
        return Flow::Normal;
      case StmtKind::If:
        if (condition(s)) return exec_block(s.body);
        return exec_block(s.else_body);
      case StmtKind::While:
        while (condition(s)) {
          if (exec_block(s.body) == Flow::Return) return Flow::Return;
        }
        return Flow::Normal;
      case StmtKind::Return:
        return_value_ = s.expr ? eval(*s.expr) : Value();
        return Flow::Return;
      case StmtKind::Throw:
        throw VexException{eval(*s.expr)};
      case StmtKind::Try: {
        std::vector<Value>* frame = frame_;
        int depth = depth_;
        try {
          return exec_block(s.body);
        } catch (VexException& e) {
          frame_ = frame;
          depth_ = depth;
          (*frame_)[static_cast<std::size_t>(s.slot)] = std::move(e.value);
        }
        return exec_block(s.else_body);
      }
      case StmtKind::ExprStmt:
        eval(*s.expr);
        return Flow::Normal;
    }
    return Flow::Normal;
  }

  bool condition(const Stmt& s) {
    const Expr& c = *s.expr;
    if (c.kind == ExprKind::Binary && is_comparison(c.binary_op)) {
      step();
      Value lhs = eval(*c.operands[0]);
      Value rhs = eval(*c.operands[1]);
      bool taken = truthy(binary_result(c.binary_op, lhs, rhs));
      if (hooks_) {
        if (operand_reportable(lhs) && operand_reportable(rhs)) {
          BranchOperands ops{c.binary_op, std::move(lhs), std::move(rhs)};
          hooks_->on_branch(s.branch_site, taken, &ops);
        } else {
          hooks_->on_branch(s.branch_site, taken, nullptr);
        }
      }
      return taken;
    }
    bool taken = truthy(eval(c));
    if (hooks_) hooks_->on_branch(s.branch_site, taken, nullptr);
    return taken;
  }

  Value& lvalue(const Expr& e) {
    step();
    switch (e.kind) {
      case ExprKind::Var:
        return (*frame_)[static_cast<std::size_t>(e.slot)];
      case ExprKind::Field: {
        Value& base = lvalue(*e.operands[0]);
        if (!base.is(ValueKind::Record)) fail("field assignment on " + std::string(kind_name(base.kind())));
        return field_ref(base, e.name);
      }
      case ExprKind::Index: {
        Value idx = eval(*e.operands[1]);
        Value& base = lvalue(*e.operands[0]);
        if (base.is(ValueKind::List)) {
          std::int64_t i = want_index(idx);
          List& items = base.mutable_list();
          if (i < 0 || static_cast<std::size_t>(i) >= items.size()) fail("index out of range");
          return items[static_cast<std::size_t>(i)];
        }
        if (base.is(ValueKind::Record) && idx.is(ValueKind::Str)) return field_ref(base, idx.as_str());
        fail("index assignment on " + std::string(kind_name(base.kind())));
      }
      default:
        throw std::logic_error("parser admitted a non-lvalue assignment target");
    }
  }

  static Value& field_ref(Value& record, std::string_view name) {
    Record& fields = record.mutable_record();
    for (auto& [k, v] : fields) {
      if (k == name) return v;
    }
    fields.emplace_back(std::string(name), Value());
    return fields.back().second;
  }

  static std::int64_t want_index(const Value& idx) {
    if (!idx.is(ValueKind::Int)) fail("index must be int, got " + std::string(kind_name(idx.kind())));
    return idx.as_int();
  }

  void assign(const Expr& target, const Expr& expr) {
    // `s = s + e` on a string appends in place instead of copying s.
    if (target.kind == ExprKind::Var && expr.kind == ExprKind::Binary && expr.binary_op == BinaryOp::Add &&
        expr.operands[0]->kind == ExprKind::Var && expr.operands[0]->slot == target.slot &&
        (*frame_)[static_cast<std::size_t>(target.slot)].is(ValueKind::Str)) {
      step();
      step();
      Value rhs = eval(*expr.operands[1]);
      step();
      Value& slot = (*frame_)[static_cast<std::size_t>(target.slot)];
      if (slot.is(ValueKind::Str)) {
        if (rhs.is(ValueKind::Str)) {
          slot.mutable_str() += rhs.as_str();
        } else {
          slot.mutable_str() += display(rhs);
        }
        return;
      }
      slot = arithmetic(BinaryOp::Add, slot, rhs);
      return;
    }
    Value v = eval(expr);
    lvalue(target) = std::move(v);
  }

  Value binary_result(BinaryOp op, const Value& a, const Value& b) {
    switch (op) {
      case BinaryOp::Eq: return Value::boolean(loose_equals(a, b));
      case BinaryOp::Ne: return Value::boolean(!loose_equals(a, b));
      case BinaryOp::Lt: return Value::boolean(compare_values(op, a, b) == -1);
      case BinaryOp::Le: {
        int c = compare_values(op, a, b);
        return Value::boolean(c == -1 || c == 0);
      }
      case BinaryOp::Gt: return Value::boolean(compare_values(op, a, b) == 1);
      case BinaryOp::Ge: {
        int c = compare_values(op, a, b);
        return Value::boolean(c == 1 || c == 0);
      }
      default: return arithmetic(op, a, b);
    }
  }

  Value eval(const Expr& e) {
    step();
    switch (e.kind) {
      case ExprKind::Literal:
        return e.literal;
      case ExprKind::Var:
        return (*frame_)[static_cast<std::size_t>(e.slot)];
      case ExprKind::Field: {
        Value base = eval(*e.operands[0]);
        if (!base.is(ValueKind::Record)) fail("field access ." + e.name + " on " + std::string(kind_name(base.kind())));
        const Value* f = base.field(e.name);
        return f ? *f : Value();
      }
      case ExprKind::Index: {
        Value base = eval(*e.operands[0]);
        Value idx = eval(*e.operands[1]);
        return index(base, idx);
      }
      case ExprKind::Unary: {
        Value v = eval(*e.operands[0]);
        if (e.unary_op == UnaryOp::Not) return Value::boolean(!truthy(v));
        if (v.is(ValueKind::Int)) return Value::integer(wrap_sub(0, v.as_int()));
        if (v.is(ValueKind::Float)) return Value::real(-v.as_float());
        fail("bad operand type for unary -: " + std::string(kind_name(v.kind())));
      }
      case ExprKind::Binary: {
        if (e.binary_op == BinaryOp::And) {
          if (!truthy(eval(*e.operands[0]))) return Value::boolean(false);
          return Value::boolean(truthy(eval(*e.operands[1])));
        }
        if (e.binary_op == BinaryOp::Or) {
          if (truthy(eval(*e.operands[0]))) return Value::boolean(true);
          return Value::boolean(truthy(eval(*e.operands[1])));
        }
        Value a = eval(*e.operands[0]);
        Value b = eval(*e.operands[1]);
        return binary_result(e.binary_op, a, b);
      }
      case ExprKind::Call: {
        std::vector<Value> args;
        args.reserve(e.operands.size());
        for (const auto& op : e.operands) args.push_back(eval(*op));
        if (e.call_kind == CallKind::Builtin) return eval_builtin(e.builtin, std::move(args), sinks_, sandbox_);
        return call(*e.target, std::move(args));
      }
      case ExprKind::ListLit: {
        List items;
        items.reserve(e.operands.size());
        for (const auto& op : e.operands) items.push_back(eval(*op));
        return Value::list(std::move(items));
      }
      case ExprKind::RecordLit: {
        Record fields;
        fields.reserve(e.keys.size());
        for (std::size_t i = 0; i < e.keys.size(); ++i) {
          Value v = eval(*e.operands[i]);
          bool replaced = false;
          for (auto& [k, old] : fields) {
            if (k == e.keys[i]) {
              old = std::move(v);
              replaced = true;
              break;
            }
          }
          if (!replaced) fields.emplace_back(e.keys[i], std::move(v));
        }
        return Value::record(std::move(fields));
      }
    }
    return Value();
  }

  static Value index(const Value& base, const Value& idx) {
    switch (base.kind()) {
      case ValueKind::List: {
        std::int64_t i = want_index(idx);
        if (i < 0 || static_cast<std::size_t>(i) >= base.as_list().size()) fail("index out of range");
        return base.as_list()[static_cast<std::size_t>(i)];
      }
      case ValueKind::Str: {
        std::int64_t i = want_index(idx);
        if (i < 0 || static_cast<std::size_t>(i) >= base.as_str().size()) fail("index out of range");
        return Value::string(std::string(1, base.as_str()[static_cast<std::size_t>(i)]));
      }
      case ValueKind::Record: {
        if (!idx.is(ValueKind::Str)) fail("record index must be str");
        const Value* f = base.field(idx.as_str());
        return f ? *f : Value();
      }
      default:
        fail("cannot index " + std::string(kind_name(base.kind())));
    }
  }

  const Program& program_;
  const Budgets& budgets_;
  InstrumentationHooks* hooks_;
  const std::filesystem::path& sandbox_;
  SinkLog sinks_;
  std::uint64_t steps_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;
  std::vector<Value>* frame_ = nullptr;
  Value return_value_;
};

}  // namespace

std::string_view outcome_kind_name(OutcomeKind kind) noexcept {
  switch (kind) {
    case OutcomeKind::Returned: return "returned";
    case OutcomeKind::UncaughtException: return "uncaught_exception";
    case OutcomeKind::StepBudgetExceeded: return "step_budget_exceeded";
    case OutcomeKind::DepthBudgetExceeded: return "depth_budget_exceeded";
  }
  return "?";
}

bool truthy(const Value& v) noexcept {
  switch (v.kind()) {
    case ValueKind::Null: return false;
    case ValueKind::Bool: return v.as_bool();
    case ValueKind::Int: return v.as_int() != 0;
    case ValueKind::Float: return v.as_float() != 0.0;
    case ValueKind::Str: return !v.as_str().empty();
    case ValueKind::List: return !v.as_list().empty();
    case ValueKind::Record: return !v.as_record().empty();
    case ValueKind::File: return true;
  }
  return false;
}

bool loose_equals(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is(ValueKind::Int) && b.is(ValueKind::Int)) return a.as_int() == b.as_int();
    return a.as_number() == b.as_number();
  }
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ValueKind::Null: return true;
    case ValueKind::Bool: return a.as_bool() == b.as_bool();
    case ValueKind::Str: return a.as_str() == b.as_str();
    case ValueKind::File: return a.as_file() == b.as_file();
    case ValueKind::List: {
      const List& x = a.as_list();
      const List& y = b.as_list();
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!loose_equals(x[i], y[i])) return false;
      }
      return true;
    }
    case ValueKind::Record: {
      const Record& x = a.as_record();
      if (x.size() != b.as_record().size()) return false;
      for (const auto& [k, v] : x) {
        const Value* other = b.field(k);
        if (!other || !loose_equals(v, *other)) return false;
      }
      return true;
    }
    default: return false;
  }
}

std::optional<std::string> sandbox_relative(const std::filesystem::path& root, std::string_view requested,
                                            std::string* resolved_out) {
  namespace fs = std::filesystem;
  fs::path base = root.lexically_normal();
  if (resolved_out) *resolved_out = (base / fs::path(requested)).lexically_normal().generic_string();
  if (requested.empty() || requested.front() == '/') return std::nullopt;
  // Walk component by component: climbing above the root at any point is an
  // escape even if later components come back inside.
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos <= requested.size()) {
    std::size_t slash = requested.find('/', pos);
    if (slash == std::string_view::npos) slash = requested.size();
    std::string_view part = requested.substr(pos, slash - pos);
    pos = slash + 1;
    if (part.empty() || part == ".") continue;
    if (part == "..") {
      if (parts.empty()) return std::nullopt;
      parts.pop_back();
      continue;
    }
    parts.push_back(part);
  }
  if (parts.empty()) return std::nullopt;
  std::string out;
  for (auto part : parts) {
    if (!out.empty()) out += '/';
    out += part;
  }
  return out;
}

Value eval_builtin(Builtin builtin, std::vector<Value> args, SinkLog& sinks, const std::filesystem::path& sandbox) {
  std::string_view name = builtin_name(builtin);
  switch (builtin) {
    case Builtin::Len: {
      const Value& v = args[0];
      if (v.is(ValueKind::Str)) return Value::integer(static_cast<std::int64_t>(v.as_str().size()));
      if (v.is(ValueKind::List)) return Value::integer(static_cast<std::int64_t>(v.as_list().size()));
      if (v.is(ValueKind::Record)) return Value::integer(static_cast<std::int64_t>(v.as_record().size()));
      fail("@len: unsupported " + std::string(kind_name(v.kind())));
    }
    case Builtin::Substr: {
      const std::string& s = want_str(args[0], name);
      std::int64_t start = want_int(args[1], name);
      std::int64_t count = want_int(args[2], name);
      if (start < 0 || static_cast<std::size_t>(start) > s.size() || count < 0) fail("index out of range");
      return Value::string(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(count)));
    }
    case Builtin::Concat: {
      std::string out;
      for (const auto& a : args) out += a.is(ValueKind::Str) ? a.as_str() : display(a);
      return Value::string(std::move(out));
    }
    case Builtin::Contains: {
      const Value& hay = args[0];
      const Value& needle = args[1];
      if (hay.is(ValueKind::Str)) return Value::boolean(hay.as_str().find(want_str(needle, name)) != std::string::npos);
      if (hay.is(ValueKind::List)) {
        for (const auto& item : hay.as_list()) {
          if (loose_equals(item, needle)) return Value::boolean(true);
        }
        return Value::boolean(false);
      }
      if (hay.is(ValueKind::Record)) return Value::boolean(hay.field(want_str(needle, name)) != nullptr);
      fail("@contains: unsupported " + std::string(kind_name(hay.kind())));
    }
    case Builtin::StartsWith: {
      const std::string& s = want_str(args[0], name);
      const std::string& p = want_str(args[1], name);
      return Value::boolean(s.compare(0, p.size(), p) == 0 && s.size() >= p.size());
    }
    case Builtin::ToInt: return builtin_to_int(args[0]);
    case Builtin::ToStr: return args[0].is(ValueKind::Str) ? args[0] : Value::string(display(args[0]));
    case Builtin::ToFloat: return builtin_to_float(args[0]);
    case Builtin::CharAt: {
      const std::string& s = want_str(args[0], name);
      std::int64_t i = want_int(args[1], name);
      if (i < 0 || static_cast<std::size_t>(i) >= s.size()) fail("index out of range");
      return Value::string(std::string(1, s[static_cast<std::size_t>(i)]));
    }
    case Builtin::Open: {
      const std::string& requested = want_str(args[0], name);
      std::string resolved;
      auto rel = sandbox_relative(sandbox, requested, &resolved);
      sinks.files.push_back({requested, resolved, rel.has_value()});
      if (!rel) fail("access denied: " + requested);
      return Value::file({std::filesystem::path(sandbox).lexically_normal().generic_string(), *rel});
    }
    case Builtin::ReadFile: {
      if (!args[0].is(ValueKind::File)) fail("@read_file: expected file, got " + std::string(kind_name(args[0].kind())));
      try {
        return Value::string(args[0].as_file().read());
      } catch (const std::runtime_error&) {
        fail("file not found: " + args[0].as_file().path);
      }
    }
    case Builtin::NetSend:
      sinks.net.push_back({display(args[0]), display(args[1])});
      return Value();
    case Builtin::SqlExec:
      sinks.sql.push_back(display(args[0]));
      return Value();
    case Builtin::Log:
      sinks.console.push_back(display(args[0]));
      return Value();
  }
  return Value();
}

ExecutionOutcome execute(const Program& program, const QualifiedName& call, std::vector<Value> args,
                         const Budgets& budgets, InstrumentationHooks* hooks, const std::filesystem::path& sandbox_root) {
  const FunctionDecl* fn = program.find(call);
  if (!fn) throw std::invalid_argument("unknown function " + call.str());
  if (fn->params.size() != args.size()) {
    throw std::invalid_argument(call.str() + " expects " + std::to_string(fn->params.size()) + " argument(s), got " +
                                std::to_string(args.size()));
  }
  if (budgets.max_steps == 0 || budgets.max_call_depth <= 0) throw std::invalid_argument("budgets must be positive");
  return Interpreter(program, budgets, hooks, sandbox_root).run(*fn, std::move(args));
}

}  // namespace vexploit

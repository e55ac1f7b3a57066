#include "vexploit/genetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>
#include <unordered_map>

#include "vexploit/similarity.hpp"

namespace vexploit {

namespace {

using Clock = std::chrono::steady_clock;

std::size_t uniform(Rng& rng, std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng() % n); }
double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
bool chance(Rng& rng, double p) { return unit(rng) < p; }

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}

BinaryOp negate(BinaryOp op) {
  switch (op) {
    case BinaryOp::Eq: return BinaryOp::Ne;
    case BinaryOp::Ne: return BinaryOp::Eq;
    case BinaryOp::Lt: return BinaryOp::Ge;
    case BinaryOp::Le: return BinaryOp::Gt;
    case BinaryOp::Gt: return BinaryOp::Le;
    case BinaryOp::Ge: return BinaryOp::Lt;
    default: return op;
  }
}

bool better(const FitnessScore& a, std::uint64_t a_id, const FitnessScore& b, std::uint64_t b_id) {
  if (a.total() != b.total()) return a.total() > b.total();
  return a_id < b_id;
}

void collect_payload(const Value& v, MutationContext& ctx, int depth) {
  if (depth > 8) return;
  switch (v.kind()) {
    case ValueKind::Str: ctx.payload_strings.push_back(v.as_str()); break;
    case ValueKind::Int:
    case ValueKind::Float:
      ctx.payload_numbers.push_back(v);
      ctx.payload_strings.push_back(display(v));
      break;
    case ValueKind::Bool: ctx.payload_numbers.push_back(v); break;
    case ValueKind::List:
      for (const auto& item : v.as_list()) collect_payload(item, ctx, depth + 1);
      break;
    case ValueKind::Record:
      for (const auto& [k, item] : v.as_record()) {
        ctx.payload_keys.push_back(k);
        collect_payload(item, ctx, depth + 1);
      }
      break;
    case ValueKind::File:
      try {
        ctx.payload_strings.push_back(v.as_file().read());
      } catch (const std::runtime_error&) {
      }
      break;
    default: break;
  }
}

void harvest_expr(const Expr& e, ConstantPool& pool, std::vector<std::string>& seen_str, std::vector<Value>& seen_num) {
  if (e.kind == ExprKind::Literal) {
    if (e.literal.is(ValueKind::Str)) {
      if (std::find(seen_str.begin(), seen_str.end(), e.literal.as_str()) == seen_str.end()) {
        seen_str.push_back(e.literal.as_str());
        pool.strings.push_back(e.literal.as_str());
      }
    } else if (e.literal.is_number()) {
      if (std::find(seen_num.begin(), seen_num.end(), e.literal) == seen_num.end()) {
        seen_num.push_back(e.literal);
        pool.numbers.push_back(e.literal);
      }
    }
  }
  if (e.kind == ExprKind::RecordLit) {
    for (const auto& k : e.keys) {
      if (std::find(seen_str.begin(), seen_str.end(), k) == seen_str.end()) {
        seen_str.push_back(k);
        pool.strings.push_back(k);
      }
    }
  }
  for (const auto& op : e.operands) harvest_expr(*op, pool, seen_str, seen_num);
}

void harvest_block(const std::vector<StmtPtr>& body, ConstantPool& pool, std::vector<std::string>& ss,
                   std::vector<Value>& sn) {
  for (const auto& s : body) {
    if (s->target) harvest_expr(*s->target, pool, ss, sn);
    if (s->expr) harvest_expr(*s->expr, pool, ss, sn);
    harvest_block(s->body, pool, ss, sn);
    harvest_block(s->else_body, pool, ss, sn);
  }
}

char random_char(const MutationContext& ctx, Rng& rng) {
  if (!ctx.payload_strings.empty() && chance(rng, 0.5)) {
    const std::string& p = ctx.payload_strings[uniform(rng, ctx.payload_strings.size())];
    if (!p.empty()) return p[uniform(rng, p.size())];
  }
  return static_cast<char>(32 + uniform(rng, 95));
}

std::string payload_slice(const MutationContext& ctx, Rng& rng) {
  const std::string& p = ctx.payload_strings[uniform(rng, ctx.payload_strings.size())];
  if (p.empty()) return {};
  std::size_t start = uniform(rng, p.size());
  std::size_t max_len = std::min(ctx.config->max_seed_len, p.size() - start);
  return p.substr(start, 1 + uniform(rng, max_len));
}

std::string random_string(const MutationContext& ctx, Rng& rng) {
  if (!ctx.payload_strings.empty() && chance(rng, ctx.config->payload_seed_prob)) return payload_slice(ctx, rng);
  if (!ctx.pool->strings.empty() && chance(rng, 0.3)) return ctx.pool->strings[uniform(rng, ctx.pool->strings.size())];
  std::string s(uniform(rng, 9), ' ');
  for (auto& c : s) c = random_char(ctx, rng);
  return s;
}

Value random_number(const MutationContext& ctx, Rng& rng, bool want_float) {
  if (!ctx.payload_numbers.empty() && chance(rng, ctx.config->payload_seed_prob)) {
    const Value& n = ctx.payload_numbers[uniform(rng, ctx.payload_numbers.size())];
    if (n.is_number()) {
      if (want_float) return Value::real(n.as_number());
      return n.is(ValueKind::Int) ? n : Value::integer(static_cast<std::int64_t>(n.as_number()));
    }
  }
  if (!ctx.pool->numbers.empty() && chance(rng, 0.3)) {
    const Value& n = ctx.pool->numbers[uniform(rng, ctx.pool->numbers.size())];
    if (want_float) return Value::real(n.as_number());
    return n.is(ValueKind::Int) ? n : Value::integer(static_cast<std::int64_t>(n.as_number()));
  }
  std::int64_t i = static_cast<std::int64_t>(uniform(rng, 111)) - 10;
  if (want_float) return Value::real(static_cast<double>(i) + static_cast<double>(uniform(rng, 4)) * 0.25);
  return Value::integer(i);
}

std::string random_key(const MutationContext& ctx, Rng& rng) {
  if (!ctx.payload_keys.empty() && chance(rng, 0.5)) return ctx.payload_keys[uniform(rng, ctx.payload_keys.size())];
  std::vector<const std::string*> idents;
  for (const auto& s : ctx.pool->strings) {
    if (is_identifier(s)) idents.push_back(&s);
  }
  if (!idents.empty() && chance(rng, 0.6)) return *idents[uniform(rng, idents.size())];
  static const char* fallback[] = {"a", "b", "name", "value", "id"};
  return fallback[uniform(rng, 5)];
}

Value random_file(const MutationContext& ctx, Rng& rng, std::string content) {
  (void)rng;
  if (content.size() > ctx.config->max_string_len) content.resize(ctx.config->max_string_len);
  return Value::file(materialize_content(ctx.sandbox, content));
}

Value random_value(std::optional<ParamType> type, const MutationContext& ctx, Rng& rng, int depth) {
  ValueKind kind;
  if (type) {
    kind = value_kind_of(*type);
  } else {
    static const ValueKind kinds[] = {ValueKind::Str,    ValueKind::Str,    ValueKind::Str,   ValueKind::Str,
                                      ValueKind::Int,    ValueKind::Int,    ValueKind::Float, ValueKind::Bool,
                                      ValueKind::Null,   ValueKind::Record, ValueKind::Record, ValueKind::Record,
                                      ValueKind::List,   ValueKind::List};
    kind = kinds[uniform(rng, depth > 0 ? 14 : 9)];
  }
  switch (kind) {
    case ValueKind::Null: return Value();
    case ValueKind::Bool: return Value::boolean(chance(rng, 0.5));
    case ValueKind::Int: return random_number(ctx, rng, false);
    case ValueKind::Float: return random_number(ctx, rng, true);
    case ValueKind::Str: return Value::string(random_string(ctx, rng));
    case ValueKind::List: {
      List items;
      for (std::size_t n = uniform(rng, 4); n > 0; --n) items.push_back(random_value(std::nullopt, ctx, rng, depth - 1));
      return Value::list(std::move(items));
    }
    case ValueKind::Record: {
      Value r = Value::record({});
      for (std::size_t n = uniform(rng, 4); n > 0; --n) {
        r.set_field(random_key(ctx, rng), random_value(std::nullopt, ctx, rng, depth - 1));
      }
      return r;
    }
    case ValueKind::File: return random_file(ctx, rng, random_string(ctx, rng));
  }
  return Value();
}

std::string mutate_string(std::string s, const MutationContext& ctx, Rng& rng) {
  if (!ctx.payload_strings.empty() && chance(rng, ctx.config->payload_seed_prob)) {
    if (chance(rng, 0.5)) {
      s += payload_slice(ctx, rng);
    } else {
      s.insert(uniform(rng, s.size() + 1), payload_slice(ctx, rng));
    }
  } else {
    std::size_t ops = ctx.pool->strings.empty() ? 3 : 4;
    switch (uniform(rng, ops)) {
      case 0: s.insert(s.begin() + static_cast<std::ptrdiff_t>(uniform(rng, s.size() + 1)), random_char(ctx, rng)); break;
      case 1:
        if (!s.empty()) s.erase(uniform(rng, s.size()), 1);
        break;
      case 2:
        if (s.empty()) {
          s.push_back(random_char(ctx, rng));
        } else {
          s[uniform(rng, s.size())] = random_char(ctx, rng);
        }
        break;
      default: s = ctx.pool->strings[uniform(rng, ctx.pool->strings.size())]; break;
    }
  }
  if (s.size() > ctx.config->max_string_len) s.resize(ctx.config->max_string_len);
  return s;
}

std::int64_t geometric_step(Rng& rng) {
  std::int64_t step = 1;
  while (step < (std::int64_t{1} << 20) && chance(rng, 0.5)) step *= 2;
  return chance(rng, 0.5) ? step : -step;
}

Value mutate_value(const Value& v, std::optional<ParamType> type, const MutationContext& ctx, Rng& rng, int depth) {
  if (chance(rng, 0.1)) return random_value(type, ctx, rng, depth);
  switch (v.kind()) {
    case ValueKind::Null: return random_value(type, ctx, rng, depth);
    case ValueKind::Bool: return Value::boolean(!v.as_bool());
    case ValueKind::Int:
      if (!ctx.payload_numbers.empty() && chance(rng, ctx.config->payload_seed_prob)) return random_number(ctx, rng, false);
      return Value::integer(wrap_add(v.as_int(), geometric_step(rng)));
    case ValueKind::Float:
      if (!ctx.payload_numbers.empty() && chance(rng, ctx.config->payload_seed_prob)) return random_number(ctx, rng, true);
      return Value::real(v.as_float() + static_cast<double>(geometric_step(rng)) * 0.5);
    case ValueKind::Str: return Value::string(mutate_string(v.as_str(), ctx, rng));
    case ValueKind::List: {
      List items = v.as_list();
      std::size_t op = items.empty() ? 0 : uniform(rng, 3);
      if (op == 0 && items.size() < 16) {
        items.push_back(random_value(std::nullopt, ctx, rng, depth - 1));
      } else if (op == 1) {
        items.erase(items.begin() + static_cast<std::ptrdiff_t>(uniform(rng, items.size())));
      } else if (!items.empty()) {
        auto& item = items[uniform(rng, items.size())];
        item = mutate_value(item, std::nullopt, ctx, rng, depth - 1);
      }
      return Value::list(std::move(items));
    }
    case ValueKind::Record: {
      Value r = v;
      const Record& fields = v.as_record();
      std::size_t op = fields.empty() ? 0 : uniform(rng, 8);
      if (op <= 1) {
        r.set_field(random_key(ctx, rng), random_value(std::nullopt, ctx, rng, depth - 1));
      } else if (op == 2) {
        Record rest = fields;
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(uniform(rng, rest.size())));
        r = Value::record(std::move(rest));
      } else {
        const auto& f = fields[uniform(rng, fields.size())];
        r.set_field(f.first, mutate_value(f.second, std::nullopt, ctx, rng, depth - 1));
      }
      return r;
    }
    case ValueKind::File: {
      std::string content;
      try {
        content = v.as_file().read();
      } catch (const std::runtime_error&) {
      }
      return random_file(ctx, rng, mutate_string(std::move(content), ctx, rng));
    }
  }
  return v;
}

struct Evaluation {
  FitnessScore score;
  bool hit = false;
  bool entry_executed = false;
};

class Evaluator {
 public:
  Evaluator(const Program& program, const Goals& goals, const ExploitPayload& payload, const Budgets& budgets,
            const std::filesystem::path& sandbox, std::size_t workers)
      : program_(program), goals_(goals), payload_(payload), budgets_(budgets), sandbox_(sandbox),
        workers_(std::max<std::size_t>(1, workers)) {
    options_.branch_filter.assign(program.branch_sites().size(), false);
    for (const auto& hop : goals.path.guard_branches) {
      for (const auto& g : hop) options_.branch_filter[static_cast<std::size_t>(g.site)] = true;
    }
    if (std::none_of(options_.branch_filter.begin(), options_.branch_filter.end(), [](bool b) { return b; })) {
      options_.max_branch_records = 0;
    }
  }

  std::vector<Evaluation> evaluate(const std::vector<TestCase>& tests, const std::vector<std::uint64_t>& ids) {
    std::vector<Evaluation> out(tests.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      auto it = cache_.find(ids[i]);
      if (it != cache_.end()) {
        out[i] = it->second;
      } else if (std::find_if(todo.begin(), todo.end(), [&](std::size_t j) { return ids[j] == ids[i]; }) == todo.end()) {
        todo.push_back(i);
      }
    }
    std::vector<Evaluation> fresh(todo.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
      for (std::size_t k = begin; k < todo.size(); k += stride) fresh[k] = run_one(tests[todo[k]]);
    };
    if (workers_ > 1 && todo.size() > 1) {
      std::vector<std::thread> threads;
      std::size_t n = std::min(workers_, todo.size());
      for (std::size_t w = 0; w < n; ++w) threads.emplace_back(work, w, n);
      for (auto& t : threads) t.join();
    } else {
      work(0, 1);
    }
    for (std::size_t k = 0; k < todo.size(); ++k) cache_.emplace(ids[todo[k]], fresh[k]);
    for (std::size_t i = 0; i < tests.size(); ++i) out[i] = cache_.at(ids[i]);
    evaluations_ += todo.size();
    return out;
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  Evaluation run_one(const TestCase& test) const {
    InstrumentedRun run =
        run_instrumented(program_, test, goals_.vulnerable, std::nullopt, budgets_, sandbox_, options_);
    Evaluation e;
    e.score = fitness(run, goals_, payload_);
    e.hit = run.dyn_graph.has_value();
    e.entry_executed = run.executed(test.entry);
    return e;
  }

  const Program& program_;
  const Goals& goals_;
  const ExploitPayload& payload_;
  const Budgets& budgets_;
  const std::filesystem::path& sandbox_;
  std::size_t workers_;
  InstrumentOptions options_;
  std::unordered_map<std::uint64_t, Evaluation> cache_;
  std::size_t evaluations_ = 0;
};

struct Individual {
  TestCase test;
  std::uint64_t id = 0;
  Evaluation eval;
};

}  // namespace

std::string GaConfig::validate() const {
  auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (population == 0) return "population must be positive";
  if (tournament == 0) return "tournament must be positive";
  if (!rate(crossover_rate) || !rate(per_arg_mutation_rate) || !rate(payload_seed_prob) || !rate(entry_redraw_prob)) {
    return "rates must lie in [0, 1]";
  }
  if (population < elitism) return "population must be at least elitism";
  if (!(budget_secs > 0)) return "budget_secs must be positive";
  if (max_seed_len == 0 || max_string_len == 0) return "length caps must be positive";
  if (top_candidates == 0) return "top_candidates must be positive";
  if (eval_max_steps == 0) return "eval_max_steps must be positive";
  return {};
}

double branch_distance(BinaryOp op, const Value& lhs, const Value& rhs) {
  auto boolean = [](bool ok) { return ok ? 0.0 : 1.0; };
  if (lhs.is_number() && rhs.is_number()) {
    double a = lhs.as_number(), b = rhs.as_number();
    if (std::isnan(a) || std::isnan(b)) return 1.0;
    double d;
    switch (op) {
      case BinaryOp::Eq: d = std::fabs(a - b); break;
      case BinaryOp::Ne: d = a == b ? 1.0 : 0.0; break;
      case BinaryOp::Lt: d = a < b ? 0.0 : a - b + 1.0; break;
      case BinaryOp::Le: d = a <= b ? 0.0 : a - b; break;
      case BinaryOp::Gt: d = a > b ? 0.0 : b - a + 1.0; break;
      case BinaryOp::Ge: d = a >= b ? 0.0 : b - a; break;
      default: return 1.0;
    }
    return std::isfinite(d) ? d : 1e300;
  }
  if (lhs.is(ValueKind::Str) && rhs.is(ValueKind::Str)) {
    const std::string& a = lhs.as_str();
    const std::string& b = rhs.as_str();
    switch (op) {
      case BinaryOp::Eq: return static_cast<double>(levenshtein(a, b));
      case BinaryOp::Ne: return boolean(a != b);
      case BinaryOp::Lt: return boolean(a < b);
      case BinaryOp::Le: return boolean(a <= b);
      case BinaryOp::Gt: return boolean(a > b);
      case BinaryOp::Ge: return boolean(a >= b);
      default: return 1.0;
    }
  }
  if (lhs.is(ValueKind::Bool) && rhs.is(ValueKind::Bool)) {
    if (op == BinaryOp::Eq) return boolean(lhs.as_bool() == rhs.as_bool());
    if (op == BinaryOp::Ne) return boolean(lhs.as_bool() != rhs.as_bool());
  }
  return 1.0;
}

double branch_distance_towards(BinaryOp op, const Value& lhs, const Value& rhs, bool required) {
  return branch_distance(required ? op : negate(op), lhs, rhs);
}

FitnessScore fitness(const InstrumentedRun& run, const Goals& goals, const ExploitPayload& payload) {
  FitnessScore s;
  for (const auto& fn : run.functions_executed) {
    if (fn.module == goals.entry.module) {
      s.entry_module_hit = 1;
      break;
    }
  }
  s.entry_function_hit = run.executed(goals.entry) ? 1 : 0;
  if (run.dyn_graph) {
    s.reach = 1;
    std::size_t pi = payload.primary_index;
    if (pi < run.dyn_graph->capture_args.size() && pi < payload.values.size()) {
      s.sim = similarity(run.dyn_graph->capture_args[pi], payload.values[pi]);
    }
    return s;
  }
  const auto& path = goals.path.functions;
  if (path.empty()) return s;
  std::optional<std::size_t> deepest;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (run.executed(path[k])) deepest = k;
  }
  if (!deepest) return s;
  std::size_t n = path.size();
  double approach = static_cast<double>(n - 1 - *deepest);
  // A guard that was never evaluated ranks below every evaluated one.
  double nu = 1.0;
  if (*deepest < goals.path.guard_branches.size()) {
    const auto& guards = goals.path.guard_branches[*deepest];
    bool evaluated = false;
    std::optional<double> best;
    for (const auto& rec : run.branch_trace) {
      for (const auto& g : guards) {
        if (g.site != rec.site) continue;
        evaluated = true;
        if (rec.taken == g.required) continue;
        double d = rec.operands ? branch_distance_towards(rec.operands->op, rec.operands->lhs, rec.operands->rhs, g.required)
                                : 1.0;
        if (!best || d < *best) best = d;
      }
    }
    if (best) {
      nu = normalize_distance(*best);
    } else if (evaluated) {
      nu = 0.0;
    }
  }
  s.reach = std::clamp(1.0 - (approach + nu) / static_cast<double>(n), 0.0, 1.0);
  return s;
}

ConstantPool harvest_constants(const Program& program) {
  ConstantPool pool;
  std::vector<std::string> ss;
  std::vector<Value> sn;
  for (const auto& m : program.modules()) {
    if (m.role != ModuleRole::Project) continue;
    for (const auto& fn : m.ast.functions) harvest_block(fn->body, pool, ss, sn);
  }
  return pool;
}

MutationContext MutationContext::build(const Program& program, const GaConfig& config, const ConstantPool& pool,
                                       const ExploitPayload& payload, std::vector<QualifiedName> entries,
                                       std::filesystem::path sandbox) {
  MutationContext ctx;
  ctx.program = &program;
  ctx.config = &config;
  ctx.pool = &pool;
  for (const auto& v : payload.values) collect_payload(v, ctx, 0);
  std::sort(ctx.payload_keys.begin(), ctx.payload_keys.end());
  ctx.payload_keys.erase(std::unique(ctx.payload_keys.begin(), ctx.payload_keys.end()), ctx.payload_keys.end());
  ctx.entries = std::move(entries);
  ctx.sandbox = std::move(sandbox);
  return ctx;
}

TestCase random_test(const QualifiedName& entry, const MutationContext& ctx, Rng& rng) {
  const FunctionDecl* fn = ctx.program->find(entry);
  TestCase t{entry, {}};
  for (const auto& p : fn->params) t.args.push_back(random_value(p.type, ctx, rng, 2));
  return t;
}

TestCase mutate(const TestCase& test, const MutationContext& ctx, Rng& rng) {
  if (ctx.entries.size() > 1 && chance(rng, ctx.config->entry_redraw_prob)) {
    const QualifiedName& e = ctx.entries[uniform(rng, ctx.entries.size())];
    if (!(e == test.entry)) return random_test(e, ctx, rng);
  }
  const FunctionDecl* fn = ctx.program->find(test.entry);
  TestCase out = test;
  bool changed = false;
  for (std::size_t i = 0; i < out.args.size(); ++i) {
    if (chance(rng, ctx.config->per_arg_mutation_rate)) {
      out.args[i] = mutate_value(out.args[i], fn->params[i].type, ctx, rng, 2);
      changed = true;
    }
  }
  if (!changed && !out.args.empty()) {
    std::size_t i = uniform(rng, out.args.size());
    out.args[i] = mutate_value(out.args[i], fn->params[i].type, ctx, rng, 2);
  }
  return out;
}

std::pair<TestCase, TestCase> crossover_at(const TestCase& a, const TestCase& b, std::size_t point) {
  if (!(a.entry == b.entry) || a.args.size() != b.args.size() || point == 0 || point >= a.args.size()) return {a, b};
  TestCase x = a, y = b;
  for (std::size_t i = point; i < a.args.size(); ++i) {
    x.args[i] = b.args[i];
    y.args[i] = a.args[i];
  }
  return {x, y};
}

std::pair<TestCase, TestCase> crossover(const TestCase& a, const TestCase& b, Rng& rng) {
  if (!(a.entry == b.entry) || a.args.size() < 2) return {a, b};
  return crossover_at(a, b, 1 + uniform(rng, a.args.size() - 1));
}

std::size_t GenerationResult::generations() const {
  std::size_t n = 0;
  for (const auto& c : candidates) n += c.generations;
  return n;
}

std::size_t GenerationResult::evaluations() const {
  std::size_t n = 0;
  for (const auto& c : candidates) n += c.evaluations;
  return n;
}

GenerationResult generate(const Program& program, const std::vector<EntryCandidate>& candidates,
                          const QualifiedName& vulnerable, const ExploitPayload& payload, const GaConfig& config,
                          const Budgets& budgets, const std::filesystem::path& sandbox_root) {
  GenerationResult result;
  if (candidates.empty()) return result;
  std::size_t ncand = std::min(config.top_candidates, candidates.size());
  std::vector<QualifiedName> entries;
  for (std::size_t c = 0; c < ncand; ++c) entries.push_back(candidates[c].function);
  ConstantPool pool = harvest_constants(program);
  MutationContext ctx = MutationContext::build(program, config, pool, payload, entries, sandbox_root);
  Budgets eval_budgets = budgets;
  eval_budgets.max_steps = std::min(budgets.max_steps, config.eval_max_steps);
  auto slice = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.budget_secs / ncand));

  std::map<std::uint64_t, ScoredTest> archive;
  std::optional<Individual> overall;
  bool done = false;

  for (std::size_t c = 0; c < ncand && !done; ++c) {
    const EntryCandidate& cand = candidates[c];
    Goals goals{cand.function, vulnerable, cand.path};
    Evaluator evaluator(program, goals, payload, eval_budgets, sandbox_root, config.workers);
    Rng rng(config.rng_seed * 0x9E3779B97F4A7C15ull + c + 1);
    CandidateStats stats;
    stats.entry = cand.function;
    auto deadline = Clock::now() + slice;

    auto score = [&](std::vector<Individual>& pop) {
      std::vector<TestCase> tests;
      std::vector<std::uint64_t> ids;
      for (auto& ind : pop) {
        ind.id = ind.test.id();
        tests.push_back(ind.test);
        ids.push_back(ind.id);
      }
      auto evals = evaluator.evaluate(tests, ids);
      for (std::size_t i = 0; i < pop.size(); ++i) {
        pop[i].eval = evals[i];
        if (evals[i].entry_executed) result.failed = false;
        if (evals[i].hit && !archive.count(pop[i].id)) {
          archive.emplace(pop[i].id, ScoredTest{pop[i].test, evals[i].score, true});
          if (!stats.covered_at) stats.covered_at = stats.generations;
        }
      }
      std::sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
        return better(a.eval.score, a.id, b.eval.score, b.id);
      });
    };

    std::vector<Individual> pop(config.population);
    for (auto& ind : pop) ind.test = random_test(cand.function, ctx, rng);
    score(pop);
    double best_total = pop.front().eval.score.total();
    stats.best_trajectory.push_back(best_total);
    std::size_t stall = 0;

    auto tournament = [&]() -> const Individual& {
      std::size_t best = uniform(rng, pop.size());
      for (std::size_t k = 1; k < config.tournament; ++k) {
        std::size_t other = uniform(rng, pop.size());
        if (better(pop[other].eval.score, pop[other].id, pop[best].eval.score, pop[best].id)) best = other;
      }
      return pop[best];
    };

    for (;;) {
      const Individual& top = pop.front();
      if (top.eval.hit && top.eval.score.sim >= 1.0 - 1e-12) {
        stats.stop_reason = "payload_reached";
        done = true;
        break;
      }
      if (stats.covered_at && stall >= config.stall_generations) {
        stats.stop_reason = "stalled";
        break;
      }
      if (!stats.covered_at && stall >= 3 * config.stall_generations) {
        stats.stop_reason = "stalled_uncovered";
        break;
      }
      if (stats.generations >= config.max_generations) {
        stats.stop_reason = "max_generations";
        break;
      }
      if (Clock::now() >= deadline) {
        stats.stop_reason = "budget";
        break;
      }

      std::vector<Individual> next;
      next.reserve(config.population);
      if (config.random_search) {
        while (next.size() < config.population) next.push_back({random_test(cand.function, ctx, rng), 0, {}});
        next.push_back(pop.front());
      } else {
        for (std::size_t e = 0; e < config.elitism && e < pop.size(); ++e) next.push_back(pop[e]);
        while (next.size() < config.population) {
          TestCase a = tournament().test;
          TestCase b = tournament().test;
          if (chance(rng, config.crossover_rate)) std::tie(a, b) = crossover(a, b, rng);
          next.push_back({mutate(a, ctx, rng), 0, {}});
          if (next.size() < config.population) next.push_back({mutate(b, ctx, rng), 0, {}});
        }
      }
      pop = std::move(next);
      score(pop);
      if (config.random_search) pop.resize(std::min(pop.size(), config.population));
      ++stats.generations;
      double t = pop.front().eval.score.total();
      stats.best_trajectory.push_back(t);
      if (t > best_total + 1e-12) {
        best_total = t;
        stall = 0;
      } else {
        ++stall;
      }
    }
    stats.evaluations = evaluator.evaluations();
    if (!overall || better(pop.front().eval.score, pop.front().id, overall->eval.score, overall->id)) {
      overall = pop.front();
    }
    result.candidates.push_back(std::move(stats));
  }

  for (auto& [id, st] : archive) result.archive.push_back(std::move(st));
  std::stable_sort(result.archive.begin(), result.archive.end(), [](const ScoredTest& a, const ScoredTest& b) {
    return better(a.score, a.test.id(), b.score, b.test.id());
  });
  if (!result.archive.empty()) {
    result.best = result.archive.front();
  } else if (overall) {
    result.best = ScoredTest{overall->test, overall->eval.score, overall->eval.hit};
  }
  return result;
}

}  // namespace vexploit

#include "vexploit/migration.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>

#include "vexploit/similarity.hpp"

namespace vexploit {

namespace {

constexpr std::array<std::pair<std::string_view, TriggerKind>, 8> kTriggerKinds{{
    {"dos_uncaught_exception", TriggerKind::DosUncaughtException},
    {"dos_infinite_loop", TriggerKind::DosInfiniteLoop},
    {"dos_stack_overflow", TriggerKind::DosStackOverflow},
    {"rce", TriggerKind::Rce},
    {"xxe", TriggerKind::Xxe},
    {"sqli", TriggerKind::Sqli},
    {"wrong_behavior", TriggerKind::WrongBehavior},
    {"path_traversal", TriggerKind::PathTraversal},
}};

constexpr std::array<std::pair<std::string_view, OracleSpec::Kind>, 3> kOracleKinds{{
    {"no_exception", OracleSpec::Kind::NoException},
    {"return_equals", OracleSpec::Kind::ReturnEquals},
    {"return_differs", OracleSpec::Kind::ReturnDiffers},
}};

constexpr std::array<std::pair<std::string_view, Verdict>, 3> kVerdicts{{
    {"exploitable", Verdict::Exploitable},
    {"not_exploitable", Verdict::NotExploitable},
    {"inconclusive", Verdict::Inconclusive},
}};

template <typename T, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, T>, N>& table, T v) {
  for (auto [n, x] : table) {
    if (x == v) return n;
  }
  return "?";
}

template <typename T, std::size_t N>
std::optional<T> from_name(const std::array<std::pair<std::string_view, T>, N>& table, std::string_view name) {
  for (auto [n, x] : table) {
    if (n == name) return x;
  }
  return std::nullopt;
}

std::string replace_hole(const std::string& pattern, const std::string& text) {
  std::string out = pattern;
  std::size_t pos = out.find(MigrationRule::kHole);
  out.replace(pos, MigrationRule::kHole.size(), text);
  return out;
}

// Text spliced into templates and affixes.
std::optional<std::string> splice_text(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Str: return v.as_str();
    case ValueKind::Int:
    case ValueKind::Float:
    case ValueKind::Bool: return display(v);
    case ValueKind::File:
      try {
        return v.as_file().read();
      } catch (const std::runtime_error&) {
        return std::nullopt;
      }
    default: return render_literal(v);
  }
}

// Location of `needle` inside `hay` as a chain of record keys / list indices.
struct Step {
  std::string key;
  std::size_t index = 0;
  bool is_key = true;
};

bool locate(const Value& hay, const Value& needle, std::vector<Step>& path, int depth) {
  if (depth > 0 && loose_equals(hay, needle)) return true;
  if (depth > 4) return false;
  if (hay.is(ValueKind::Record)) {
    for (const auto& [k, v] : hay.as_record()) {
      path.push_back({k, 0, true});
      if (locate(v, needle, path, depth + 1)) return true;
      path.pop_back();
    }
  } else if (hay.is(ValueKind::List)) {
    const List& items = hay.as_list();
    for (std::size_t i = 0; i < items.size(); ++i) {
      path.push_back({{}, i, false});
      if (locate(items[i], needle, path, depth + 1)) return true;
      path.pop_back();
    }
  }
  return false;
}

Value replace_at(const Value& hay, const std::vector<Step>& path, std::size_t i, const Value& value) {
  if (i == path.size()) return value;
  Value out = hay;
  if (path[i].is_key) {
    out.set_field(path[i].key, replace_at(*hay.field(path[i].key), path, i + 1, value));
  } else {
    out.mutable_list()[path[i].index] = replace_at(hay.as_list()[path[i].index], path, i + 1, value);
  }
  return out;
}

std::optional<Value> embed(const Value& value, ValueKind container, const RuleContext& ctx) {
  if (ctx.original && ctx.received && ctx.original->is(container)) {
    std::vector<Step> path;
    if (locate(*ctx.original, *ctx.received, path, 0)) return replace_at(*ctx.original, path, 0, value);
  }
  return std::nullopt;
}

std::optional<Value> convert(const Value& value, ParamType target, const RuleContext& ctx) {
  ValueKind to = value_kind_of(target);
  if (value.is(to)) return std::nullopt;
  switch (to) {
    case ValueKind::Int: {
      if (value.is(ValueKind::Str)) {
        const std::string& s = value.as_str();
        std::int64_t out = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
        return Value::integer(out);
      }
      if (value.is(ValueKind::Float) && std::isfinite(value.as_float()) &&
          value.as_float() == std::trunc(value.as_float()) && std::fabs(value.as_float()) < 9.2e18) {
        return Value::integer(static_cast<std::int64_t>(value.as_float()));
      }
      return std::nullopt;
    }
    case ValueKind::Float: {
      if (value.is(ValueKind::Str)) {
        const std::string& s = value.as_str();
        double out = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
        return Value::real(out);
      }
      if (value.is(ValueKind::Int)) return Value::real(static_cast<double>(value.as_int()));
      return std::nullopt;
    }
    case ValueKind::Bool:
      if (value.is(ValueKind::Str) && (value.as_str() == "true" || value.as_str() == "false")) {
        return Value::boolean(value.as_str() == "true");
      }
      return std::nullopt;
    case ValueKind::Str:
      if (value.is_number() || value.is(ValueKind::Bool)) return Value::string(display(value));
      if (value.is(ValueKind::File)) {
        auto text = splice_text(value);
        if (!text) return std::nullopt;
        return Value::string(*text);
      }
      return std::nullopt;
    case ValueKind::List: {
      if (auto v = embed(value, ValueKind::List, ctx)) return v;
      if (value.is(ValueKind::Str)) {
        List chars;
        for (char c : value.as_str()) chars.push_back(Value::string(std::string(1, c)));
        return Value::list(std::move(chars));
      }
      return Value::list({value});
    }
    case ValueKind::Record: {
      if (auto v = embed(value, ValueKind::Record, ctx)) return v;
      return Value::record({{"value", value}});
    }
    case ValueKind::File:
    case ValueKind::Null: return std::nullopt;
  }
  return std::nullopt;
}

struct Attempt {
  TestCase test;
  std::size_t position = 0;
  Value value;
  RuleChain rules;
};

}  // namespace

std::string_view trigger_kind_name(TriggerKind k) noexcept { return name_of(kTriggerKinds, k); }
std::optional<TriggerKind> trigger_kind_from_name(std::string_view name) noexcept {
  return from_name(kTriggerKinds, name);
}
std::string_view oracle_kind_name(OracleSpec::Kind k) noexcept { return name_of(kOracleKinds, k); }
std::optional<OracleSpec::Kind> oracle_kind_from_name(std::string_view name) noexcept {
  return from_name(kOracleKinds, name);
}
std::string_view verdict_name(Verdict v) noexcept { return name_of(kVerdicts, v); }
std::optional<Verdict> verdict_from_name(std::string_view name) noexcept { return from_name(kVerdicts, name); }

std::string TriggerCondition::validate() const {
  if (kind == TriggerKind::WrongBehavior && !oracle) return "wrong_behavior requires an oracle";
  if (kind != TriggerKind::WrongBehavior && oracle) return "oracle is only meaningful for wrong_behavior";
  if (kind == TriggerKind::Sqli) {
    if (sql_pattern.empty()) return "sqli requires sql_pattern";
    try {
      std::regex re(sql_pattern);
    } catch (const std::regex_error& e) {
      return std::string("bad sql_pattern: ") + e.what();
    }
  }
  return {};
}

std::string url_host(std::string_view url) {
  std::string rest(url);
  if (auto scheme = rest.find("://"); scheme != std::string::npos) rest.erase(0, scheme + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (auto at = rest.rfind('@'); at != std::string::npos) rest.erase(0, at + 1);
  if (auto colon = rest.rfind(':'); colon != std::string::npos) rest.erase(colon);
  return rest;
}

TriggerCheck detect_trigger(const InstrumentedRun& run, const TriggerCondition& condition,
                            std::string_view attacker_host) {
  TriggerCheck out;
  const ExecutionOutcome& o = run.outcome;
  auto outcome_is = [&](OutcomeKind k) {
    if (o.kind != k) return;
    out.triggered = true;
    std::string e = "outcome: " + std::string(outcome_kind_name(o.kind));
    if (!o.message.empty()) e += ": " + o.message;
    out.evidence.push_back(std::move(e));
  };
  switch (condition.kind) {
    case TriggerKind::DosUncaughtException: outcome_is(OutcomeKind::UncaughtException); break;
    case TriggerKind::DosInfiniteLoop: outcome_is(OutcomeKind::StepBudgetExceeded); break;
    case TriggerKind::DosStackOverflow: outcome_is(OutcomeKind::DepthBudgetExceeded); break;
    case TriggerKind::Rce:
    case TriggerKind::Xxe:
      for (const auto& n : o.sinks.net) {
        if (url_host(n.url) == attacker_host) {
          out.triggered = true;
          out.evidence.push_back("net: " + n.url);
        }
      }
      break;
    case TriggerKind::Sqli: {
      std::regex re(condition.sql_pattern);
      for (const auto& q : o.sinks.sql) {
        if (std::regex_search(q, re)) {
          out.triggered = true;
          out.evidence.push_back("sql: " + q);
        }
      }
      break;
    }
    case TriggerKind::WrongBehavior: {
      if (!condition.oracle) break;
      const OracleSpec& oracle = *condition.oracle;
      if (oracle.kind == OracleSpec::Kind::NoException) {
        if (o.kind == OutcomeKind::Returned) {
          out.triggered = true;
          out.evidence.push_back("oracle: no_exception");
        }
      } else if (run.target_return) {
        bool equal = loose_equals(*run.target_return, oracle.literal);
        if (equal == (oracle.kind == OracleSpec::Kind::ReturnEquals)) {
          out.triggered = true;
          out.evidence.push_back("oracle: " + std::string(oracle_kind_name(oracle.kind)) + " " +
                                 render_literal(*run.target_return));
        }
      }
      break;
    }
    case TriggerKind::PathTraversal:
      for (const auto& f : o.sinks.files) {
        if (!f.allowed) {
          out.triggered = true;
          out.evidence.push_back("file: " + f.requested);
        }
      }
      break;
  }
  return out;
}

MigrationRule MigrationRule::marker_substitute() { return MigrationRule{}; }

MigrationRule MigrationRule::type_convert(ParamType target) {
  MigrationRule r;
  r.kind = Kind::TypeConvert;
  r.target = target;
  return r;
}

MigrationRule MigrationRule::affix(std::string prefix, std::string suffix) {
  MigrationRule r;
  r.kind = Kind::AffixString;
  r.prefix = std::move(prefix);
  r.suffix = std::move(suffix);
  return r;
}

MigrationRule MigrationRule::make_template(std::string pattern) {
  std::size_t first = pattern.find(kHole);
  if (first == std::string::npos || pattern.find(kHole, first + 1) != std::string::npos) {
    throw std::invalid_argument("template must contain " + std::string(kHole) + " exactly once: " + pattern);
  }
  MigrationRule r;
  r.kind = Kind::Template;
  r.pattern = std::move(pattern);
  return r;
}

MigrationRule MigrationRule::file_materialize() {
  MigrationRule r;
  r.kind = Kind::FileMaterialize;
  return r;
}

std::string MigrationRule::str() const {
  switch (kind) {
    case Kind::MarkerSubstitute: return "marker_substitute";
    case Kind::TypeConvert: return "type_convert(" + std::string(param_type_name(target)) + ")";
    case Kind::AffixString:
      return "affix(" + render_literal(Value::string(prefix)) + ", " + render_literal(Value::string(suffix)) + ")";
    case Kind::Template: return "template(" + render_literal(Value::string(pattern)) + ")";
    case Kind::FileMaterialize: return "file_materialize";
  }
  return "?";
}

std::string chain_str(const RuleChain& chain) {
  if (chain.empty()) return "direct";
  std::string out;
  for (const auto& r : chain) {
    if (!out.empty()) out += " -> ";
    out += r.str();
  }
  return out;
}

std::optional<Value> apply_rule(const MigrationRule& rule, const Value& value, const RuleContext& ctx) {
  switch (rule.kind) {
    case MigrationRule::Kind::MarkerSubstitute: {
      Value out = substitute_markers(value, ctx.attacker_host);
      if (out == value) return std::nullopt;
      return out;
    }
    case MigrationRule::Kind::TypeConvert: return convert(value, rule.target, ctx);
    case MigrationRule::Kind::AffixString: {
      if (!value.is(ValueKind::Str) && !value.is_number()) return std::nullopt;
      return Value::string(rule.prefix + display(value) + rule.suffix);
    }
    case MigrationRule::Kind::Template: {
      auto text = splice_text(value);
      if (!text) return std::nullopt;
      return Value::string(replace_hole(rule.pattern, *text));
    }
    case MigrationRule::Kind::FileMaterialize:
      if (!value.is(ValueKind::Str) || ctx.sandbox.empty()) return std::nullopt;
      return Value::file(materialize_content(ctx.sandbox, value.as_str()));
  }
  return std::nullopt;
}

std::optional<Value> apply_chain(const RuleChain& chain, const Value& value, const RuleContext& ctx) {
  Value v = value;
  for (const auto& r : chain) {
    auto next = apply_rule(r, v, ctx);
    if (!next) return std::nullopt;
    v = std::move(*next);
  }
  return v;
}

std::vector<RuleChain> candidate_chains(const std::vector<std::string>& templates, const RuleContext& ctx,
                                        const Value& payload) {
  std::vector<MigrationRule> singles;
  singles.push_back(MigrationRule::marker_substitute());
  std::vector<ParamType> targets;
  if (ctx.annotation) {
    targets.push_back(*ctx.annotation);
  } else if (ctx.original && !ctx.original->is(payload.kind())) {
    for (ParamType t : {ParamType::Int, ParamType::Float, ParamType::Bool, ParamType::Str, ParamType::List,
                        ParamType::Record}) {
      if (value_kind_of(t) == ctx.original->kind()) targets.push_back(t);
    }
  }
  for (ParamType t : targets) singles.push_back(MigrationRule::type_convert(t));
  for (const auto& t : templates) singles.push_back(MigrationRule::make_template(t));
  // The covering run shows how the argument was cut down on its way to the
  // vulnerable function; wrap the payload in the same surroundings.
  if (ctx.original && ctx.received && ctx.original->is(ValueKind::Str) && ctx.received->is(ValueKind::Str) &&
      !ctx.received->as_str().empty()) {
    const std::string& o = ctx.original->as_str();
    std::size_t at = o.find(ctx.received->as_str());
    if (at != std::string::npos && ctx.received->as_str().size() < o.size()) {
      singles.push_back(MigrationRule::affix(o.substr(0, at), o.substr(at + ctx.received->as_str().size())));
    }
  }
  singles.push_back(MigrationRule::file_materialize());

  std::vector<RuleChain> chains;
  for (const auto& r : singles) chains.push_back({r});
  for (const auto& a : singles) {
    for (const auto& b : singles) {
      if (!(a == b)) chains.push_back({a, b});
    }
  }
  return chains;
}

namespace {

InstrumentedRun execute_test(const Program& program, const TestCase& test, const QualifiedName& vulnerable,
                             const MigrationSettings& settings) {
  InstrumentOptions options;
  options.max_branch_records = 0;
  return run_instrumented(program, test, vulnerable, std::nullopt, settings.budgets, settings.sandbox, options);
}

void fill_from_run(TriggerReport& report, const InstrumentedRun& run, const Value& expected, std::size_t primary) {
  report.outcome = std::string(outcome_kind_name(run.outcome.kind));
  report.call_path = run.dyn_graph;
  report.received_value.reset();
  report.received_similarity = 0;
  if (run.dyn_graph && primary < run.dyn_graph->capture_args.size()) {
    report.received_value = run.dyn_graph->capture_args[primary];
    report.received_similarity = similarity(*report.received_value, expected);
  }
}

}  // namespace

TriggerReport check_test(const Program& program, const TestCase& test, const ExploitPayload& payload,
                         const QualifiedName& vulnerable, const TriggerCondition& condition,
                         const MigrationSettings& settings) {
  TriggerReport report;
  Value expected = substitute_markers(payload.primary(), settings.attacker_host);
  InstrumentedRun run = execute_test(program, test, vulnerable, settings);
  report.executions = 1;
  report.original_test = test;
  report.migrated_test = test;
  fill_from_run(report, run, expected, payload.primary_index);
  TriggerCheck check = detect_trigger(run, condition, settings.attacker_host);
  if (run.dyn_graph && check.triggered) {
    report.verdict = settings.manual ? Verdict::Inconclusive : Verdict::Exploitable;
    report.reason = settings.manual ? "manual_confirmation" : "triggered";
    report.evidence = std::move(check.evidence);
  } else {
    report.verdict = Verdict::NotExploitable;
    report.reason = run.dyn_graph ? "not_triggered" : "not_reached";
  }
  return report;
}

TriggerReport migrate(const Program& program, const std::vector<TestCase>& archive, const ExploitPayload& payload,
                      const QualifiedName& vulnerable, const TriggerCondition& condition,
                      const MigrationSettings& settings) {
  TriggerReport report;
  report.reason = archive.empty() ? "no_covering_test" : "rules_exhausted";
  const Value& raw = payload.primary();
  Value expected = substitute_markers(raw, settings.attacker_host);
  std::optional<double> best_sim;

  std::size_t tests = std::min(settings.max_tests, archive.size());
  for (std::size_t t = 0; t < tests; ++t) {
    const TestCase& base = archive[t];
    const FunctionDecl* fn = program.find(base.entry);
    if (!fn || fn->params.size() != base.args.size() || base.args.empty()) continue;

    InstrumentedRun baseline = execute_test(program, base, vulnerable, settings);
    std::optional<Value> received;
    if (baseline.dyn_graph && payload.primary_index < baseline.dyn_graph->capture_args.size()) {
      received = baseline.dyn_graph->capture_args[payload.primary_index];
    }

    std::vector<RuleContext> contexts;
    std::vector<std::vector<RuleChain>> chains;
    std::size_t longest = 0;
    for (std::size_t p = 0; p < base.args.size(); ++p) {
      RuleContext ctx;
      ctx.annotation = fn->params[p].type;
      ctx.original = base.args[p];
      ctx.received = received;
      ctx.sandbox = settings.sandbox;
      ctx.attacker_host = settings.attacker_host;
      chains.push_back({RuleChain{}});
      for (auto& c : candidate_chains(settings.templates, ctx, raw)) chains.back().push_back(std::move(c));
      longest = std::max(longest, chains.back().size());
      contexts.push_back(std::move(ctx));
    }

    std::set<std::string> tried;
    std::size_t executions = 0;
    for (std::size_t i = 0; i < longest && executions < settings.max_executions_per_test; ++i) {
      for (std::size_t p = 0; p < base.args.size() && executions < settings.max_executions_per_test; ++p) {
        if (i >= chains[p].size()) continue;
        const RuleChain& chain = chains[p][i];
        std::optional<Value> value = apply_chain(chain, raw, contexts[p]);
        if (!value) continue;
        if (!tried.insert(std::to_string(p) + ":" + render_literal(*value)).second) continue;

        Attempt attempt{base, p, *value, chain};
        attempt.test.args[p] = *value;
        InstrumentedRun run = execute_test(program, attempt.test, vulnerable, settings);
        ++executions;
        ++report.executions;

        TriggerCheck check = detect_trigger(run, condition, settings.attacker_host);
        bool triggered = run.dyn_graph && check.triggered;
        double sim = 0;
        if (run.dyn_graph && payload.primary_index < run.dyn_graph->capture_args.size()) {
          sim = similarity(run.dyn_graph->capture_args[payload.primary_index], expected);
        }
        if (triggered || !best_sim || sim > *best_sim) {
          best_sim = sim;
          report.original_test = base;
          report.migrated_test = attempt.test;
          report.substitution = ParamSubstitution{base.entry, p, *value};
          report.rules = chain;
          fill_from_run(report, run, expected, payload.primary_index);
        }
        if (triggered) {
          report.verdict = settings.manual ? Verdict::Inconclusive : Verdict::Exploitable;
          report.reason = settings.manual ? "manual_confirmation" : "triggered";
          report.evidence = std::move(check.evidence);
          return report;
        }
      }
    }
  }
  report.verdict = Verdict::NotExploitable;
  return report;
}

}  // namespace vexploit

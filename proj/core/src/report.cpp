#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "vexploit/pipeline.hpp"
#include "vexploit/vex/parser.hpp"

namespace vexploit {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> opt_string(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

json scalar_json(const ConfigScalar& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

ConfigScalar json_scalar(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw ConfigError("config values must be scalars");
}

}  // namespace

std::string report_to_json(const Report& r, bool include_timings) {
  json j;
  j["schema"] = r.schema;
  j["project"] = r.project;
  j["vuln"] = r.vuln;
  j["vulnerable_function"] = r.vulnerable_function;
  j["trigger"] = r.trigger;
  j["verdict"] = verdict_name(r.verdict);
  j["reason"] = r.reason;
  j["evidence"] = r.evidence;
  j["phase"] = r.phase;
  j["rng_seed"] = r.rng_seed;
  json cfg = json::object();
  for (const auto& [k, v] : r.config) cfg[k] = scalar_json(v);
  j["config"] = cfg;
  j["payload"] = {{"source", r.payload_source},
                  {"primary_index", r.payload_primary_index},
                  {"primary", r.payload_primary}};
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back({{"function", c.function}, {"path", c.path}, {"rank", c.rank}});
  j["candidates"] = cands;
  const auto& e = r.existing_tests;
  j["existing_tests"] = {{"ran", e.ran},
                         {"scanned", e.scanned},
                         {"statically_filtered", e.statically_filtered},
                         {"dynamically_rejected", e.dynamically_rejected},
                         {"covering", e.covering}};
  const auto& g = r.generation;
  json gc = json::array();
  for (const auto& c : g.candidates) {
    gc.push_back({{"entry", c.entry},
                  {"generations", c.generations},
                  {"evaluations", c.evaluations},
                  {"covered_at", c.covered_at ? json(*c.covered_at) : json(nullptr)},
                  {"stop_reason", c.stop_reason},
                  {"best_trajectory", c.best_trajectory}});
  }
  j["generation"] = {{"ran", g.ran},
                     {"failed", g.failed},
                     {"generations", g.generations},
                     {"evaluations", g.evaluations},
                     {"archive_size", g.archive_size},
                     {"best_fitness", g.best_fitness},
                     {"best_test", opt(g.best_test)},
                     {"candidates", gc}};
  const auto& m = r.migration;
  j["migration"] = {{"ran", m.ran},
                    {"original_test", opt(m.original_test)},
                    {"migrated_test", opt(m.migrated_test)},
                    {"substitution",
                     {{"function", opt(m.substitution_function)},
                      {"position", m.substitution_position},
                      {"value", opt(m.substitution_value)}}},
                    {"rules", m.rules},
                    {"executions", m.executions},
                    {"outcome", m.outcome},
                    {"call_path", m.call_path},
                    {"received_value", opt(m.received_value)},
                    {"received_similarity", m.received_similarity}};
  j["sandbox"] = r.sandbox;
  j["rendered_test"] = r.rendered_test;
  if (include_timings) {
    const auto& t = r.timings;
    j["timings"] = {{"analysis", t.analysis},     {"extraction", t.extraction}, {"existing_tests", t.existing_tests},
                    {"generation", t.generation}, {"migration", t.migration},   {"total", t.total}};
  }
  return j.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  Report r;
  try {
    json j = json::parse(text);
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1) throw ConfigError("unsupported report schema " + std::to_string(r.schema));
    r.project = j.at("project").get<std::string>();
    r.vuln = j.at("vuln").get<std::string>();
    r.vulnerable_function = j.at("vulnerable_function").get<std::string>();
    r.trigger = j.at("trigger").get<std::string>();
    auto v = verdict_from_name(j.at("verdict").get<std::string>());
    if (!v) throw ConfigError("unknown verdict");
    r.verdict = *v;
    r.reason = j.at("reason").get<std::string>();
    r.evidence = j.at("evidence").get<std::vector<std::string>>();
    r.phase = j.at("phase").get<std::string>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& [k, val] : j.at("config").items()) r.config.emplace_back(k, json_scalar(val));
    const json& p = j.at("payload");
    r.payload_source = p.at("source").get<std::string>();
    r.payload_primary_index = p.at("primary_index").get<std::size_t>();
    r.payload_primary = p.at("primary").get<std::string>();
    for (const auto& c : j.at("candidates")) {
      r.candidates.push_back({c.at("function").get<std::string>(), c.at("path").get<std::string>(), c.at("rank").get<int>()});
    }
    const json& e = j.at("existing_tests");
    r.existing_tests.ran = e.at("ran").get<bool>();
    r.existing_tests.scanned = e.at("scanned").get<std::vector<std::string>>();
    r.existing_tests.statically_filtered = e.at("statically_filtered").get<std::vector<std::string>>();
    r.existing_tests.dynamically_rejected = e.at("dynamically_rejected").get<std::vector<std::string>>();
    r.existing_tests.covering = e.at("covering").get<std::vector<std::string>>();
    const json& g = j.at("generation");
    r.generation.ran = g.at("ran").get<bool>();
    r.generation.failed = g.at("failed").get<bool>();
    r.generation.generations = g.at("generations").get<std::size_t>();
    r.generation.evaluations = g.at("evaluations").get<std::size_t>();
    r.generation.archive_size = g.at("archive_size").get<std::size_t>();
    r.generation.best_fitness = g.at("best_fitness").get<double>();
    r.generation.best_test = opt_string(g.at("best_test"));
    for (const auto& c : g.at("candidates")) {
      Report::GenerationCandidate gc;
      gc.entry = c.at("entry").get<std::string>();
      gc.generations = c.at("generations").get<std::size_t>();
      gc.evaluations = c.at("evaluations").get<std::size_t>();
      if (!c.at("covered_at").is_null()) gc.covered_at = c.at("covered_at").get<std::size_t>();
      gc.stop_reason = c.at("stop_reason").get<std::string>();
      gc.best_trajectory = c.at("best_trajectory").get<std::vector<double>>();
      r.generation.candidates.push_back(std::move(gc));
    }
    const json& m = j.at("migration");
    r.migration.ran = m.at("ran").get<bool>();
    r.migration.original_test = opt_string(m.at("original_test"));
    r.migration.migrated_test = opt_string(m.at("migrated_test"));
    const json& s = m.at("substitution");
    r.migration.substitution_function = opt_string(s.at("function"));
    r.migration.substitution_position = s.at("position").get<std::size_t>();
    r.migration.substitution_value = opt_string(s.at("value"));
    r.migration.rules = m.at("rules").get<std::vector<std::string>>();
    r.migration.executions = m.at("executions").get<std::size_t>();
    r.migration.outcome = m.at("outcome").get<std::string>();
    r.migration.call_path = m.at("call_path").get<std::vector<std::string>>();
    r.migration.received_value = opt_string(m.at("received_value"));
    r.migration.received_similarity = m.at("received_similarity").get<double>();
    r.sandbox = j.at("sandbox").get<std::string>();
    r.rendered_test = j.at("rendered_test").get<std::string>();
    if (j.contains("timings")) {
      const json& t = j.at("timings");
      r.timings = {t.at("analysis").get<double>(),   t.at("extraction").get<double>(),
                   t.at("existing_tests").get<double>(), t.at("generation").get<double>(),
                   t.at("migration").get<double>(),  t.at("total").get<double>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report(const Report& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << report_to_json(report);
}

namespace {

constexpr std::string_view kDirective = "#@ ";

std::string header_lines(const TestHeader& h) {
  std::ostringstream out;
  out << kDirective << "vuln: " << h.vuln << "\n";
  out << kDirective << "project: " << h.project.generic_string() << "\n";
  for (const auto& lib : h.libs) out << kDirective << "lib: " << lib.generic_string() << "\n";
  if (h.vulnerable) out << kDirective << "vulnerable: " << h.vulnerable->str() << "\n";
  if (h.trigger) {
    out << kDirective << "trigger: " << trigger_kind_name(h.trigger->kind) << "\n";
    if (!h.trigger->sql_pattern.empty()) out << kDirective << "sql_pattern: " << h.trigger->sql_pattern << "\n";
    if (h.trigger->oracle) {
      out << kDirective << "oracle: " << oracle_kind_name(h.trigger->oracle->kind) << " "
          << render_literal(h.trigger->oracle->literal) << "\n";
    }
  }
  out << kDirective << "attacker_host: " << h.attacker_host << "\n";
  out << kDirective << "sandbox: " << h.sandbox.generic_string() << "\n";
  out << kDirective << "primary_index: " << h.primary_index << "\n";
  return out.str();
}

}  // namespace

TestHeader parse_test_header(std::string_view source) {
  TestHeader h;
  std::optional<OracleSpec> oracle;
  std::string sql;
  std::istringstream in{std::string(source)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(kDirective, 0) != 0) continue;
    std::string rest = line.substr(kDirective.size());
    auto colon = rest.find(": ");
    if (colon == std::string::npos) throw ConfigError("bad header line: " + line);
    std::string key = rest.substr(0, colon);
    std::string value = rest.substr(colon + 2);
    if (key == "vuln") {
      h.vuln = value;
    } else if (key == "project") {
      h.project = value;
    } else if (key == "lib") {
      h.libs.emplace_back(value);
    } else if (key == "vulnerable") {
      h.vulnerable = QualifiedName::parse(value);
      if (!h.vulnerable) throw ConfigError("bad vulnerable function: " + value);
    } else if (key == "trigger") {
      auto k = trigger_kind_from_name(value);
      if (!k) throw ConfigError("unknown trigger kind: " + value);
      h.trigger.emplace();
      h.trigger->kind = *k;
    } else if (key == "sql_pattern") {
      sql = value;
    } else if (key == "oracle") {
      auto sp = value.find(' ');
      auto k = oracle_kind_from_name(value.substr(0, sp));
      std::optional<Value> lit = sp == std::string::npos ? std::optional<Value>(Value()) : parse_literal(value.substr(sp + 1));
      if (!k || !lit) throw ConfigError("bad oracle: " + value);
      oracle = OracleSpec{*k, *lit};
    } else if (key == "attacker_host") {
      h.attacker_host = value;
    } else if (key == "sandbox") {
      h.sandbox = value;
    } else if (key == "primary_index") {
      h.primary_index = static_cast<std::size_t>(std::stoull(value));
    } else {
      throw ConfigError("unknown header key: " + key);
    }
  }
  if (h.trigger) {
    h.trigger->sql_pattern = sql;
    h.trigger->oracle = oracle;
    if (std::string why = h.trigger->validate(); !why.empty()) throw ConfigError(why);
  }
  return h;
}

std::string render_test(const Report& report, const TestHeader& header, const TestCase* test) {
  std::ostringstream out;
  out << header_lines(header);
  out << "# verdict: " << verdict_name(report.verdict) << " (" << report.reason << ")\n";
  out << "# rng_seed: " << report.rng_seed << "\n";
  if (!report.migration.rules.empty()) {
    std::string rules;
    for (const auto& r : report.migration.rules) rules += (rules.empty() ? "" : " -> ") + r;
    out << "# rules: " << rules << "\n";
  }
  for (const auto& e : report.evidence) out << "# evidence: " << e << "\n";
  out << "\npub fn main() {\n";
  if (test) {
    out << "  return " << test->render_call() << ";\n";
  } else {
    out << "  return null;\n";
  }
  out << "}\n";
  return out.str();
}

ExecResult exec_file(const fs::path& file, const Budgets& budgets) {
  SourceUnit unit = SourceUnit::from_file(file);
  TestHeader h = parse_test_header(unit.text);
  std::vector<std::pair<SourceUnit, ModuleRole>> sources;
  if (!h.project.empty()) {
    fs::path src = fs::is_directory(h.project / "src") ? h.project / "src" : h.project;
    for (auto& u : load_sources(src)) sources.emplace_back(std::move(u), ModuleRole::Project);
  }
  for (const auto& lib : h.libs) {
    for (auto& u : load_sources(lib)) sources.emplace_back(std::move(u), ModuleRole::Library);
  }
  std::string module = unit.module_name;
  sources.emplace_back(std::move(unit), ModuleRole::Script);
  Program program = link_sources(sources);
  QualifiedName main{module, "main"};
  if (!program.find(main)) throw ConfigError(file.string() + ": no function main");
  fs::path sandbox = h.sandbox.empty() ? fs::absolute(file).parent_path() : h.sandbox;

  ExecResult result;
  QualifiedName target = h.vulnerable.value_or(main);
  InstrumentedRun run = run_instrumented(program, TestCase{main, {}}, target, std::nullopt, budgets, sandbox);
  result.outcome = run.outcome;
  result.reached = h.vulnerable && run.dyn_graph.has_value();
  if (h.trigger) {
    result.trigger_kind = std::string(trigger_kind_name(h.trigger->kind));
    TriggerCheck check = detect_trigger(run, *h.trigger, h.attacker_host);
    if (!result.reached) check.triggered = false;
    result.trigger = std::move(check);
  }
  return result;
}

}  // namespace vexploit

#include "vexploit/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <thread>
#include <toml.hpp>

#include "vexploit/static_analysis.hpp"

namespace vexploit {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

enum class KeyType { Int, Real, Bool, Str };

struct KeyDef {
  const char* name;
  KeyType type;
  std::function<ConfigScalar(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const ConfigScalar&)> set;
};

template <typename T>
KeyDef uint_key(const char* name, T PipelineConfig::*outer, std::size_t GaConfig::*field) {
  (void)outer;
  return {name, KeyType::Int,
          [field](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.ga.*field)); },
          [field](PipelineConfig& c, const ConfigScalar& v) {
            c.ga.*field = static_cast<std::size_t>(std::get<std::int64_t>(v));
          }};
}

KeyDef ga_size(const char* name, std::size_t GaConfig::*field) { return uint_key(name, &PipelineConfig::ga, field); }

KeyDef ga_real(const char* name, double GaConfig::*field) {
  return {name, KeyType::Real, [field](const PipelineConfig& c) { return ConfigScalar(c.ga.*field); },
          [field](PipelineConfig& c, const ConfigScalar& v) { c.ga.*field = std::get<double>(v); }};
}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      ga_real("budget_secs", &GaConfig::budget_secs),
      {"rng_seed", KeyType::Int, [](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.ga.rng_seed)); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.ga.rng_seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v)); }},
      ga_size("population", &GaConfig::population),
      ga_size("tournament", &GaConfig::tournament),
      ga_real("crossover_rate", &GaConfig::crossover_rate),
      ga_real("per_arg_mutation_rate", &GaConfig::per_arg_mutation_rate),
      ga_size("elitism", &GaConfig::elitism),
      ga_real("payload_seed_prob", &GaConfig::payload_seed_prob),
      ga_real("entry_redraw_prob", &GaConfig::entry_redraw_prob),
      ga_size("max_seed_len", &GaConfig::max_seed_len),
      ga_size("max_string_len", &GaConfig::max_string_len),
      ga_size("stall_generations", &GaConfig::stall_generations),
      ga_size("max_generations", &GaConfig::max_generations),
      ga_size("top_candidates", &GaConfig::top_candidates),
      {"eval_max_steps", KeyType::Int,
       [](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.ga.eval_max_steps)); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.ga.eval_max_steps = static_cast<std::uint64_t>(std::get<std::int64_t>(v)); }},
      {"random_search", KeyType::Bool, [](const PipelineConfig& c) { return ConfigScalar(c.ga.random_search); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.ga.random_search = std::get<bool>(v); }},
      ga_size("workers", &GaConfig::workers),
      {"max_steps", KeyType::Int,
       [](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.budgets.max_steps)); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.budgets.max_steps = static_cast<std::uint64_t>(std::get<std::int64_t>(v)); }},
      {"max_call_depth", KeyType::Int,
       [](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.budgets.max_call_depth)); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.budgets.max_call_depth = static_cast<int>(std::get<std::int64_t>(v)); }},
      {"attacker_host", KeyType::Str, [](const PipelineConfig& c) { return ConfigScalar(c.attacker_host); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.attacker_host = std::get<std::string>(v); }},
      {"use_existing_tests", KeyType::Str,
       [](const PipelineConfig& c) { return ConfigScalar(std::string(existing_tests_name(c.use_existing_tests))); },
       [](PipelineConfig& c, const ConfigScalar& v) {
         const std::string& s = std::get<std::string>(v);
         if (s == "auto") {
           c.use_existing_tests = ExistingTests::Auto;
         } else if (s == "only") {
           c.use_existing_tests = ExistingTests::Only;
         } else if (s == "never") {
           c.use_existing_tests = ExistingTests::Never;
         } else {
           throw ConfigError("use_existing_tests must be auto, only or never, got '" + s + "'");
         }
       }},
      {"total_budget_secs", KeyType::Real, [](const PipelineConfig& c) { return ConfigScalar(c.total_budget_secs); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.total_budget_secs = std::get<double>(v); }},
      {"max_migration_tests", KeyType::Int,
       [](const PipelineConfig& c) { return ConfigScalar(static_cast<std::int64_t>(c.max_migration_tests)); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.max_migration_tests = static_cast<std::size_t>(std::get<std::int64_t>(v)); }},
      {"migration", KeyType::Bool, [](const PipelineConfig& c) { return ConfigScalar(c.migration); },
       [](PipelineConfig& c, const ConfigScalar& v) { c.migration = std::get<bool>(v); }},
  };
  return defs;
}

ConfigScalar coerce(const KeyDef& def, const ConfigScalar& value) {
  std::string key = def.name;
  auto bad = [&]() { return ConfigError("bad value for " + key); };
  switch (def.type) {
    case KeyType::Int: {
      std::int64_t out = 0;
      if (auto* i = std::get_if<std::int64_t>(&value)) {
        out = *i;
      } else if (auto* d = std::get_if<double>(&value)) {
        if (*d != std::trunc(*d)) throw bad();
        out = static_cast<std::int64_t>(*d);
      } else if (auto* s = std::get_if<std::string>(&value)) {
        auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
        if (s->empty() || ec != std::errc() || p != s->data() + s->size()) throw bad();
      } else {
        throw bad();
      }
      if (out < 0) throw ConfigError(key + " must be non-negative");
      return out;
    }
    case KeyType::Real: {
      if (auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
      if (auto* d = std::get_if<double>(&value)) return *d;
      if (auto* s = std::get_if<std::string>(&value)) {
        double out = 0;
        auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
        if (s->empty() || ec != std::errc() || p != s->data() + s->size()) throw bad();
        return out;
      }
      throw bad();
    }
    case KeyType::Bool:
      if (auto* b = std::get_if<bool>(&value)) return *b;
      if (auto* s = std::get_if<std::string>(&value)) {
        if (*s == "true" || *s == "1") return true;
        if (*s == "false" || *s == "0") return false;
      }
      throw bad();
    case KeyType::Str:
      if (auto* s = std::get_if<std::string>(&value)) return *s;
      throw bad();
  }
  throw bad();
}

std::vector<std::string> qnames(const std::vector<QualifiedName>& v) {
  std::vector<std::string> out;
  for (const auto& q : v) out.push_back(q.str());
  return out;
}

void fill_migration(Report::Migration& m, const TriggerReport& tr) {
  m.ran = true;
  if (tr.original_test) m.original_test = tr.original_test->render_call();
  if (tr.migrated_test) m.migrated_test = tr.migrated_test->render_call();
  if (tr.substitution) {
    m.substitution_function = tr.substitution->function.str();
    m.substitution_position = tr.substitution->position;
    m.substitution_value = render_literal(tr.substitution->value);
  }
  m.rules.clear();
  for (const auto& r : tr.rules) m.rules.push_back(r.str());
  m.executions = tr.executions;
  m.outcome = tr.outcome;
  m.call_path = tr.call_path ? qnames(tr.call_path->path) : std::vector<std::string>{};
  if (tr.received_value) m.received_value = render_literal(*tr.received_value);
  m.received_similarity = tr.received_similarity;
}

// Checks tests as they are, keeping the best near miss.
TriggerReport check_directly(const Program& program, const std::vector<TestCase>& tests, const ExploitPayload& payload,
                             const VulnerabilityRecord& vuln, const MigrationSettings& settings) {
  TriggerReport best;
  best.reason = tests.empty() ? "no_covering_test" : "not_triggered";
  std::size_t executions = 0;
  bool have = false;
  for (std::size_t i = 0; i < tests.size() && i < settings.max_tests; ++i) {
    TriggerReport tr = check_test(program, tests[i], payload, vuln.vulnerable_function, vuln.trigger, settings);
    ++executions;
    if (tr.verdict != Verdict::NotExploitable) {
      tr.executions = executions;
      return tr;
    }
    if (!have || tr.received_similarity > best.received_similarity) {
      best = std::move(tr);
      have = true;
    }
  }
  best.verdict = Verdict::NotExploitable;
  best.reason = tests.empty() ? "no_covering_test" : "not_triggered";
  best.executions = executions;
  return best;
}

}  // namespace

std::string_view existing_tests_name(ExistingTests e) noexcept {
  switch (e) {
    case ExistingTests::Auto: return "auto";
    case ExistingTests::Only: return "only";
    case ExistingTests::Never: return "never";
  }
  return "?";
}

std::string PipelineConfig::validate() const {
  if (std::string ga_error = ga.validate(); !ga_error.empty()) return ga_error;
  if (!(total_budget_secs > 0)) return "total_budget_secs must be positive";
  if (budgets.max_steps == 0 || budgets.max_call_depth <= 0) return "interpreter budgets must be positive";
  if (attacker_host.empty()) return "attacker_host must not be empty";
  if (max_migration_tests == 0) return "max_migration_tests must be positive";
  if (ga.workers == 0) return "workers must be positive";
  return {};
}

std::vector<std::pair<std::string, ConfigScalar>> config_entries(const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, ConfigScalar>> out;
  for (const auto& d : key_defs()) out.emplace_back(d.name, d.get(cfg));
  return out;
}

void set_config_key(PipelineConfig& cfg, std::string_view key, const ConfigScalar& value) {
  for (const auto& d : key_defs()) {
    if (key == d.name) {
      d.set(cfg, coerce(d, value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void load_config_file(PipelineConfig& cfg, const fs::path& path) {
  toml::table t;
  try {
    t = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ConfigError(path.string() + ": " + std::string(e.description()));
  }
  for (const auto& [k, node] : t) {
    ConfigScalar v;
    if (auto i = node.value_exact<std::int64_t>()) {
      v = *i;
    } else if (auto d = node.value_exact<double>()) {
      v = *d;
    } else if (auto b = node.value_exact<bool>()) {
      v = *b;
    } else if (auto s = node.value_exact<std::string>()) {
      v = *s;
    } else {
      throw ConfigError(path.string() + ": '" + std::string(k.str()) + "' must be a scalar");
    }
    try {
      set_config_key(cfg, k.str(), v);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

ExistingScan existing_test_scan(const Program& program, const QualifiedName& vulnerable, const Budgets& budgets,
                                const fs::path& sandbox) {
  ExistingScan scan;
  StaticCallGraph graph = build_call_graph(program);
  std::set<QualifiedName> reach = reaching(graph, vulnerable);
  std::vector<QualifiedName> tests;
  for (const auto& m : program.modules()) {
    if (m.role != ModuleRole::Test) continue;
    for (const auto& fn : m.ast.functions) {
      if (fn->is_public && fn->params.empty()) tests.push_back(fn->qname);
    }
  }
  std::sort(tests.begin(), tests.end());
  InstrumentOptions options;
  options.record_events = true;
  options.max_branch_records = 0;
  for (const auto& t : tests) {
    scan.scanned.push_back(t.str());
    if (!reach.count(t)) {
      scan.statically_filtered.push_back(t.str());
      continue;
    }
    InstrumentedRun run = run_instrumented(program, TestCase{t, {}}, vulnerable, std::nullopt, budgets, sandbox, options);
    if (!run.dyn_graph) {
      scan.dynamically_rejected.push_back(t.str());
      continue;
    }
    // Stack at the first entry into the vulnerable function.
    std::vector<const CallEvent*> stack;
    for (const auto& e : run.events) {
      if (e.kind == CallEvent::Kind::Push) {
        stack.push_back(&e);
        if (e.function == vulnerable) break;
      } else if (!stack.empty()) {
        stack.pop_back();
      }
    }
    const CallEvent* entry = nullptr;
    for (const CallEvent* e : stack) {
      const FunctionDecl* fn = program.find(e->function);
      if (fn && program.role_of(*fn) == ModuleRole::Project) {
        entry = e;
        break;
      }
    }
    if (!entry) {
      scan.dynamically_rejected.push_back(t.str());
      continue;
    }
    TestCase normalized{entry->function, entry->args};
    InstrumentedRun check = run_instrumented(program, normalized, vulnerable, std::nullopt, budgets, sandbox);
    if (!check.dyn_graph) {
      scan.dynamically_rejected.push_back(t.str());
      continue;
    }
    scan.covering.push_back({t, std::move(normalized), *check.dyn_graph});
  }
  return scan;
}

RunOutput run_pipeline(const Corpus& corpus, const ProjectManifest& project, const VulnerabilityRecord& vuln,
                       const PipelineConfig& config) {
  if (std::string why = config.validate(); !why.empty()) throw ConfigError(why);
  auto start = Clock::now();
  RunOutput out;
  Report& r = out.report;
  r.project = project.name;
  r.vuln = vuln.id;
  r.vulnerable_function = vuln.vulnerable_function.str();
  r.trigger = std::string(trigger_kind_name(vuln.trigger.kind));
  r.rng_seed = config.ga.rng_seed;
  r.config = config_entries(config);
  r.phase = "none";

  fs::path work = config.work_root.empty() ? fs::temp_directory_path() / "vexploit-work" : config.work_root;
  fs::path sandbox =
      (fs::absolute(work) / (project.name + "__" + vuln.id + "__seed" + std::to_string(config.ga.rng_seed)))
          .lexically_normal();
  std::error_code ec;
  fs::remove_all(sandbox, ec);
  fs::create_directories(sandbox);
  r.sandbox = sandbox.generic_string();

  auto phase_start = Clock::now();
  Program program = load_project_program(corpus, project);
  StaticCallGraph graph = build_call_graph(program);
  std::vector<EntryCandidate> candidates = discover_entries(program, graph, vuln.vulnerable_function);
  for (const auto& c : candidates) r.candidates.push_back({c.function.str(), c.path.str(), c.rank});
  r.timings.analysis = seconds_since(phase_start);

  TestHeader header;
  header.vuln = vuln.id;
  header.project = project.dir;
  for (const auto& dep : project.dependencies) header.libs.push_back(corpus.library_dir(dep));
  header.vulnerable = vuln.vulnerable_function;
  header.trigger = vuln.trigger;
  header.attacker_host = config.attacker_host;
  header.sandbox = sandbox;
  header.primary_index = vuln.primary_index;

  auto finish = [&](const TestCase* test) {
    out.rendered_source = render_test(r, header, test);
    fs::path file = sandbox / "exploit_test.vex";
    std::ofstream(file, std::ios::binary) << out.rendered_source;
    r.rendered_test = file.generic_string();
    r.timings.total = seconds_since(start);
    return out;
  };

  if (candidates.empty()) {
    r.verdict = Verdict::NotExploitable;
    r.reason = "unreachable";
    return finish(nullptr);
  }

  phase_start = Clock::now();
  ExploitPayload raw = extract_vuln_payload(corpus, vuln, sandbox, config.budgets);
  ExploitPayload live = substitute_markers(raw, config.attacker_host);
  r.payload_source = raw.source;
  r.payload_primary_index = raw.primary_index;
  r.payload_primary = render_literal(raw.primary());
  r.timings.extraction = seconds_since(phase_start);

  MigrationSettings ms;
  ms.budgets = config.budgets;
  ms.sandbox = sandbox;
  ms.attacker_host = config.attacker_host;
  ms.templates = vuln.templates;
  ms.max_tests = config.max_migration_tests;
  ms.manual = vuln.manual;

  std::optional<TriggerReport> decided;
  std::optional<TestCase> fallback_test;
  auto settle = [&](TriggerReport tr, const char* phase) {
    fill_migration(r.migration, tr);
    r.verdict = tr.verdict;
    r.reason = tr.reason;
    r.evidence = tr.evidence;
    r.phase = phase;
    decided = std::move(tr);
  };

  bool has_tests = std::any_of(program.modules().begin(), program.modules().end(),
                               [](const Program::Module& m) { return m.role == ModuleRole::Test; });
  if (config.use_existing_tests != ExistingTests::Never && has_tests) {
    phase_start = Clock::now();
    ExistingScan scan = existing_test_scan(program, vuln.vulnerable_function, config.budgets, sandbox);
    r.existing_tests.ran = true;
    r.existing_tests.scanned = scan.scanned;
    r.existing_tests.statically_filtered = scan.statically_filtered;
    r.existing_tests.dynamically_rejected = scan.dynamically_rejected;
    std::vector<TestCase> archive;
    for (const auto& c : scan.covering) {
      r.existing_tests.covering.push_back(c.test_function.str());
      if (std::find(archive.begin(), archive.end(), c.normalized) == archive.end()) archive.push_back(c.normalized);
    }
    r.timings.existing_tests = seconds_since(phase_start);
    if (!archive.empty()) {
      phase_start = Clock::now();
      TriggerReport tr = config.migration
                             ? migrate(program, archive, raw, vuln.vulnerable_function, vuln.trigger, ms)
                             : check_directly(program, archive, raw, vuln, ms);
      r.timings.migration += seconds_since(phase_start);
      if (tr.verdict != Verdict::NotExploitable || config.use_existing_tests == ExistingTests::Only) {
        settle(std::move(tr), "existing_tests");
      } else {
        fill_migration(r.migration, tr);
        r.reason = tr.reason;
      }
    }
  }
  if (!decided && config.use_existing_tests == ExistingTests::Only) {
    r.verdict = Verdict::NotExploitable;
    r.reason = "no_covering_test";
    return finish(nullptr);
  }

  if (!decided) {
    phase_start = Clock::now();
    GaConfig ga = config.ga;
    double remaining = config.total_budget_secs - seconds_since(start);
    ga.budget_secs = std::max(0.05, std::min(ga.budget_secs, remaining * 0.5));
    GenerationResult gr = generate(program, candidates, vuln.vulnerable_function, live, ga, config.budgets, sandbox);
    r.timings.generation = seconds_since(phase_start);
    auto& g = r.generation;
    g.ran = true;
    g.failed = gr.failed;
    g.generations = gr.generations();
    g.evaluations = gr.evaluations();
    g.archive_size = gr.archive.size();
    if (gr.best) {
      g.best_fitness = gr.best->score.total();
      g.best_test = gr.best->test.render_call();
      fallback_test = gr.best->test;
    }
    for (const auto& c : gr.candidates) {
      g.candidates.push_back({c.entry.str(), c.generations, c.evaluations, c.covered_at, c.stop_reason, c.best_trajectory});
    }
    if (gr.failed) {
      r.verdict = Verdict::NotExploitable;
      r.reason = "generation_failed";
    } else if (gr.archive.empty()) {
      r.verdict = Verdict::NotExploitable;
      r.reason = "not_covered";
    } else {
      std::vector<TestCase> archive;
      for (const auto& s : gr.archive) archive.push_back(s.test);
      phase_start = Clock::now();
      TriggerReport tr = config.migration
                             ? migrate(program, archive, raw, vuln.vulnerable_function, vuln.trigger, ms)
                             : check_directly(program, archive, raw, vuln, ms);
      r.timings.migration += seconds_since(phase_start);
      settle(std::move(tr), "generation");
    }
  }

  const TestCase* test = nullptr;
  if (decided && decided->migrated_test) {
    test = &*decided->migrated_test;
  } else if (fallback_test) {
    test = &*fallback_test;
  }
  return finish(test);
}

std::size_t BenchPair::exploitable_count() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const BenchRun& r) { return r.verdict == Verdict::Exploitable; }));
}

std::vector<BenchPair> run_bench(const Corpus& corpus, const PipelineConfig& config, const BenchOptions& options) {
  std::vector<BenchPair> pairs;
  for (const auto& [name, project] : corpus.projects) {
    if (!options.only_projects.empty() &&
        std::find(options.only_projects.begin(), options.only_projects.end(), name) == options.only_projects.end()) {
      continue;
    }
    for (const auto& e : project.expected) {
      BenchPair p;
      p.project = name;
      p.vuln = e.vuln;
      p.expected_exploitable = e.exploitable;
      p.runs.resize(options.repeats);
      pairs.push_back(std::move(p));
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t k = 0; k < options.repeats; ++k) jobs.emplace_back(i, k);
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      auto [i, k] = jobs[j];
      BenchPair& p = pairs[i];
      BenchRun& run = p.runs[k];
      run.project = p.project;
      run.vuln = p.vuln;
      run.seed = options.first_seed + k;
      try {
        PipelineConfig cfg = config;
        cfg.ga.rng_seed = run.seed;
        RunOutput o = run_pipeline(corpus, corpus.project(p.project), corpus.vuln(p.vuln), cfg);
        run.verdict = o.report.verdict;
        run.reason = o.report.reason;
        run.phase = o.report.phase;
        run.total_secs = o.report.timings.total;
        run.rendered_test = o.report.rendered_test;
        run.trigger = o.report.trigger;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::size_t n = std::max<std::size_t>(1, std::min(options.parallel, jobs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return pairs;
}

}  // namespace vexploit

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "vexploit/pipeline.hpp"
#include "vexploit/static_analysis.hpp"

namespace fs = std::filesystem;
using namespace vexploit;

namespace {

constexpr int kExitConfig = 2;

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

struct ConfigFlags {
  std::string config_file;
  std::string corpus;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "TOML file of config keys")->check(CLI::ExistingFile);
    PipelineConfig defaults;
    for (const auto& [key, value] : config_entries(defaults)) {
      std::string names = flag_name(key);
      if (key == "rng_seed") names = "--seed," + names;
      cmd->add_option(names, values[key], "config key " + key);
    }
    cmd->add_option("--work-root", values["work_root"], "directory for run sandboxes");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_file.empty()) load_config_file(cfg, config_file);
    for (const auto& [key, value] : values) {
      if (value.empty()) continue;
      if (key == "work_root") {
        cfg.work_root = value;
      } else {
        set_config_key(cfg, key, value);
      }
    }
    if (std::string why = cfg.validate(); !why.empty()) throw ConfigError(why);
    return cfg;
  }
};

fs::path resolve_corpus_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  return corpus_root(VEXPLOIT_DEFAULT_CORPUS);
}

Corpus open_corpus(const std::string& flag) {
  std::vector<Diagnostic> diags;
  Corpus c = load_corpus(resolve_corpus_root(flag), &diags);
  if (!diags.empty()) throw DiagnosticError(std::move(diags));
  return c;
}

const ProjectManifest& find_project(const Corpus& corpus, const std::string& name_or_dir,
                                    std::optional<ProjectManifest>& standalone) {
  if (const ProjectManifest* p = corpus.find_project(name_or_dir)) return *p;
  fs::path manifest = fs::path(name_or_dir) / "project.toml";
  if (fs::is_regular_file(manifest)) {
    standalone = load_project(manifest);
    return *standalone;
  }
  throw CorpusError("unknown project '" + name_or_dir + "'");
}

std::string summary_line(const Report& r) {
  std::string s = r.project + " / " + r.vuln + ": " + std::string(verdict_name(r.verdict)) + " (" + r.reason + ")";
  if (!r.migration.rules.empty()) {
    std::string chain;
    for (const auto& rule : r.migration.rules) chain += (chain.empty() ? "" : " -> ") + rule;
    s += " rules: " + chain;
  }
  return s;
}

int cmd_run(const std::string& corpus_flag, const std::string& project_arg, const std::string& vuln_id,
            const ConfigFlags& flags, const std::string& report_path) {
  PipelineConfig cfg = flags.resolve();
  Corpus corpus = open_corpus(corpus_flag);
  std::optional<ProjectManifest> standalone;
  const ProjectManifest& project = find_project(corpus, project_arg, standalone);
  const VulnerabilityRecord& vuln = corpus.vuln(vuln_id);
  RunOutput out = run_pipeline(corpus, project, vuln, cfg);
  if (report_path.empty()) {
    std::cout << report_to_json(out.report);
  } else {
    write_report(out.report, report_path);
    std::cout << summary_line(out.report) << "\n";
    std::cout << "rendered test: " << out.report.rendered_test << "\n";
  }
  return 0;
}

int cmd_corpus_validate(const std::string& corpus_flag, const std::string& scratch) {
  fs::path root = resolve_corpus_root(corpus_flag);
  std::vector<Diagnostic> diags = validate_corpus(root, scratch);
  for (const auto& d : diags) std::cout << d.to_string() << "\n";
  if (!diags.empty()) {
    std::cout << diags.size() << " problem(s)\n";
    return kExitConfig;
  }
  std::cout << "corpus OK: " << root.string() << "\n";
  return 0;
}

int cmd_corpus_list(const std::string& corpus_flag) {
  Corpus corpus = open_corpus(corpus_flag);
  std::cout << "vulnerabilities:\n";
  for (const auto& [id, v] : corpus.vulns) {
    std::cout << "  " << id << "  " << v.vulnerable_function.str() << "  " << trigger_kind_name(v.trigger.kind);
    if (!v.param_type.empty()) std::cout << "  " << v.param_type;
    std::cout << "\n";
  }
  std::cout << "projects:\n";
  for (const auto& [name, p] : corpus.projects) {
    std::cout << "  " << name << (p.has_tests ? "  [tests]" : "");
    for (const auto& e : p.expected) {
      std::cout << "  " << e.vuln << "=" << (e.exploitable ? "exploitable" : "safe");
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_callgraph(const std::string& corpus_flag, const std::string& project_arg, const std::string& to,
                  const std::string& dot_path) {
  auto target = QualifiedName::parse(to);
  if (!target) throw ConfigError("--to must be module::function");
  Corpus corpus = open_corpus(corpus_flag);
  std::optional<ProjectManifest> standalone;
  const ProjectManifest& project = find_project(corpus, project_arg, standalone);
  Program program = load_project_program(corpus, project);
  if (!program.find(*target)) throw ConfigError("unknown function " + to);
  StaticCallGraph graph = build_call_graph(program);
  std::vector<EntryCandidate> entries = discover_entries(program, graph, *target);
  std::set<QualifiedName> reach = reaching(graph, *target);
  std::vector<QualifiedName> highlight(reach.begin(), reach.end());

  std::cout << to_edge_list(graph);
  std::cout << "\nentries reaching " << target->str() << ":\n";
  for (const auto& e : entries) std::cout << "  " << e.rank << "  " << e.path.str() << "\n";
  std::string dot = to_dot(graph, highlight);
  if (dot_path.empty()) {
    std::cout << "\n" << dot;
  } else {
    std::ofstream(dot_path) << dot;
    std::cout << "\nDOT written to " << dot_path << "\n";
  }
  return 0;
}

int cmd_exec(const std::string& file, std::uint64_t max_steps, int max_depth) {
  Budgets b;
  b.max_steps = max_steps;
  b.max_call_depth = max_depth;
  ExecResult r = exec_file(file, b);
  std::cout << "outcome: " << outcome_kind_name(r.outcome.kind);
  if (!r.outcome.message.empty()) std::cout << " (" << r.outcome.message << ")";
  std::cout << "\n";
  if (r.outcome.kind == OutcomeKind::Returned) std::cout << "value: " << render_literal(r.outcome.value) << "\n";
  for (const auto& line : r.outcome.sinks.console) std::cout << "log: " << line << "\n";
  if (r.trigger) {
    std::cout << "reached: " << (r.reached ? "yes" : "no") << "\n";
    std::cout << "trigger " << r.trigger_kind << ": " << (r.trigger->triggered ? "yes" : "no") << "\n";
    for (const auto& e : r.trigger->evidence) std::cout << "evidence: " << e << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& corpus_flag, const ConfigFlags& flags, BenchOptions options,
              const std::string& report_path) {
  PipelineConfig cfg = flags.resolve();
  Corpus corpus = open_corpus(corpus_flag);
  std::vector<BenchPair> pairs = run_bench(corpus, cfg, options);
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  std::size_t failures = 0;
  for (const auto& p : pairs) {
    std::size_t hits = p.exploitable_count();
    bool ok = p.expected_exploitable ? hits * 2 >= p.runs.size() : hits == 0;
    failures += ok ? 0 : 1;
    std::vector<double> times;
    for (const auto& r : p.runs) times.push_back(r.total_secs);
    std::sort(times.begin(), times.end());
    double median = times.empty() ? 0 : times[times.size() / 2];
    std::printf("%-18s %-26s %-11s %2zu/%zu exploitable  median %.3fs  %s\n", p.project.c_str(), p.vuln.c_str(),
                p.expected_exploitable ? "exploitable" : "safe", hits, p.runs.size(), median, ok ? "ok" : "MISMATCH");
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : p.runs) {
      runs.push_back({{"seed", r.seed},
                      {"verdict", verdict_name(r.verdict)},
                      {"reason", r.reason},
                      {"phase", r.phase},
                      {"total_secs", r.total_secs},
                      {"rendered_test", r.rendered_test}});
    }
    out.push_back({{"project", p.project},
                   {"vuln", p.vuln},
                   {"expected_exploitable", p.expected_exploitable},
                   {"exploitable_runs", hits},
                   {"runs", runs}});
  }
  std::printf("%zu pair(s), %zu mismatch(es)\n", pairs.size(), failures);
  if (!report_path.empty()) std::ofstream(report_path) << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vexploit: checks whether library vulnerabilities are exploitable from client projects"};
  app.require_subcommand(1);
  std::string corpus_flag;
  app.add_option("--corpus", corpus_flag, "corpus root (default: $VEXPLOIT_CORPUS or the bundled corpus)");

  auto* run = app.add_subcommand("run", "analyse one (project, vulnerability) pair");
  std::string project_arg, vuln_id, report_path;
  ConfigFlags run_flags;
  run->add_option("--project", project_arg, "project directory or name")->required();
  run->add_option("--vuln", vuln_id, "vulnerability id")->required();
  run->add_option("--report", report_path, "write the JSON report here instead of stdout");
  run_flags.attach(run);

  auto* corpus = app.add_subcommand("corpus", "corpus maintenance");
  corpus->require_subcommand(1);
  auto* validate = corpus->add_subcommand("validate", "re-run every exploit and check every manifest");
  std::string scratch;
  validate->add_option("--scratch", scratch, "scratch directory for extraction sandboxes");
  auto* list = corpus->add_subcommand("list", "list vulnerabilities and projects");

  auto* callgraph = app.add_subcommand("callgraph", "print the static call graph of a project");
  std::string cg_project, cg_to, cg_dot;
  callgraph->add_option("--project", cg_project, "project directory or name")->required();
  callgraph->add_option("--to", cg_to, "target function module::name")->required();
  callgraph->add_option("--dot", cg_dot, "write DOT here instead of stdout");

  auto* exec = app.add_subcommand("exec", "run main() of a .vex file, e.g. a rendered exploit test");
  std::string exec_file_arg;
  std::uint64_t exec_steps = Budgets{}.max_steps;
  int exec_depth = Budgets{}.max_call_depth;
  exec->add_option("file", exec_file_arg, "FILE.vex")->required()->check(CLI::ExistingFile);
  exec->add_option("--max-steps", exec_steps);
  exec->add_option("--max-call-depth", exec_depth);

  auto* bench = app.add_subcommand("bench", "run every corpus pair over several seeds");
  BenchOptions bench_options;
  std::string bench_report;
  ConfigFlags bench_flags;
  bench->add_option("--repeats", bench_options.repeats, "seeds per pair")->check(CLI::PositiveNumber);
  bench->add_option("--first-seed", bench_options.first_seed);
  bench->add_option("--parallel", bench_options.parallel, "concurrent runs")->check(CLI::PositiveNumber);
  bench->add_option("--only", bench_options.only_projects, "restrict to these projects");
  bench->add_option("--report", bench_report, "write per-run results as JSON");
  bench_flags.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(corpus_flag, project_arg, vuln_id, run_flags, report_path);
    if (*validate) return cmd_corpus_validate(corpus_flag, scratch);
    if (*list) return cmd_corpus_list(corpus_flag);
    if (*callgraph) return cmd_callgraph(corpus_flag, cg_project, cg_to, cg_dot);
    if (*exec) return cmd_exec(exec_file_arg, exec_steps, exec_depth);
    if (*bench) return cmd_bench(corpus_flag, bench_flags, bench_options, bench_report);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CorpusError& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DiagnosticError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

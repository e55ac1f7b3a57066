// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "random_values.hpp"
#include "vexploit/corpus.hpp"
#include "vexploit/genetic.hpp"
#include "vexploit/instrument.hpp"
#include "vexploit/pipeline.hpp"
#include "vexploit/similarity.hpp"
#include "vexploit/static_analysis.hpp"

namespace fs = std::filesystem;
using namespace vexploit;

namespace {

constexpr std::size_t kRepeats = 10;
constexpr std::size_t kMinHits = 5;           // out of kRepeats
constexpr double kMaxRunSecs = 60.0;          // wall clock per run
constexpr std::size_t kSimilaritySamples = 10000;
constexpr std::size_t kMinExecutions = 1000;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void fail(std::string note) {
    pass = false;
    notes.push_back(std::move(note));
  }
};

int g_failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  std::printf("[%s] %d %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str());
  for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

fs::path work_dir(const std::string& phase) {
  fs::path p = fs::temp_directory_path() / "vexploit-acceptance" / phase;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineConfig base_config(const std::string& phase) {
  PipelineConfig cfg;
  cfg.work_root = work_dir(phase);
  return cfg;
}

std::string pair_name(const BenchPair& p) { return p.project + "/" + p.vuln; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::size_t reference_levenshtein(const std::string& a, const std::string& b) {
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> memo((a.size() + 1) * (b.size() + 1), kUnset);
  auto d = [&](auto& self, std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    std::size_t& slot = memo[i * (b.size() + 1) + j];
    if (slot != kUnset) return slot;
    std::size_t subst = self(self, i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    return slot = std::min({self(self, i - 1, j) + 1, self(self, i, j - 1) + 1, subst});
  };
  return d(d, a.size(), b.size());
}

std::vector<std::string> all_strings(std::size_t max_len) {
  std::vector<std::string> out{""};
  std::vector<std::string> frontier{""};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const auto& s : frontier)
      for (char c : {'a', 'b', 'c'}) next.push_back(s + c);
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

}  // namespace

int main() {
  Corpus corpus = load_corpus(corpus_root(VEXPLOIT_CORPUS_DIR));
  std::printf("corpus: %zu vulnerabilities, %zu projects\n", corpus.vulns.size(), corpus.projects.size());

  // Criteria 1, 2 and 5 share one default-config bench.
  BenchOptions opts;
  opts.repeats = kRepeats;
  std::vector<BenchPair> bench = run_bench(corpus, base_config("default"), opts);

  std::size_t exploitable_pairs = 0;
  std::size_t default_hits = 0;
  {
    Outcome o;
    for (const auto& p : bench) {
      if (!p.expected_exploitable) continue;
      ++exploitable_pairs;
      std::size_t hits = p.exploitable_count();
      default_hits += hits;
      if (hits < kMinHits) o.fail(pair_name(p) + ": " + std::to_string(hits) + "/" + std::to_string(kRepeats));
      for (const auto& r : p.runs)
        if (r.total_secs > kMaxRunSecs)
          o.fail(pair_name(p) + " seed " + std::to_string(r.seed) + " took " + std::to_string(r.total_secs) + "s");
    }
    report(1, "exploitable pairs: >= 5/10 seeds exploitable, each run <= 60s (" + std::to_string(default_hits) + "/" +
                  std::to_string(exploitable_pairs * kRepeats) + " runs)",
           o);
  }
  {
    Outcome o;
    std::size_t safe = 0;
    for (const auto& p : bench) {
      if (p.expected_exploitable) continue;
      ++safe;
      std::size_t hits = p.exploitable_count();
      if (hits != 0) o.fail(pair_name(p) + ": " + std::to_string(hits) + " false positives");
    }
    report(2, "safe pairs: 0/10 exploitable (" + std::to_string(safe) + " pairs)", o);
  }

  // 3: ablation without migration.
  {
    PipelineConfig cfg = base_config("no-migration");
    cfg.migration = false;
    BenchOptions ab = opts;
    for (const auto& p : bench)
      if (p.expected_exploitable) ab.only_projects.push_back(p.project);
    std::vector<BenchPair> off = run_bench(corpus, cfg, ab);
    Outcome o;
    std::size_t off_hits = 0;
    std::size_t below = 0;
    std::size_t pairs = 0;
    for (const auto& p : off) {
      if (!p.expected_exploitable) continue;
      ++pairs;
      off_hits += p.exploitable_count();
      if (p.exploitable_count() < kMinHits) ++below;
    }
    if (off_hits >= default_hits)
      o.fail("without migration " + std::to_string(off_hits) + " >= with migration " + std::to_string(default_hits));
    if (below * 2 < pairs) o.fail(std::to_string(below) + "/" + std::to_string(pairs) + " pairs fall below 5/10");
    report(3, "without migration: fewer successes (" + std::to_string(off_hits) + " vs " + std::to_string(default_hits) +
                  "), " + std::to_string(below) + "/" + std::to_string(pairs) + " pairs below 5/10",
           o);
  }

  // 4: existing tests shorten the run where they cover the target.
  {
    BenchOptions tb = opts;
    for (const auto& [name, p] : corpus.projects)
      if (p.has_tests) tb.only_projects.push_back(name);
    PipelineConfig with = base_config("tests-auto");
    PipelineConfig without = base_config("tests-never");
    without.use_existing_tests = ExistingTests::Never;
    std::vector<BenchPair> a = run_bench(corpus, with, tb);
    std::vector<BenchPair> n = run_bench(corpus, without, tb);
    Outcome o;
    for (std::size_t i = 0; i < a.size() && i < n.size(); ++i) {
      if (!a[i].expected_exploitable) continue;
      std::vector<double> ta, tn;
      for (const auto& r : a[i].runs) ta.push_back(r.total_secs);
      for (const auto& r : n[i].runs) tn.push_back(r.total_secs);
      double ma = median(ta), mn = median(tn);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s auto %.3fs never %.3fs", pair_name(a[i]).c_str(), ma, mn);
      o.notes.push_back(buf);
      if (!(ma < mn)) o.fail(pair_name(a[i]) + ": existing tests did not help");
    }
    if (a.empty()) o.fail("no project with tests");
    report(4, "existing covering tests: median run time below generation-only", o);
  }

  // 5: rendered tests replay to the same trigger.
  {
    Outcome o;
    std::size_t replayed = 0;
    for (const auto& p : bench) {
      if (!p.expected_exploitable) continue;
      for (const auto& r : p.runs) {
        if (r.verdict != Verdict::Exploitable) continue;
        if (r.rendered_test.empty()) {
          o.fail(pair_name(p) + " seed " + std::to_string(r.seed) + ": no rendered test");
          continue;
        }
        ++replayed;
        try {
          ExecResult e = exec_file(r.rendered_test);
          if (!e.trigger || !e.trigger->triggered || e.trigger_kind != r.trigger)
            o.fail(pair_name(p) + " seed " + std::to_string(r.seed) + ": replay did not trigger " + r.trigger);
        } catch (const std::exception& ex) {
          o.fail(pair_name(p) + " seed " + std::to_string(r.seed) + ": " + ex.what());
        }
      }
    }
    if (replayed == 0) o.fail("nothing to replay");
    report(5, "rendered tests re-trigger the same kind (" + std::to_string(replayed) + " replays)", o);
  }

  // 6: distance and similarity properties.
  {
    Outcome o;
    std::vector<std::string> words = all_strings(6);
    std::size_t checked = 0;
    for (const auto& a : words) {
      for (const auto& b : words) {
        ++checked;
        std::size_t want = reference_levenshtein(a, b);
        if (levenshtein(a, b) != want) {
          o.fail("levenshtein(" + a + ", " + b + ") != " + std::to_string(want));
          break;
        }
      }
      if (!o.pass) break;
    }
    testing::RandomValues gen(66);
    for (std::size_t i = 0; i < kSimilaritySamples && o.pass; ++i) {
      Value x = gen.value();
      Value y = gen.value();
      double sxx = similarity(x, x);
      double sxy = similarity(x, y);
      if (std::abs(sxx - 1.0) > 1e-12) o.fail("similarity(x, x) = " + std::to_string(sxx) + " for " + display(x));
      if (sxy < 0.0 || sxy > 1.0) o.fail("similarity out of [0, 1]: " + std::to_string(sxy));
      // Records are scored over the expected side's fields, so only strings are symmetric.
      std::string a = gen.str(12), b = gen.str(12);
      if (std::abs(string_similarity(a, b) - string_similarity(b, a)) > 1e-12)
        o.fail("string similarity asymmetric: " + a + " vs " + b);
    }
    if (branch_distance(BinaryOp::Eq, Value::integer(7), Value::integer(10)) != 3.0) o.fail("d(7 == 10) != 3");
    if (branch_distance(BinaryOp::Lt, Value::integer(5), Value::integer(5)) != 1.0) o.fail("d(5 < 5) != 1");
    report(6, "edit distance matches reference (" + std::to_string(checked) +
                  " pairs), similarity identity/bounds and string symmetry (" + std::to_string(kSimilaritySamples) +
                  " samples), branch distances",
           o);
  }

  // 7: dynamic call stacks are balanced and follow static edges.
  {
    Outcome o;
    std::size_t executions = 0;
    fs::path sandbox = work_dir("random-exec");
    GaConfig ga;
    Budgets budgets{100000, 512};
    std::mt19937_64 rng(7);
    std::vector<std::pair<const ProjectManifest*, const VulnerabilityRecord*>> subjects;
    for (const auto& [name, p] : corpus.projects)
      if (!p.expected.empty()) subjects.emplace_back(&p, &corpus.vuln(p.expected.front().vuln));
    std::size_t per_subject = (kMinExecutions + subjects.size() - 1) / subjects.size();
    for (const auto& [project, vuln] : subjects) {
      Program program = load_project_program(corpus, *project);
      StaticCallGraph graph = build_call_graph(program);
      ConstantPool pool = harvest_constants(program);
      ExploitPayload payload = extract_vuln_payload(corpus, *vuln, sandbox);
      std::vector<QualifiedName> entries;
      for (const auto& m : program.modules()) {
        if (m.role != ModuleRole::Project) continue;
        for (const auto& fn : m.ast.functions)
          if (fn->is_public) entries.push_back(fn->qname);
      }
      if (entries.empty()) {
        o.fail(project->name + ": no public functions");
        continue;
      }
      MutationContext ctx = MutationContext::build(program, ga, pool, payload, entries, sandbox);
      InstrumentOptions io;
      io.record_events = true;
      for (std::size_t k = 0; k < per_subject; ++k) {
        TestCase t = random_test(entries[k % entries.size()], ctx, rng);
        InstrumentedRun run = run_instrumented(program, t, vuln->vulnerable_function, std::nullopt, budgets, sandbox, io);
        ++executions;
        std::vector<QualifiedName> stack;
        bool ok = true;
        for (const auto& e : run.events) {
          if (e.kind == CallEvent::Kind::Push) {
            if (!stack.empty() && !graph.has_edge(stack.back(), e.function)) {
              o.fail(t.render_call() + ": edge " + stack.back().str() + " -> " + e.function.str() + " not static");
              ok = false;
              break;
            }
            stack.push_back(e.function);
          } else {
            if (stack.empty() || !(stack.back() == e.function)) {
              o.fail(t.render_call() + ": unbalanced pop of " + e.function.str());
              ok = false;
              break;
            }
            stack.pop_back();
          }
        }
        if (ok && !stack.empty()) o.fail(t.render_call() + ": " + std::to_string(stack.size()) + " frames left open");
        if (o.notes.size() > 5) break;
      }
    }
    if (executions < kMinExecutions) o.fail("only " + std::to_string(executions) + " executions");
    report(7, "random executions: balanced stacks, every dynamic edge static (" + std::to_string(executions) + " runs)",
           o);
  }

  // 8: determinism and worker independence.
  {
    Outcome o;
    const ProjectManifest& project = corpus.project("report-builder");
    const VulnerabilityRecord& vuln = corpus.vuln("query-filter-injection");
    PipelineConfig cfg = base_config("determinism");
    cfg.ga.rng_seed = 5;
    cfg.ga.workers = 1;
    RunOutput first = run_pipeline(corpus, project, vuln, cfg);
    RunOutput second = run_pipeline(corpus, project, vuln, cfg);
    if (report_to_json(first.report, false) != report_to_json(second.report, false))
      o.fail("two single-worker runs differ");
    PipelineConfig par = cfg;
    par.ga.workers = 3;
    RunOutput third = run_pipeline(corpus, project, vuln, par);
    if (third.report.verdict != first.report.verdict) o.fail("verdict differs with 3 workers");
    if (third.report.migration.migrated_test != first.report.migration.migrated_test)
      o.fail("migrated test differs with 3 workers");
    if (third.report.migration.rules != first.report.migration.rules) o.fail("rules differ with 3 workers");
    o.notes.push_back("verdict " + std::string(verdict_name(first.report.verdict)));
    report(8, "same seed gives identical reports; 3 workers agree on verdict, test and rules", o);
  }

  std::printf("%s: %d criteria failed\n", g_failures ? "FAILED" : "PASSED", g_failures);
  return g_failures ? 1 : 0;
}

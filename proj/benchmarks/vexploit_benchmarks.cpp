#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>

#include "vexploit/corpus.hpp"
#include "vexploit/genetic.hpp"
#include "vexploit/instrument.hpp"
#include "vexploit/similarity.hpp"
#include "vexploit/static_analysis.hpp"
#include "vexploit/vex/program.hpp"

namespace {

using namespace vexploit;

std::string pattern(std::size_t n, std::size_t shift) {
  std::string s(n, 'a');
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<char>('a' + (i * 7 + shift) % 5);
  return s;
}

void BM_Levenshtein(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  std::string a = pattern(n, 0), b = pattern(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Levenshtein)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_StringSimilarityUtf8(benchmark::State& state) {
  std::string a, b;
  for (int i = 0; i < 64; ++i) {
    a += "\xc3\xa9x";
    b += i % 3 ? "\xc3\xa9x" : "yy";
  }
  for (auto _ : state) benchmark::DoNotOptimize(string_similarity(a, b));
}
BENCHMARK(BM_StringSimilarityUtf8);

constexpr const char* kLoop = R"(
pub fn fib(n) {
  if n < 2 { return n; }
  return fib(n - 1) + fib(n - 2);
}
pub fn sum(n) {
  let i = 0;
  let acc = "";
  while i < n {
    acc = acc + @to_str(i % 10);
    i = i + 1;
  }
  return @len(acc);
}
)";

void BM_InterpreterRecursion(benchmark::State& state) {
  Program p = link_sources({{SourceUnit{"m", kLoop, "m.vex"}, ModuleRole::Project}});
  QualifiedName fib{"m", "fib"};
  for (auto _ : state) benchmark::DoNotOptimize(execute(p, fib, {Value::integer(state.range(0))}));
}
BENCHMARK(BM_InterpreterRecursion)->Arg(10)->Arg(15);

void BM_InterpreterLoop(benchmark::State& state) {
  Program p = link_sources({{SourceUnit{"m", kLoop, "m.vex"}, ModuleRole::Project}});
  QualifiedName sum{"m", "sum"};
  for (auto _ : state) benchmark::DoNotOptimize(execute(p, sum, {Value::integer(state.range(0))}));
}
BENCHMARK(BM_InterpreterLoop)->Arg(100)->Arg(1000);

/// One GA fitness evaluation: an instrumented run of a random test plus scoring.
void BM_Fitness(benchmark::State& state) {
  Corpus corpus = load_corpus(VEXPLOIT_CORPUS_DIR);
  const ProjectManifest& project = corpus.project("report-builder");
  const VulnerabilityRecord& vuln = corpus.vuln("query-filter-injection");
  std::filesystem::path sandbox = std::filesystem::temp_directory_path() / "vexploit-bench-fitness";
  std::filesystem::create_directories(sandbox);
  Program program = load_project_program(corpus, project);
  auto candidates = discover_entries(program, build_call_graph(program), vuln.vulnerable_function);
  ExploitPayload payload = extract_vuln_payload(corpus, vuln, sandbox);
  GaConfig config;
  ConstantPool pool = harvest_constants(program);
  MutationContext ctx = MutationContext::build(program, config, pool, payload, {candidates.front().function}, sandbox);
  Goals goals{candidates.front().function, vuln.vulnerable_function, candidates.front().path};
  Budgets budgets{config.eval_max_steps, 512};
  Rng rng(1);
  std::vector<TestCase> tests;
  for (int i = 0; i < 64; ++i) tests.push_back(random_test(goals.entry, ctx, rng));
  std::size_t k = 0;
  for (auto _ : state) {
    const TestCase& t = tests[k++ % tests.size()];
    InstrumentedRun run = run_instrumented(program, t, goals.vulnerable, std::nullopt, budgets, sandbox);
    benchmark::DoNotOptimize(fitness(run, goals, payload).total());
  }
}
BENCHMARK(BM_Fitness);

}  // namespace
BENCHMARK_MAIN();

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <optional>
#include <random>
#include <vector>

#include "vexploit/exploit.hpp"
#include "vexploit/static_analysis.hpp"

namespace vexploit {

struct GaConfig {
  std::size_t population = 50;
  std::size_t tournament = 4;
  double crossover_rate = 0.75;
  double per_arg_mutation_rate = 0.3;
  std::size_t elitism = 2;
  double payload_seed_prob = 0.2;
  double budget_secs = 10.0;
  std::uint64_t rng_seed = 0;
  double entry_redraw_prob = 0.05;
  /// Longest payload substring spliced into a string by one mutation.
  std::size_t max_seed_len = 16;
  std::size_t max_string_len = 256;
  /// Deterministic stopping: generations without improvement once the
  /// vulnerable function is covered, and a hard generation cap.
  std::size_t stall_generations = 15;
  std::size_t max_generations = 200;
  /// Entry candidates searched, in rank order, sharing the time budget.
  std::size_t top_candidates = 3;
  /// Step budget for fitness evaluations; reaching needs far fewer steps than triggering.
  std::uint64_t eval_max_steps = 100'000;
  std::size_t workers = 1;
  /// Replace selection and variation by fresh random individuals (baseline).
  bool random_search = false;

  /// Empty when valid, else a description of the first violated constraint.
  std::string validate() const;
};

struct FitnessScore {
  double entry_module_hit = 0;
  double entry_function_hit = 0;
  double reach = 0;
  double sim = 0;

  double total() const { return entry_module_hit + entry_function_hit + reach + sim; }
};

struct Goals {
  QualifiedName entry;
  QualifiedName vulnerable;
  CallPath path;
};

/// Normalizes a branch distance into [0, 1).
inline double normalize_distance(double d) { return d / (d + 1.0); }

/// Distance of `lhs op rhs` from being true. Unsupported operands give 1.
double branch_distance(BinaryOp op, const Value& lhs, const Value& rhs);

/// Distance from the predicate evaluating to `required`.
double branch_distance_towards(BinaryOp op, const Value& lhs, const Value& rhs, bool required);

FitnessScore fitness(const InstrumentedRun& run, const Goals& goals, const ExploitPayload& payload);

/// Literal values found in project modules, in order of first appearance.
struct ConstantPool {
  std::vector<std::string> strings;
  std::vector<Value> numbers;
};

ConstantPool harvest_constants(const Program& program);

/// Everything mutation draws from.
struct MutationContext {
  const Program* program = nullptr;
  const GaConfig* config = nullptr;
  const ConstantPool* pool = nullptr;
  std::vector<std::string> payload_strings;
  std::vector<Value> payload_numbers;
  std::vector<std::string> payload_keys;
  std::vector<QualifiedName> entries;  // candidates for entry re-draw
  std::filesystem::path sandbox;       // where File arguments are materialized

  static MutationContext build(const Program& program, const GaConfig& config, const ConstantPool& pool,
                               const ExploitPayload& payload, std::vector<QualifiedName> entries,
                               std::filesystem::path sandbox = {});
};

using Rng = std::mt19937_64;

TestCase random_test(const QualifiedName& entry, const MutationContext& ctx, Rng& rng);
TestCase mutate(const TestCase& test, const MutationContext& ctx, Rng& rng);
/// Single point crossover at `point` (1 <= point < arity) when entries match.
std::pair<TestCase, TestCase> crossover_at(const TestCase& a, const TestCase& b, std::size_t point);
std::pair<TestCase, TestCase> crossover(const TestCase& a, const TestCase& b, Rng& rng);

struct ScoredTest {
  TestCase test;
  FitnessScore score;
  bool hit = false;
};

struct CandidateStats {
  QualifiedName entry;
  std::size_t generations = 0;
  std::size_t evaluations = 0;
  /// Generation index at which the vulnerable function was first reached.
  std::optional<std::size_t> covered_at;
  std::vector<double> best_trajectory;
  std::string stop_reason;
};

struct GenerationResult {
  std::optional<ScoredTest> best;
  /// Distinct tests that reached the vulnerable function, best first.
  std::vector<ScoredTest> archive;
  std::vector<CandidateStats> candidates;
  bool failed = true;  // no individual executed any entry function

  std::size_t generations() const;
  std::size_t evaluations() const;
};

GenerationResult generate(const Program& program, const std::vector<EntryCandidate>& candidates,
                          const QualifiedName& vulnerable, const ExploitPayload& payload, const GaConfig& config,
                          const Budgets& budgets, const std::filesystem::path& sandbox_root);

}  // namespace vexploit

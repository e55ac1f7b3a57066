#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vexploit/corpus.hpp"
#include "vexploit/genetic.hpp"
#include "vexploit/migration.hpp"

namespace vexploit {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExistingTests { Auto, Only, Never };
std::string_view existing_tests_name(ExistingTests e) noexcept;

struct PipelineConfig {
  GaConfig ga;
  Budgets budgets;
  std::string attacker_host = "attacker.local";
  ExistingTests use_existing_tests = ExistingTests::Auto;
  /// Wall-clock ceiling for one run; the generation phase gets budget_secs of it.
  double total_budget_secs = 60.0;
  std::size_t max_migration_tests = 8;
  /// Off: the generated tests are checked as they are (ablation).
  bool migration = true;
  std::filesystem::path work_root;  // default: <temp>/vexploit-work

  std::string validate() const;
};

using ConfigScalar = std::variant<std::int64_t, double, bool, std::string>;

/// Every tunable key with its current value, in canonical order. The same
/// names are used by config files, CLI flags (with '-' for '_') and reports.
std::vector<std::pair<std::string, ConfigScalar>> config_entries(const PipelineConfig& cfg);
/// Throws ConfigError for unknown keys or ill-typed values.
void set_config_key(PipelineConfig& cfg, std::string_view key, const ConfigScalar& value);
/// Applies a TOML file of config keys.
void load_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

struct ExistingCoverage {
  QualifiedName test_function;
  TestCase normalized;  // direct call of the outermost project function on the path
  DynamicCallGraph graph;
};

struct ExistingScan {
  std::vector<std::string> scanned;
  std::vector<std::string> statically_filtered;
  std::vector<std::string> dynamically_rejected;
  std::vector<ExistingCoverage> covering;
};

/// Zero-argument public functions of test modules are the project's tests.
ExistingScan existing_test_scan(const Program& program, const QualifiedName& vulnerable, const Budgets& budgets,
                                const std::filesystem::path& sandbox);

struct Report {
  struct Candidate {
    std::string function;
    std::string path;
    int rank = 0;
    bool operator==(const Candidate&) const = default;
  };
  struct GenerationCandidate {
    std::string entry;
    std::size_t generations = 0;
    std::size_t evaluations = 0;
    std::optional<std::size_t> covered_at;
    std::string stop_reason;
    std::vector<double> best_trajectory;
    bool operator==(const GenerationCandidate&) const = default;
  };
  struct Generation {
    bool ran = false;
    bool failed = false;
    std::size_t generations = 0;
    std::size_t evaluations = 0;
    std::size_t archive_size = 0;
    double best_fitness = 0;
    std::optional<std::string> best_test;
    std::vector<GenerationCandidate> candidates;
    bool operator==(const Generation&) const = default;
  };
  struct Existing {
    bool ran = false;
    std::vector<std::string> scanned;
    std::vector<std::string> statically_filtered;
    std::vector<std::string> dynamically_rejected;
    std::vector<std::string> covering;
    bool operator==(const Existing&) const = default;
  };
  struct Migration {
    bool ran = false;
    std::optional<std::string> original_test;
    std::optional<std::string> migrated_test;
    std::optional<std::string> substitution_function;
    std::size_t substitution_position = 0;
    std::optional<std::string> substitution_value;
    std::vector<std::string> rules;
    std::size_t executions = 0;
    std::string outcome;
    std::vector<std::string> call_path;
    std::optional<std::string> received_value;
    double received_similarity = 0;
    bool operator==(const Migration&) const = default;
  };
  struct Timings {
    double analysis = 0;
    double extraction = 0;
    double existing_tests = 0;
    double generation = 0;
    double migration = 0;
    double total = 0;
    bool operator==(const Timings&) const = default;
  };

  int schema = 1;
  std::string project;
  std::string vuln;
  std::string vulnerable_function;
  std::string trigger;
  Verdict verdict = Verdict::NotExploitable;
  std::string reason;
  std::vector<std::string> evidence;
  std::string phase;  // existing_tests | generation | none
  std::uint64_t rng_seed = 0;
  std::vector<std::pair<std::string, ConfigScalar>> config;
  std::string payload_source;
  std::size_t payload_primary_index = 0;
  std::string payload_primary;
  std::vector<Candidate> candidates;
  Existing existing_tests;
  Generation generation;
  Migration migration;
  std::string sandbox;
  std::string rendered_test;
  Timings timings;

  bool operator==(const Report&) const = default;
};

/// Canonical JSON with keys in declaration order.
std::string report_to_json(const Report& report, bool include_timings = true);
/// Throws ConfigError on malformed input.
Report report_from_json(std::string_view text);
void write_report(const Report& report, const std::filesystem::path& path);

struct RunOutput {
  Report report;
  std::string rendered_source;
};

/// Full run for one (project, vulnerability) pair. Corpus problems throw
/// CorpusError or DiagnosticError; the verdict itself never throws.
RunOutput run_pipeline(const Corpus& corpus, const ProjectManifest& project, const VulnerabilityRecord& vuln,
                       const PipelineConfig& config);

/// Header directives written into rendered tests so `exec` can rebuild the context.
struct TestHeader {
  std::string vuln;
  std::filesystem::path project;
  std::vector<std::filesystem::path> libs;
  std::optional<QualifiedName> vulnerable;
  std::optional<TriggerCondition> trigger;
  std::string attacker_host = "attacker.local";
  std::filesystem::path sandbox;
  std::size_t primary_index = 0;
};

TestHeader parse_test_header(std::string_view source);

std::string render_test(const Report& report, const TestHeader& header, const TestCase* test);

struct ExecResult {
  ExecutionOutcome outcome;
  std::optional<TriggerCheck> trigger;  // when the file names a vulnerability context
  bool reached = false;
  std::string trigger_kind;
};

/// Runs `main` of a standalone .vex file, linked with the header's project and libraries.
ExecResult exec_file(const std::filesystem::path& file, const Budgets& budgets = {});

struct BenchRun {
  std::string project;
  std::string vuln;
  std::uint64_t seed = 0;
  Verdict verdict = Verdict::NotExploitable;
  std::string reason;
  std::string phase;
  double total_secs = 0;
  std::string rendered_test;
  std::string trigger;
};

struct BenchPair {
  std::string project;
  std::string vuln;
  bool expected_exploitable = false;
  std::vector<BenchRun> runs;

  std::size_t exploitable_count() const;
};

struct BenchOptions {
  std::size_t repeats = 10;
  std::uint64_t first_seed = 0;
  std::size_t parallel = 1;
  std::vector<std::string> only_projects;  // empty: all
};

std::vector<BenchPair> run_bench(const Corpus& corpus, const PipelineConfig& config, const BenchOptions& options);

}  // namespace vexploit

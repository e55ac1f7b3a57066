#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vexploit/exploit.hpp"

namespace vexploit {

enum class TriggerKind {
  DosUncaughtException,
  DosInfiniteLoop,
  DosStackOverflow,
  Rce,
  Xxe,
  Sqli,
  WrongBehavior,
  PathTraversal,
};

std::string_view trigger_kind_name(TriggerKind k) noexcept;
std::optional<TriggerKind> trigger_kind_from_name(std::string_view name) noexcept;

struct OracleSpec {
  enum class Kind { NoException, ReturnEquals, ReturnDiffers };
  Kind kind = Kind::NoException;
  Value literal;  // compared against the vulnerable function's first return

  bool operator==(const OracleSpec&) const = default;
};

std::string_view oracle_kind_name(OracleSpec::Kind k) noexcept;
std::optional<OracleSpec::Kind> oracle_kind_from_name(std::string_view name) noexcept;

struct TriggerCondition {
  TriggerKind kind = TriggerKind::DosUncaughtException;
  std::optional<OracleSpec> oracle;  // wrong_behavior only
  std::string sql_pattern;           // sqli only; ECMAScript regex searched in each statement

  /// Empty when consistent.
  std::string validate() const;
};

struct TriggerCheck {
  bool triggered = false;
  std::vector<std::string> evidence;
};

/// Host part of `scheme://host[:port]/...`, or of `host/...` without a scheme.
std::string url_host(std::string_view url);

TriggerCheck detect_trigger(const InstrumentedRun& run, const TriggerCondition& condition,
                            std::string_view attacker_host);

struct MigrationRule {
  enum class Kind { MarkerSubstitute, TypeConvert, AffixString, Template, FileMaterialize };
  static constexpr std::string_view kHole = "{{PAYLOAD}}";

  Kind kind = Kind::MarkerSubstitute;
  ParamType target = ParamType::Str;  // TypeConvert
  std::string prefix, suffix;         // AffixString
  std::string pattern;                // Template

  static MigrationRule marker_substitute();
  static MigrationRule type_convert(ParamType target);
  static MigrationRule affix(std::string prefix, std::string suffix);
  /// Throws std::invalid_argument unless the hole occurs exactly once.
  static MigrationRule make_template(std::string pattern);
  static MigrationRule file_materialize();

  /// Stable text form, e.g. `type_convert(int)` or `template("[{{PAYLOAD}}]")`.
  std::string str() const;
  bool operator==(const MigrationRule&) const = default;
};

using RuleChain = std::vector<MigrationRule>;

std::string chain_str(const RuleChain& chain);

struct RuleContext {
  std::optional<ParamType> annotation;
  /// The covering test's argument at the substituted position.
  std::optional<Value> original;
  /// What the vulnerable function received when the covering test ran.
  std::optional<Value> received;
  std::filesystem::path sandbox;
  std::string attacker_host = "attacker.local";
};

/// Applies one rule. std::nullopt means the rule does not apply to this value.
std::optional<Value> apply_rule(const MigrationRule& rule, const Value& value, const RuleContext& ctx);
std::optional<Value> apply_chain(const RuleChain& chain, const Value& value, const RuleContext& ctx);

enum class Verdict { Exploitable, NotExploitable, Inconclusive };
std::string_view verdict_name(Verdict v) noexcept;
std::optional<Verdict> verdict_from_name(std::string_view name) noexcept;

struct TriggerReport {
  Verdict verdict = Verdict::NotExploitable;
  std::string reason;
  std::vector<std::string> evidence;
  std::optional<TestCase> original_test;
  std::optional<TestCase> migrated_test;
  std::optional<ParamSubstitution> substitution;
  RuleChain rules;
  std::string outcome;  // outcome kind of the deciding execution
  std::optional<DynamicCallGraph> call_path;
  std::optional<Value> received_value;
  double received_similarity = 0;
  std::size_t executions = 0;
};

struct MigrationSettings {
  Budgets budgets;
  std::filesystem::path sandbox;
  std::string attacker_host = "attacker.local";
  std::vector<std::string> templates;  // corpus-supplied, in declaration order
  std::size_t max_tests = 8;
  std::size_t max_executions_per_test = 64;
  bool manual = false;  // downgrade exploitable to inconclusive
};

/// Single-rule chains in trial order, followed by ordered pairs of them.
std::vector<RuleChain> candidate_chains(const std::vector<std::string>& templates, const RuleContext& ctx,
                                        const Value& payload);

/// Substitutes the payload's primary value into each archive test position by
/// position, repairing it with rule chains until the trigger is observed.
/// `payload` still carries attacker markers.
TriggerReport migrate(const Program& program, const std::vector<TestCase>& archive, const ExploitPayload& payload,
                      const QualifiedName& vulnerable, const TriggerCondition& condition,
                      const MigrationSettings& settings);

/// Runs a test unchanged and checks the trigger (used for replay and for
/// directly generated tests).
TriggerReport check_test(const Program& program, const TestCase& test, const ExploitPayload& payload,
                         const QualifiedName& vulnerable, const TriggerCondition& condition,
                         const MigrationSettings& settings);

}  // namespace vexploit

#include <gtest/gtest.h>

#include <filesystem>

#include "vexploit/migration.hpp"
#include "vexploit/similarity.hpp"

namespace vexploit {
namespace {

using Sources = std::vector<std::pair<SourceUnit, ModuleRole>>;

SourceUnit unit(std::string name, std::string text) { return {name, std::move(text), name + ".vex"}; }
QualifiedName q(const char* text) { return *QualifiedName::parse(text); }

Program with_lib(std::string app, std::string lib) {
  return link_sources(Sources{{unit("app", std::move(app)), ModuleRole::Project},
                              {unit("lib", std::move(lib)), ModuleRole::Library}});
}

ExploitPayload payload_of(Value v) {
  ExploitPayload p;
  p.values = {std::move(v)};
  return p;
}

TriggerCondition trigger(TriggerKind k) { return TriggerCondition{k, std::nullopt, {}}; }

class TempDir {
 public:
  explicit TempDir(const char* name) : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

TEST(ApplyRule, Examples) {
  RuleContext ctx;
  EXPECT_EQ(apply_rule(MigrationRule::type_convert(ParamType::Int), Value::string("17"), ctx), Value::integer(17));
  EXPECT_FALSE(apply_rule(MigrationRule::type_convert(ParamType::Int), Value::string("abc"), ctx).has_value());
  EXPECT_EQ(apply_rule(MigrationRule::make_template("{\"a\":{{PAYLOAD}}}"), Value::string("1"), ctx),
            Value::string("{\"a\":1}"));

  TempDir dir("vexploit_apply_rule");
  ctx.sandbox = dir.path();
  auto file = apply_rule(MigrationRule::file_materialize(), Value::string("EVIL"), ctx);
  ASSERT_TRUE(file && file->is(ValueKind::File));
  EXPECT_EQ(file->as_file().read(), "EVIL");
  auto prog = link_sources(Sources{{unit("m", "pub fn f(x) { return @read_file(x); }"), ModuleRole::Project}});
  auto out = execute(prog, q("m::f"), {*file}, {}, nullptr, dir.path().string());
  EXPECT_EQ(out.value, Value::string("EVIL"));
}

TEST(ApplyRule, Conversions) {
  RuleContext ctx;
  auto conv = [&](ParamType t, Value v) { return apply_rule(MigrationRule::type_convert(t), v, ctx); };
  EXPECT_EQ(conv(ParamType::Float, Value::string("2.5")), Value::real(2.5));
  EXPECT_EQ(conv(ParamType::Str, Value::integer(-3)), Value::string("-3"));
  EXPECT_EQ(conv(ParamType::Str, Value::real(0.5)), Value::string("0.5"));
  EXPECT_EQ(conv(ParamType::List, Value::string("ab")), Value::list({Value::string("a"), Value::string("b")}));
  EXPECT_EQ(conv(ParamType::Record, Value::string("p")), Value::record({{"value", Value::string("p")}}));
  EXPECT_EQ(conv(ParamType::Bool, Value::string("true")), Value::boolean(true));
  EXPECT_FALSE(conv(ParamType::Str, Value::string("same")).has_value());
  EXPECT_FALSE(conv(ParamType::Int, Value::string("12x")).has_value());
  EXPECT_FALSE(conv(ParamType::File, Value::string("x")).has_value());

  // A record argument that carried the received value gets the payload in that field.
  ctx.original = Value::record({{"id", Value::integer(1)}, {"body", Value::record({{"text", Value::string("hi")}})}});
  ctx.received = Value::string("hi");
  EXPECT_EQ(conv(ParamType::Record, Value::string("P")),
            Value::record({{"id", Value::integer(1)}, {"body", Value::record({{"text", Value::string("P")}})}}));
}

TEST(ApplyRule, MarkersAffixesAndTemplates) {
  RuleContext ctx;
  ctx.attacker_host = "evil.example";
  auto marker = MigrationRule::marker_substitute();
  EXPECT_EQ(apply_rule(marker, Value::string("ldap://{{ATTACKER}}/a"), ctx), Value::string("ldap://evil.example/a"));
  EXPECT_FALSE(apply_rule(marker, Value::string("plain"), ctx).has_value());
  EXPECT_EQ(apply_rule(MigrationRule::affix("<", ">"), Value::string("x"), ctx), Value::string("<x>"));
  EXPECT_FALSE(apply_rule(MigrationRule::affix("<", ">"), Value::list({}), ctx).has_value());
  EXPECT_THROW(MigrationRule::make_template("no hole"), std::invalid_argument);
  EXPECT_THROW(MigrationRule::make_template("{{PAYLOAD}}{{PAYLOAD}}"), std::invalid_argument);
  EXPECT_EQ(apply_chain({MigrationRule::make_template("[{{PAYLOAD}}]"), MigrationRule::affix("a", "")},
                        Value::integer(4), ctx),
            Value::string("a[4]"));
  EXPECT_EQ(MigrationRule::type_convert(ParamType::Int).str(), "type_convert(int)");
  EXPECT_EQ(chain_str({}), "direct");
  EXPECT_EQ(chain_str({marker, MigrationRule::make_template("\"{{PAYLOAD}}\"")}),
            "marker_substitute -> template(\"\\\"{{PAYLOAD}}\\\"\")");
}

TEST(CandidateChains, OrderAndLengthBound) {
  RuleContext ctx;
  ctx.annotation = ParamType::Int;
  auto chains = candidate_chains({"[{{PAYLOAD}}]"}, ctx, Value::string("1"));
  // marker, type_convert(int), template, file_materialize, then ordered pairs.
  ASSERT_EQ(chains.size(), 4u + 4u * 3u);
  EXPECT_EQ(chains[0].front().kind, MigrationRule::Kind::MarkerSubstitute);
  EXPECT_EQ(chains[1].front().kind, MigrationRule::Kind::TypeConvert);
  EXPECT_EQ(chains[2].front().kind, MigrationRule::Kind::Template);
  EXPECT_EQ(chains[3].front().kind, MigrationRule::Kind::FileMaterialize);
  for (const auto& c : chains) {
    EXPECT_GE(c.size(), 1u);
    EXPECT_LE(c.size(), 2u);
  }

  RuleContext derived;
  derived.original = Value::string("cmd:ls;");
  derived.received = Value::string("ls");
  auto d = candidate_chains({}, derived, Value::string("x"));
  bool found = false;
  for (const auto& c : d) found |= c.size() == 1 && c[0] == MigrationRule::affix("cmd:", ";");
  EXPECT_TRUE(found);
}

TEST(DetectTrigger, Examples) {
  InstrumentedRun run;
  run.outcome.kind = OutcomeKind::Returned;
  run.outcome.sinks.net.push_back({"ldap://attacker.local/exploit", "x"});
  auto rce = detect_trigger(run, trigger(TriggerKind::Rce), "attacker.local");
  EXPECT_TRUE(rce.triggered);
  EXPECT_EQ(rce.evidence, std::vector<std::string>{"net: ldap://attacker.local/exploit"});
  EXPECT_FALSE(detect_trigger(run, trigger(TriggerKind::Rce), "other.host").triggered);

  TriggerCondition wb{TriggerKind::WrongBehavior, OracleSpec{OracleSpec::Kind::NoException, {}}, {}};
  EXPECT_TRUE(detect_trigger(run, wb, "attacker.local").triggered);
  EXPECT_FALSE(detect_trigger(run, trigger(TriggerKind::DosUncaughtException), "attacker.local").triggered);
}

TEST(DetectTrigger, EachKind) {
  InstrumentedRun run;
  for (auto [kind, outcome] : {std::pair{TriggerKind::DosUncaughtException, OutcomeKind::UncaughtException},
                               std::pair{TriggerKind::DosInfiniteLoop, OutcomeKind::StepBudgetExceeded},
                               std::pair{TriggerKind::DosStackOverflow, OutcomeKind::DepthBudgetExceeded}}) {
    run.outcome.kind = outcome;
    EXPECT_TRUE(detect_trigger(run, trigger(kind), "h").triggered);
    run.outcome.kind = OutcomeKind::Returned;
    EXPECT_FALSE(detect_trigger(run, trigger(kind), "h").triggered);
  }
  TriggerCondition sqli{TriggerKind::Sqli, std::nullopt, "OR '1'='1"};
  run.outcome.sinks.sql = {"SELECT 1", "SELECT * FROM t WHERE a = '' OR '1'='1'"};
  auto s = detect_trigger(run, sqli, "h");
  EXPECT_TRUE(s.triggered);
  EXPECT_EQ(s.evidence.size(), 1u);

  run.outcome.sinks.files = {{"a.txt", "/sb/a.txt", true}};
  EXPECT_FALSE(detect_trigger(run, trigger(TriggerKind::PathTraversal), "h").triggered);
  run.outcome.sinks.files.push_back({"../etc/passwd", "/etc/passwd", false});
  EXPECT_TRUE(detect_trigger(run, trigger(TriggerKind::PathTraversal), "h").triggered);

  TriggerCondition eq{TriggerKind::WrongBehavior, OracleSpec{OracleSpec::Kind::ReturnEquals, Value::integer(0)}, {}};
  TriggerCondition ne{TriggerKind::WrongBehavior, OracleSpec{OracleSpec::Kind::ReturnDiffers, Value::integer(0)}, {}};
  EXPECT_FALSE(detect_trigger(run, eq, "h").triggered);
  EXPECT_FALSE(detect_trigger(run, ne, "h").triggered);
  run.target_return = Value::real(0.0);
  EXPECT_TRUE(detect_trigger(run, eq, "h").triggered);
  EXPECT_FALSE(detect_trigger(run, ne, "h").triggered);
}

TEST(DetectTrigger, UrlHostAndValidation) {
  EXPECT_EQ(url_host("ldap://attacker.local:1389/a"), "attacker.local");
  EXPECT_EQ(url_host("http://user@attacker.local/x?y"), "attacker.local");
  EXPECT_EQ(url_host("attacker.local/x"), "attacker.local");
  EXPECT_EQ(url_host("dns://attacker.local"), "attacker.local");
  EXPECT_EQ(url_host("http://attacker.local.evil/x"), "attacker.local.evil");
  EXPECT_NE(trigger(TriggerKind::WrongBehavior).validate(), "");
  EXPECT_NE(trigger(TriggerKind::Sqli).validate(), "");
  EXPECT_EQ(trigger(TriggerKind::Rce).validate(), "");
  EXPECT_EQ((TriggerCondition{TriggerKind::Sqli, std::nullopt, "("}.validate().rfind("bad sql_pattern", 0)), 0u);
}

const char* kNestLib = R"(pub fn parse(s) { return value(s, 0); }
fn value(s, i) {
  if i < @len(s) and @char_at(s, i) == "{" { return value(s, i + 1) + 1; }
  return 0;
})";

MigrationSettings settings_for(const std::filesystem::path& sandbox = {}) {
  MigrationSettings s;
  s.sandbox = sandbox;
  return s;
}

TEST(Migrate, PassThroughStackOverflowIsDirect) {
  auto p = with_lib("pub fn handle(body) { return lib::parse(body); }", kNestLib);
  std::string nested(2000, '{');
  auto report = migrate(p, {{q("app::handle"), {Value::string("{")}}}, payload_of(Value::string(nested)),
                        q("lib::parse"), trigger(TriggerKind::DosStackOverflow), settings_for());
  EXPECT_EQ(report.verdict, Verdict::Exploitable);
  EXPECT_TRUE(report.rules.empty());
  EXPECT_EQ(report.outcome, "depth_budget_exceeded");
  EXPECT_EQ(report.executions, 1u);
  ASSERT_TRUE(report.substitution.has_value());
  EXPECT_EQ(report.substitution->position, 0u);
  EXPECT_NEAR(report.received_similarity, 1.0, 1e-12);
  ASSERT_TRUE(report.call_path.has_value());
  EXPECT_EQ(report.call_path->path, (std::vector<QualifiedName>{q("app::handle"), q("lib::parse")}));

  auto replay = check_test(p, *report.migrated_test, payload_of(Value::string(nested)), q("lib::parse"),
                           trigger(TriggerKind::DosStackOverflow), settings_for());
  EXPECT_EQ(replay.verdict, Verdict::Exploitable);
}

TEST(Migrate, AnnotationForcesTypeConvert) {
  auto p = with_lib("pub fn e(tag, x: int) { return lib::check(x); }",
                    "pub fn check(n) { if n == 42 { throw \"boom\"; } return n; }");
  auto report = migrate(p, {{q("app::e"), {Value::string("t"), Value::integer(1)}}}, payload_of(Value::string("42")),
                        q("lib::check"), trigger(TriggerKind::DosUncaughtException), settings_for());
  EXPECT_EQ(report.verdict, Verdict::Exploitable);
  EXPECT_EQ(report.rules, RuleChain{MigrationRule::type_convert(ParamType::Int)});
  EXPECT_EQ(report.substitution->position, 1u);
  EXPECT_EQ(report.migrated_test->args, (List{Value::string("t"), Value::integer(42)}));
}

const char* kQueryLib = R"(pub fn query(doc) {
  let inner = @substr(doc, 5, @len(doc) - 6);
  if not @starts_with(doc, "{\"k\":") or not @starts_with(inner, "\"") or @len(inner) < 2 { throw "bad document"; }
  let text = @substr(inner, 1, @len(inner) - 2);
  return @sql_exec("SELECT * FROM t WHERE k = '" + text + "'");
})";

const char* kWrapApp = R"(pub fn find(x) { return lib::query("{\"k\":" + x + "}"); })";

TEST(Migrate, ExactlyOneTemplateRepairsWrapping) {
  auto p = with_lib(kWrapApp, kQueryLib);
  TriggerCondition sqli{TriggerKind::Sqli, std::nullopt, "OR '1'='1"};
  ExploitPayload pay = payload_of(Value::string("{\"k\":\"x' OR '1'='1\"}"));
  std::vector<std::string> templates{"[{{PAYLOAD}}]", "\"{{PAYLOAD}}\"", "{{PAYLOAD}}}"};
  TestCase covering{q("app::find"), {Value::string("\"abc\"")}};

  // Exhaustive enumeration over every candidate chain.
  RuleContext ctx;
  ctx.original = covering.args[0];
  std::vector<std::string> winners;
  for (const auto& chain : candidate_chains(templates, ctx, pay.primary())) {
    auto v = apply_chain(chain, pay.primary(), ctx);
    if (!v) continue;
    TestCase t = covering;
    t.args[0] = *v;
    auto run = run_instrumented(p, t, q("lib::query"), std::nullopt, {});
    if (run.dyn_graph && detect_trigger(run, sqli, "attacker.local").triggered && chain.size() == 1) {
      winners.push_back(chain_str(chain));
    }
  }
  EXPECT_EQ(winners, std::vector<std::string>{chain_str({MigrationRule::make_template("\"{{PAYLOAD}}\"")})});

  MigrationSettings s = settings_for();
  s.templates = templates;
  auto report = migrate(p, {covering}, pay, q("lib::query"), sqli, s);
  EXPECT_EQ(report.verdict, Verdict::Exploitable);
  EXPECT_EQ(chain_str(report.rules), winners.front());
  ASSERT_EQ(report.evidence.size(), 1u);
  EXPECT_NE(report.evidence[0].find("OR '1'='1"), std::string::npos);

  auto again = migrate(p, {covering}, pay, q("lib::query"), sqli, s);
  EXPECT_EQ(again.rules, report.rules);
  EXPECT_EQ(again.executions, report.executions);
}

TEST(Migrate, SanitizedProjectRecordsNearMiss) {
  auto p = with_lib(R"(pub fn find(x) {
  let clean = "";
  let i = 0;
  while i < @len(x) {
    let c = @char_at(x, i);
    if c != "'" { clean = clean + c; }
    i = i + 1;
  }
  return lib::query("{\"k\":\"" + clean + "\"}");
})",
                    kQueryLib);
  TriggerCondition sqli{TriggerKind::Sqli, std::nullopt, "OR '1'='1"};
  ExploitPayload pay = payload_of(Value::string("{\"k\":\"x' OR '1'='1\"}"));
  MigrationSettings s = settings_for();
  s.templates = {"\"{{PAYLOAD}}\""};
  TestCase covering{q("app::find"), {Value::string("abc")}};
  auto report = migrate(p, {covering}, pay, q("lib::query"), sqli, s);
  EXPECT_EQ(report.verdict, Verdict::NotExploitable);
  EXPECT_EQ(report.reason, "rules_exhausted");
  EXPECT_TRUE(report.evidence.empty());
  EXPECT_GT(report.executions, 1u);
  EXPECT_LE(report.executions, s.max_executions_per_test);
  ASSERT_TRUE(report.received_value.has_value());

  // The recorded similarity is the best over every attempt.
  auto direct = check_test(p, TestCase{q("app::find"), {pay.primary()}}, pay, q("lib::query"), sqli, s);
  EXPECT_GE(report.received_similarity, direct.received_similarity);
  EXPECT_NEAR(report.received_similarity, similarity(*report.received_value, pay.primary()), 1e-12);
  EXPECT_LT(report.received_similarity, 1.0);
}

TEST(Migrate, ManualDowngradesAndEmptyArchive) {
  auto p = with_lib("pub fn handle(body) { return lib::parse(body); }", kNestLib);
  MigrationSettings s = settings_for();
  s.manual = true;
  std::string nested(2000, '{');
  auto report = migrate(p, {{q("app::handle"), {Value::string("")}}}, payload_of(Value::string(nested)),
                        q("lib::parse"), trigger(TriggerKind::DosStackOverflow), s);
  EXPECT_EQ(report.verdict, Verdict::Inconclusive);
  EXPECT_FALSE(report.evidence.empty());

  auto none = migrate(p, {}, payload_of(Value::string(nested)), q("lib::parse"),
                      trigger(TriggerKind::DosStackOverflow), settings_for());
  EXPECT_EQ(none.verdict, Verdict::NotExploitable);
  EXPECT_EQ(none.reason, "no_covering_test");
  EXPECT_EQ(none.executions, 0u);
}

TEST(Migrate, MarkerAndFileMaterializeChains) {
  TempDir dir("vexploit_migrate_files");
  auto p = with_lib("pub fn load(f: file) { return lib::fetch(@read_file(f)); }",
                    "pub fn fetch(url) { @net_send(url, \"\"); return 1; }");
  ExploitPayload pay = payload_of(Value::string("http://{{ATTACKER}}/x"));
  MigrationSettings s = settings_for(dir.path());
  TestCase covering{q("app::load"), {Value::file(materialize_content(dir.path(), "http://localhost/"))}};
  auto report = migrate(p, {covering}, pay, q("lib::fetch"), trigger(TriggerKind::Rce), s);
  EXPECT_EQ(report.verdict, Verdict::Exploitable);
  EXPECT_EQ(report.rules, (RuleChain{MigrationRule::marker_substitute(), MigrationRule::file_materialize()}));
  EXPECT_EQ(report.evidence, std::vector<std::string>{"net: http://attacker.local/x"});
  ASSERT_TRUE(report.migrated_test->args[0].is(ValueKind::File));
  EXPECT_EQ(report.migrated_test->args[0].as_file().read(), "http://attacker.local/x");
}

}  // namespace
}  // namespace vexploit

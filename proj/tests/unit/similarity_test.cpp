#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "random_values.hpp"
#include "vexploit/exploit.hpp"
#include "vexploit/similarity.hpp"

namespace vexploit {
namespace {

namespace fs = std::filesystem;

// Textbook recursive definition, no memoization.
std::size_t lev_recursive(std::u32string_view a, std::u32string_view b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  std::size_t sub = lev_recursive(a.substr(1), b.substr(1)) + (a[0] == b[0] ? 0 : 1);
  std::size_t del = lev_recursive(a.substr(1), b) + 1;
  std::size_t ins = lev_recursive(a, b.substr(1)) + 1;
  return std::min({sub, del, ins});
}

std::size_t lev_dp(const std::u32string& a, const std::u32string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> all_strings(const std::string& alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char c : alphabet) out.push_back(out[i] + c);
    }
    begin = end;
  }
  return out;
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("flaw", "lawn"), 2u);
  EXPECT_EQ(levenshtein("flaw", "lawn"), lev_recursive(U"flaw", U"lawn"));
}

TEST(Levenshtein, CountsScalarsNotBytes) {
  EXPECT_EQ(levenshtein("caf\xc3\xa9", "cafe"), 1u);
  EXPECT_EQ(levenshtein("\xe2\x82\xac", ""), 1u);
  EXPECT_EQ(levenshtein("\xff", "\xfe"), 1u);
}

TEST(Levenshtein, ExhaustiveAgainstRecursiveDefinition) {
  auto strings = all_strings("abc", 4);
  for (const auto& a : strings) {
    std::u32string ua(a.begin(), a.end());
    for (const auto& b : strings) {
      std::u32string ub(b.begin(), b.end());
      ASSERT_EQ(levenshtein(a, b), lev_recursive(ua, ub)) << a << " / " << b;
    }
  }
}

TEST(Levenshtein, MultiWordRandomAgainstDp) {
  std::mt19937 rng(42);
  for (int i = 0; i < 300; ++i) {
    std::size_t la = 60 + rng() % 240, lb = 60 + rng() % 240;
    std::string a(la, 'a'), b(lb, 'a');
    for (auto& c : a) c = static_cast<char>('a' + rng() % 4);
    for (auto& c : b) c = static_cast<char>('a' + rng() % 4);
    if (i % 3 == 0) b = a.substr(0, la / 2) + b + a.substr(la / 2);
    ASSERT_EQ(levenshtein(a, b), lev_dp(std::u32string(a.begin(), a.end()), std::u32string(b.begin(), b.end())));
  }
}

TEST(Levenshtein, NonAsciiPatternsAgainstDp) {
  std::mt19937 rng(9);
  const char32_t alphabet[] = {U'a', U'é', U'€', U'\U0001F600', U'b'};
  for (int i = 0; i < 200; ++i) {
    std::u32string a, b;
    for (std::size_t k = rng() % 150; k > 0; --k) a.push_back(alphabet[rng() % 5]);
    for (std::size_t k = rng() % 150; k > 0; --k) b.push_back(alphabet[rng() % 5]);
    ASSERT_EQ(levenshtein(std::u32string_view(a), std::u32string_view(b)), lev_dp(a, b));
  }
}

TEST(Levenshtein, TriangleInequality) {
  testing::RandomValues gen(1);
  for (int i = 0; i < 2000; ++i) {
    auto a = gen.str(12), b = gen.str(12), c = gen.str(12);
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
  }
}

TEST(Similarity, StringRule) {
  EXPECT_DOUBLE_EQ(string_similarity("ab", "ab"), 1.0);
  EXPECT_NEAR(string_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(string_similarity("abc", ""), 0.0);
  EXPECT_DOUBLE_EQ(string_similarity("", ""), 1.0);
}

TEST(Similarity, NumberRule) {
  EXPECT_EQ(number_similarity(Value::integer(7), Value::integer(7)), 1.0);
  EXPECT_EQ(number_similarity(Value::integer(7), Value::integer(8)), 0.0);
  EXPECT_EQ(number_similarity(Value::boolean(true), Value::boolean(true)), 1.0);
  EXPECT_EQ(number_similarity(Value::boolean(true), Value::integer(1)), 0.0);
  double lhs = 0.1 + 0.2;
  ASSERT_NE(lhs, 0.3);
  ASSERT_LT(std::fabs(lhs - 0.3) / 0.3, 1e-9);
  EXPECT_EQ(number_similarity(Value::real(lhs), Value::real(0.3)), 1.0);
  EXPECT_EQ(number_similarity(Value::integer(3), Value::real(3.0)), 1.0);
  EXPECT_EQ(number_similarity(Value::real(1.0), Value::real(1.0 + 1e-6)), 0.0);
}

TEST(Similarity, DispatchAndObjects) {
  EXPECT_EQ(similarity(Value::string("abc"), Value::integer(3)), 0.0);
  auto rec = [](Record r) { return Value::record(std::move(r)); };
  EXPECT_DOUBLE_EQ(similarity(rec({{"a", Value::string("xy")}, {"b", Value::integer(3)}}),
                              rec({{"a", Value::string("xz")}, {"b", Value::integer(3)}})),
                   0.75);
  EXPECT_DOUBLE_EQ(similarity(rec({{"x", Value::integer(1)}}), rec({{"x", Value::integer(1)}})), 1.0);
  EXPECT_DOUBLE_EQ(similarity(rec({{"x", Value::integer(1)}}),
                              rec({{"x", Value::integer(1)}, {"y", Value::string("q")}})),
                   0.5);
  EXPECT_DOUBLE_EQ(similarity(rec({{"p", rec({{"x", Value::string("ab")}})}}),
                              rec({{"p", rec({{"x", Value::string("ad")}})}})),
                   0.5);
  EXPECT_DOUBLE_EQ(similarity(rec({}), rec({})), 1.0);
  EXPECT_DOUBLE_EQ(similarity(rec({{"a", Value()}}), rec({})), 0.0);
}

TEST(Similarity, Lists) {
  auto l = [](List x) { return Value::list(std::move(x)); };
  EXPECT_DOUBLE_EQ(similarity(l({}), l({})), 1.0);
  EXPECT_DOUBLE_EQ(similarity(l({Value::integer(1)}), l({Value::integer(1), Value::integer(2)})), 0.5);
  EXPECT_DOUBLE_EQ(similarity(l({}), l({Value::integer(1)})), 0.0);
}

TEST(Similarity, Files) {
  fs::path root = fs::temp_directory_path() / "vexploit_similarity_files";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "a.txt") << "0123456789";
  std::ofstream(root / "b.txt") << "0123456789";
  std::ofstream(root / "c.txt") << "0123456780";
  FileRef a{root.string(), "a.txt"}, b{root.string(), "b.txt"}, c{root.string(), "c.txt"};
  EXPECT_DOUBLE_EQ(similarity(Value::file(b), Value::file(a)), 1.0);
  EXPECT_DOUBLE_EQ(similarity(Value::string("0123456789"), Value::file(a)), 1.0);
  EXPECT_DOUBLE_EQ(similarity(Value::file(c), Value::file(a)), 0.95);
  EXPECT_DOUBLE_EQ(similarity(Value::file(a), Value::string("0123456789")), 1.0);
  EXPECT_THROW(similarity(Value::string("x"), Value::file(FileRef{root.string(), "missing"})), std::runtime_error);
  fs::remove_all(root);
}

TEST(Similarity, IdentityBoundsAndSymmetryOverRandomValues) {
  testing::RandomValues gen(77);
  for (int i = 0; i < 3000; ++i) {
    Value a = gen.value(), b = gen.value();
    ASSERT_DOUBLE_EQ(similarity(a, a), 1.0) << render_literal(a);
    double s = similarity(a, b);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    auto x = gen.str(10), y = gen.str(10);
    ASSERT_DOUBLE_EQ(string_similarity(x, y), string_similarity(y, x));
  }
}

TEST(Similarity, ObjectMonotoneInFieldEquality) {
  testing::RandomValues gen(5);
  for (int i = 0; i < 1000; ++i) {
    Value expected = gen.value(2);
    Value actual = gen.value(2);
    if (!expected.is(ValueKind::Record) || !actual.is(ValueKind::Record) || expected.as_record().empty()) continue;
    double before = similarity(actual, expected);
    Value improved = actual;
    const auto& f = expected.as_record()[gen.pick(expected.as_record().size())];
    improved.set_field(f.first, f.second);
    ASSERT_GE(similarity(improved, expected) + 1e-12, before);
  }
}

TEST(Exploit, ExtractsPayloadEvenWhenTheExploitTriggers) {
  auto p = link_sources(
      {{SourceUnit{"exploit", R"(pub fn main() {
  let s = "";
  let i = 0;
  while i < 10000 { s = s + "{\"a\":"; i = i + 1; }
  s = s + "1";
  i = 0;
  while i < 10000 { s = s + "}"; i = i + 1; }
  return minijson::parse(s);
})",
                   "exploit.vex"},
        ModuleRole::Script},
       {SourceUnit{"minijson", R"(pub fn parse(s) { return value(s, 0); }
fn value(s, i) { if @char_at(s, i) == "{" { return value(s, i + 5); } return i; })",
                   "minijson.vex"},
        ModuleRole::Library}});
  auto ex = extract_payload(p, {"exploit", "main"}, {"minijson", "parse"}, {}, {}, 0, "json-deep");
  EXPECT_EQ(ex.run.outcome.kind, OutcomeKind::DepthBudgetExceeded);
  ASSERT_EQ(ex.payload.values.size(), 1u);
  EXPECT_EQ(ex.payload.primary().as_str().size(), 10000u * 5 + 1 + 10000);
  EXPECT_EQ(ex.payload.primary().as_str().substr(0, 10), "{\"a\":{\"a\":");
}

TEST(Exploit, ExtractionErrors) {
  auto p = link_sources({{SourceUnit{"exploit", "pub fn main() { return 0; }", "exploit.vex"}, ModuleRole::Script},
                         {SourceUnit{"lib", "pub fn v(x) { return x; }", "lib.vex"}, ModuleRole::Library}});
  EXPECT_THROW(extract_payload(p, {"exploit", "main"}, {"lib", "v"}, {}, {}), ExtractionError);
  auto q = link_sources({{SourceUnit{"exploit", "pub fn main() { return lib::v(0); }", "exploit.vex"}, ModuleRole::Script},
                         {SourceUnit{"lib", "pub fn v(x) { return x; }", "lib.vex"}, ModuleRole::Library}});
  auto ok = extract_payload(q, {"exploit", "main"}, {"lib", "v"}, {}, {});
  EXPECT_EQ(ok.payload.values, std::vector<Value>{Value::integer(0)});
  EXPECT_THROW(extract_payload(q, {"exploit", "main"}, {"lib", "v"}, {}, {}, 1), ExtractionError);
}

TEST(Exploit, SubstituteMarkers) {
  EXPECT_EQ(substitute_markers(Value::string("ldap://{{ATTACKER}}/x"), "attacker.local"),
            Value::string("ldap://attacker.local/x"));
  EXPECT_EQ(substitute_markers(Value::string("plain"), "attacker.local"), Value::string("plain"));
  Value rec = Value::record({{"url", Value::string("{{ATTACKER}}")}, {"n", Value::integer(3)}});
  Value once = substitute_markers(rec, "h");
  EXPECT_EQ(render_literal(once), "{url: \"h\", n: 3}");
  EXPECT_EQ(substitute_markers(once, "h"), once);

  fs::path root = fs::temp_directory_path() / "vexploit_marker_files";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "evil.xml") << "<!ENTITY x SYSTEM \"http://{{ATTACKER}}/\">";
  Value f = substitute_markers(Value::file({root.string(), "evil.xml"}), "attacker.local");
  ASSERT_TRUE(f.is(ValueKind::File));
  EXPECT_EQ(f.as_file().read(), "<!ENTITY x SYSTEM \"http://attacker.local/\">");
  EXPECT_EQ(substitute_markers(f, "attacker.local"), f);
  fs::remove_all(root);
}

}  // namespace
}  // namespace vexploit

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "vexploit/corpus.hpp"

namespace vexploit {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const char* name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

TEST(Corpus, ShippedCorpusValidates) {
  TempDir scratch("vexploit_corpus_validate");
  std::vector<Diagnostic> diags = validate_corpus(VEXPLOIT_CORPUS_DIR, scratch.path());
  for (const auto& d : diags) ADD_FAILURE() << d.to_string();
  EXPECT_TRUE(diags.empty());
}

TEST(Corpus, Composition) {
  Corpus c = load_corpus(VEXPLOIT_CORPUS_DIR);
  EXPECT_GE(c.vulns.size(), 12u);
  std::set<std::string> families;
  std::map<std::string, int> param_types;
  for (const auto& [id, v] : c.vulns) {
    std::string kind(trigger_kind_name(v.trigger.kind));
    families.insert(kind.rfind("dos_", 0) == 0 ? "dos" : kind);
    ++param_types[v.param_type];
  }
  for (const char* f : {"dos", "rce", "xxe", "sqli", "wrong_behavior"}) EXPECT_TRUE(families.count(f)) << f;
  for (const char* t : {"str", "file", "object", "number"}) EXPECT_GE(param_types[t], 2) << t;

  std::map<std::string, std::pair<int, int>> per_vuln;  // exploitable, safe
  int with_tests = 0;
  for (const auto& [name, p] : c.projects) {
    with_tests += p.has_tests ? 1 : 0;
    for (const auto& e : p.expected) {
      EXPECT_TRUE(c.vulns.count(e.vuln)) << name << " expects unknown " << e.vuln;
      auto& slot = per_vuln[e.vuln];
      (e.exploitable ? slot.first : slot.second) += 1;
      EXPECT_TRUE(e.reachable) << name;
    }
  }
  EXPECT_GE(with_tests, 4);
  for (const auto& [id, v] : c.vulns) {
    EXPECT_GE(per_vuln[id].first, 1) << id;
    EXPECT_GE(per_vuln[id].second, 1) << id;
  }
}

TEST(Corpus, PayloadExtractionAndReplay) {
  Corpus c = load_corpus(VEXPLOIT_CORPUS_DIR);
  TempDir sandbox("vexploit_corpus_extract");
  const VulnerabilityRecord& json = c.vuln("json-deep-nesting");
  ExploitPayload p = extract_vuln_payload(c, json, sandbox.path());
  ASSERT_EQ(p.values.size(), 1u);
  EXPECT_EQ(p.primary().as_str().size(), 600u * 5 + 1 + 600);
  EXPECT_TRUE(replay_against_library(c, json, p, sandbox.path(), "attacker.local").triggered);

  const VulnerabilityRecord& log = c.vuln("log-jndi-lookup");
  ExploitPayload lp = extract_vuln_payload(c, log, sandbox.path());
  EXPECT_NE(lp.primary().as_str().find(kAttackerMarker), std::string::npos);
  EXPECT_TRUE(replay_against_library(c, log, lp, sandbox.path(), "attacker.local").triggered);

  const VulnerabilityRecord& xml = c.vuln("xml-external-entity");
  ExploitPayload xp = extract_vuln_payload(c, xml, sandbox.path());
  ASSERT_TRUE(xp.primary().is(ValueKind::File));
  EXPECT_EQ(fs::path(xp.primary().as_file().root), sandbox.path());
  EXPECT_EQ(c.vuln("math-zero-ratio").primary_index, 1u);
}

TEST(Corpus, ManifestErrors) {
  TempDir root("vexploit_corpus_errors");
  write(root.path() / "libs" / "l" / "l.vex", "pub fn f(x) { return x; }\n");
  write(root.path() / "vulns" / "v" / "exploit.vex", "pub fn main() { return l::f(1); }\n");
  write(root.path() / "vulns" / "v" / "vuln.toml",
        "id = \"v\"\nlibrary = \"l\"\nvulnerable_function = \"l::f\"\ncolour = \"red\"\n[trigger]\nkind = \"rce\"\n");
  EXPECT_THROW(load_vulnerability(root.path() / "vulns" / "v" / "vuln.toml"), CorpusError);

  write(root.path() / "vulns" / "v" / "vuln.toml",
        "id = \"v\"\nlibrary = \"l\"\nvulnerable_function = \"l::f\"\n[trigger]\nkind = \"wrong_behavior\"\n");
  EXPECT_THROW(load_vulnerability(root.path() / "vulns" / "v" / "vuln.toml"), CorpusError);

  write(root.path() / "vulns" / "v" / "vuln.toml",
        "id = \"w\"\nlibrary = \"l\"\nvulnerable_function = \"l::f\"\n[trigger]\nkind = \"rce\"\n");
  std::vector<Diagnostic> diags;
  Corpus c = load_corpus(root.path(), &diags);
  EXPECT_TRUE(c.vulns.empty());
  ASSERT_EQ(diags.size(), 1u);

  write(root.path() / "vulns" / "v" / "vuln.toml",
        "id = \"v\"\nlibrary = \"l\"\nvulnerable_function = \"l::f\"\n[trigger]\nkind = \"rce\"\n");
  write(root.path() / "projects" / "p" / "project.toml",
        "name = \"p\"\ndependencies = [\"l\"]\n[[expected]]\nvuln = \"v\"\nexploitable = true\n");
  write(root.path() / "projects" / "p" / "src" / "app.vex", "pub fn go(x) { return l::f(x); }\n");
  diags.clear();
  c = load_corpus(root.path(), &diags);
  EXPECT_TRUE(diags.empty());
  EXPECT_EQ(c.projects.size(), 1u);
  // The exploit never reaches the network, so the record does not self-certify.
  std::vector<Diagnostic> problems = validate_corpus(root.path(), root.path() / "scratch");
  EXPECT_FALSE(problems.empty());
}

TEST(Corpus, RootFromEnvironment) {
  ::setenv("VEXPLOIT_CORPUS", "/somewhere/else", 1);
  EXPECT_EQ(corpus_root("/default"), fs::path("/somewhere/else"));
  ::unsetenv("VEXPLOIT_CORPUS");
  EXPECT_EQ(corpus_root("/default"), fs::path("/default"));
}

}  // namespace
}  // namespace vexploit

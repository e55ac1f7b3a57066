#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vexploit/migration.hpp"

namespace vexploit {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VulnerabilityRecord {
  std::string id;
  std::filesystem::path dir;
  std::string library;
  QualifiedName vulnerable_function;
  TriggerCondition trigger;
  std::filesystem::path exploit;  // absolute
  std::string exploit_entry = "main";
  std::size_t primary_index = 0;
  std::vector<std::string> templates;
  bool manual = false;
  std::string param_type;  // str | file | object | number, informational
  std::string notes;

  std::filesystem::path fixtures_dir() const { return dir / "fixtures"; }
};

struct Expectation {
  std::string vuln;
  bool exploitable = false;
  bool reachable = false;
};

struct ProjectManifest {
  std::string name;
  std::filesystem::path dir;
  std::vector<std::string> dependencies;
  bool has_tests = false;
  std::vector<Expectation> expected;
  std::string notes;
};

/// Throws CorpusError when the manifest is malformed or references missing files.
VulnerabilityRecord load_vulnerability(const std::filesystem::path& manifest);
ProjectManifest load_project(const std::filesystem::path& manifest);

struct Corpus {
  std::filesystem::path root;
  std::map<std::string, VulnerabilityRecord> vulns;
  std::map<std::string, ProjectManifest> projects;
  std::vector<std::string> libraries;

  std::filesystem::path library_dir(const std::string& lib) const { return root / "libs" / lib; }
  const VulnerabilityRecord& vuln(const std::string& id) const;
  const ProjectManifest& project(const std::string& name) const;
  /// Finds a project by name or by directory.
  const ProjectManifest* find_project(const std::filesystem::path& name_or_dir) const;
};

/// Loads every manifest. Load failures are returned as diagnostics; the
/// offending entries are left out.
Corpus load_corpus(const std::filesystem::path& root, std::vector<Diagnostic>* diagnostics = nullptr);

/// Corpus root: $VEXPLOIT_CORPUS when set, else `fallback`.
std::filesystem::path corpus_root(const std::filesystem::path& fallback);

Program load_exploit_program(const Corpus& corpus, const VulnerabilityRecord& vuln);
Program load_project_program(const Corpus& corpus, const ProjectManifest& project);

/// Copies the record's fixtures into `sandbox/fixtures`.
void stage_fixtures(const VulnerabilityRecord& vuln, const std::filesystem::path& sandbox);

/// Points every FileRef inside `v` at `root`.
Value rebase_files(const Value& v, const std::string& root);

/// Extraction, staged in `sandbox` and with markers still present.
ExploitPayload extract_vuln_payload(const Corpus& corpus, const VulnerabilityRecord& vuln,
                                    const std::filesystem::path& sandbox, const Budgets& budgets = {});

/// Runs the vulnerable function directly on the marker-substituted payload.
TriggerCheck replay_against_library(const Corpus& corpus, const VulnerabilityRecord& vuln,
                                    const ExploitPayload& payload, const std::filesystem::path& sandbox,
                                    std::string_view attacker_host, const Budgets& budgets = {});

/// Every record must extract and re-trigger against its library; every
/// project must link against its declared libraries.
std::vector<Diagnostic> validate_corpus(const std::filesystem::path& root,
                                        const std::filesystem::path& scratch = {});

}  // namespace vexploit

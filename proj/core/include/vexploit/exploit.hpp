#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vexploit/instrument.hpp"

namespace vexploit {

inline constexpr std::string_view kAttackerMarker = "{{ATTACKER}}";

struct ExploitPayload {
  std::vector<Value> values;  // arguments received by the vulnerable function
  std::size_t primary_index = 0;
  std::string source;  // vulnerability id

  const Value& primary() const { return values.at(primary_index); }
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExploitRun {
  ExploitPayload payload;
  InstrumentedRun run;
};

/// Runs `entry` of the exploit program and captures what `vulnerable` receives
/// on its first invocation. Throws ExtractionError when it is never reached or
/// when `primary_index` is out of range.
ExploitRun extract_payload(const Program& exploit_program, const QualifiedName& entry, const QualifiedName& vulnerable,
                           const Budgets& budgets, const std::filesystem::path& sandbox_root,
                           std::size_t primary_index = 0, std::string source = {});

/// Replaces every marker occurrence inside strings, nested collections and
/// file contents. Files whose content changes are rewritten next to the
/// original under `materialized/` with a content-addressed name.
Value substitute_markers(const Value& value, std::string_view attacker_host);
ExploitPayload substitute_markers(const ExploitPayload& payload, std::string_view attacker_host);

/// Writes `content` to `<root>/materialized/<hash>.dat` (once) and returns the FileRef.
FileRef materialize_content(const std::filesystem::path& root, std::string_view content);

}  // namespace vexploit

#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vexploit {

struct SourceLoc {
  std::uint32_t line = 0;
  std::uint32_t column = 0;

  auto operator<=>(const SourceLoc&) const = default;
};

/// One `.vex` file. The module name is the file stem.
struct SourceUnit {
  std::string module_name;
  std::string text;
  std::filesystem::path origin;

  static SourceUnit from_file(const std::filesystem::path& path);
};

struct Diagnostic {
  std::string origin;
  SourceLoc loc;
  std::string message;

  std::string to_string() const;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

/// Thrown by operations whose failure mode is a list of diagnostics
/// (linking, corpus loading). Parsing reports diagnostics by value instead.
class DiagnosticError : public std::runtime_error {
 public:
  explicit DiagnosticError(std::vector<Diagnostic> diags);

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

bool is_identifier(std::string_view text) noexcept;
bool is_keyword(std::string_view word);

/// "module::function". Modules stand in for classes of an object-oriented host.
struct QualifiedName {
  std::string module;
  std::string function;

  std::string str() const { return module + "::" + function; }

  /// Parses "module::function"; nullopt on anything else.
  static std::optional<QualifiedName> parse(std::string_view text);

  auto operator<=>(const QualifiedName&) const = default;
};

}  // namespace vexploit

template <>
struct std::hash<vexploit::QualifiedName> {
  std::size_t operator()(const vexploit::QualifiedName& q) const noexcept {
    return std::hash<std::string>{}(q.module) * 31u ^ std::hash<std::string>{}(q.function);
  }
};

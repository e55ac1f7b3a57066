#include "vexploit/vex/source.hpp"

#include <fstream>
#include <sstream>

namespace vexploit {

SourceUnit SourceUnit::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return SourceUnit{path.stem().string(), buf.str(), path};
}

std::string Diagnostic::to_string() const {
  std::ostringstream out;
  out << (origin.empty() ? "<input>" : origin);
  if (loc.line != 0) {
    out << ':' << loc.line << ':' << loc.column;
  }
  out << ": " << message;
  return out.str();
}

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += '\n';
    out += d.to_string();
  }
  return out;
}

DiagnosticError::DiagnosticError(std::vector<Diagnostic> diags)
    : std::runtime_error(format_diagnostics(diags)), diags_(std::move(diags)) {}

bool is_identifier(std::string_view text) noexcept {
  if (text.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(text.front())) return false;
  for (char c : text) {
    if (!alpha(c) && !digit(c)) return false;
  }
  return true;
}

bool is_keyword(std::string_view word) {
  static constexpr std::string_view kKeywords[] = {"pub",   "fn",  "let",   "if",   "else",  "while",
                                                   "return", "throw", "try", "catch", "true", "false",
                                                   "null",  "and", "or",    "not"};
  for (auto k : kKeywords) {
    if (k == word) return true;
  }
  return false;
}

std::optional<QualifiedName> QualifiedName::parse(std::string_view text) {
  auto sep = text.find("::");
  if (sep == std::string_view::npos) return std::nullopt;
  auto mod = text.substr(0, sep);
  auto fn = text.substr(sep + 2);
  if (!is_identifier(mod) || !is_identifier(fn)) return std::nullopt;
  return QualifiedName{std::string(mod), std::string(fn)};
}

}  // namespace vexploit

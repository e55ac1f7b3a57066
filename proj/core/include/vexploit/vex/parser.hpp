#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vexploit/vex/ast.hpp"
#include "vexploit/vex/source.hpp"

namespace vexploit {

struct ParseResult {
  std::optional<ModuleAst> module;
  std::vector<Diagnostic> diagnostics;

  bool ok() const noexcept { return module.has_value() && diagnostics.empty(); }
};

/// Parses one module. Stops at the first syntax error; semantic checks on the
/// declaration level (duplicate names, unknown annotations) are all reported.
ParseResult parse_module(const SourceUnit& source);

/// Parses a literal value (`42`, `"x"`, `[1, {a: null}]`, ...). `@open("p")`
/// is accepted and yields a FileRef rooted at `file_root`.
std::optional<Value> parse_literal(std::string_view text, std::string_view file_root = {});

/// Canonical source form; parse(render(m)) is structurally equal to m.
std::string render_module(const ModuleAst& module);
std::string render_function(const FunctionDecl& fn);
std::string render_expr(const Expr& expr);

/// S-expression dump of the tree, optionally with source positions.
std::string dump_module(const ModuleAst& module, bool with_positions);

}  // namespace vexploit

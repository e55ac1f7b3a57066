#include "vexploit/vex/ast.hpp"

#include <array>
#include <utility>

namespace vexploit {

namespace {

constexpr std::array<std::pair<std::string_view, Builtin>, 14> kBuiltins{{
    {"len", Builtin::Len},
    {"substr", Builtin::Substr},
    {"concat", Builtin::Concat},
    {"contains", Builtin::Contains},
    {"starts_with", Builtin::StartsWith},
    {"to_int", Builtin::ToInt},
    {"to_str", Builtin::ToStr},
    {"to_float", Builtin::ToFloat},
    {"char_at", Builtin::CharAt},
    {"open", Builtin::Open},
    {"read_file", Builtin::ReadFile},
    {"net_send", Builtin::NetSend},
    {"sql_exec", Builtin::SqlExec},
    {"log", Builtin::Log},
}};

constexpr std::array<std::pair<std::string_view, ParamType>, 7> kParamTypes{{
    {"int", ParamType::Int},
    {"float", ParamType::Float},
    {"bool", ParamType::Bool},
    {"str", ParamType::Str},
    {"list", ParamType::List},
    {"record", ParamType::Record},
    {"file", ParamType::File},
}};

}  // namespace

std::optional<Builtin> builtin_from_name(std::string_view name) noexcept {
  for (auto [n, b] : kBuiltins) {
    if (n == name) return b;
  }
  return std::nullopt;
}

std::string_view builtin_name(Builtin b) noexcept {
  for (auto [n, x] : kBuiltins) {
    if (x == b) return n;
  }
  return "?";
}

std::string_view binary_op_text(BinaryOp op) noexcept {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

bool is_comparison(BinaryOp op) noexcept {
  switch (op) {
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge:
      return true;
    default:
      return false;
  }
}

std::optional<ParamType> param_type_from_name(std::string_view name) noexcept {
  for (auto [n, t] : kParamTypes) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::string_view param_type_name(ParamType t) noexcept {
  for (auto [n, x] : kParamTypes) {
    if (x == t) return n;
  }
  return "?";
}

ValueKind value_kind_of(ParamType t) noexcept {
  switch (t) {
    case ParamType::Int: return ValueKind::Int;
    case ParamType::Float: return ValueKind::Float;
    case ParamType::Bool: return ValueKind::Bool;
    case ParamType::Str: return ValueKind::Str;
    case ParamType::List: return ValueKind::List;
    case ParamType::Record: return ValueKind::Record;
    case ParamType::File: return ValueKind::File;
  }
  return ValueKind::Null;
}

const FunctionDecl* ModuleAst::find(std::string_view fn) const {
  for (const auto& f : functions) {
    if (f->name == fn) return f.get();
  }
  return nullptr;
}

}  // namespace vexploit

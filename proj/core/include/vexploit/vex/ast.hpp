#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vexploit/vex/source.hpp"
#include "vexploit/vex/value.hpp"

namespace vexploit {

struct FunctionDecl;

enum class ExprKind { Literal, Var, Field, Index, Unary, Binary, Call, ListLit, RecordLit };
enum class CallKind { Local, Qualified, Builtin };
enum class UnaryOp { Neg, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

enum class Builtin {
  Len,
  Substr,
  Concat,
  Contains,
  StartsWith,
  ToInt,
  ToStr,
  ToFloat,
  CharAt,
  Open,
  ReadFile,
  NetSend,
  SqlExec,
  Log,
};

std::optional<Builtin> builtin_from_name(std::string_view name) noexcept;
std::string_view builtin_name(Builtin b) noexcept;
std::string_view binary_op_text(BinaryOp op) noexcept;
bool is_comparison(BinaryOp op) noexcept;

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;

struct Expr {
  ExprKind kind = ExprKind::Literal;
  SourceLoc loc;

  Value literal;                 // Literal
  std::string name;              // Var, Field, callee function or builtin name
  std::string module;            // qualified call target module
  CallKind call_kind = CallKind::Local;
  UnaryOp unary_op = UnaryOp::Neg;
  BinaryOp binary_op = BinaryOp::Add;
  std::vector<ExprPtr> operands;  // sub-expressions / call arguments / list items / record values
  std::vector<std::string> keys;  // RecordLit field names

  // Filled in by linking.
  int slot = -1;
  const FunctionDecl* target = nullptr;
  Builtin builtin = Builtin::Len;
  int call_site = -1;
};

enum class StmtKind { Let, Assign, If, While, Return, Throw, Try, ExprStmt };

struct Stmt {
  StmtKind kind = StmtKind::ExprStmt;
  SourceLoc loc;

  std::string name;                // Let target, catch variable
  ExprPtr target;                  // Assign lvalue
  ExprPtr expr;                    // value, condition, returned or thrown expression
  std::vector<StmtPtr> body;       // then-branch, loop body, try body
  std::vector<StmtPtr> else_body;  // else-branch, catch handler
  bool has_else = false;

  // Filled in by linking.
  int slot = -1;
  int branch_site = -1;
};

enum class ParamType { Int, Float, Bool, Str, List, Record, File };

std::optional<ParamType> param_type_from_name(std::string_view name) noexcept;
std::string_view param_type_name(ParamType t) noexcept;
ValueKind value_kind_of(ParamType t) noexcept;

struct Param {
  std::string name;
  std::optional<ParamType> type;
  SourceLoc loc;
};

struct FunctionDecl {
  std::string name;
  bool is_public = false;
  std::vector<Param> params;
  std::vector<StmtPtr> body;
  SourceLoc loc;

  // Filled in by linking.
  QualifiedName qname;
  int index = -1;
  int slot_count = 0;
};

struct ModuleAst {
  std::string name;
  std::string origin;
  std::vector<std::unique_ptr<FunctionDecl>> functions;

  const FunctionDecl* find(std::string_view fn) const;
};

}  // namespace vexploit

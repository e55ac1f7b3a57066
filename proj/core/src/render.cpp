#include <cmath>
#include <sstream>

#include "vexploit/vex/parser.hpp"

namespace vexploit {

namespace {

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary:
      switch (e.binary_op) {
        case BinaryOp::Or: return 1;
        case BinaryOp::And: return 2;
        case BinaryOp::Eq:
        case BinaryOp::Ne: return 3;
        case BinaryOp::Lt:
        case BinaryOp::Le:
        case BinaryOp::Gt:
        case BinaryOp::Ge: return 4;
        case BinaryOp::Add:
        case BinaryOp::Sub: return 5;
        default: return 6;
      }
    case ExprKind::Unary: return 7;
    case ExprKind::Literal:
      // A negative number literal behaves like a unary expression.
      if ((e.literal.is(ValueKind::Int) && e.literal.as_int() < 0) ||
          (e.literal.is(ValueKind::Float) && std::signbit(e.literal.as_float())) ||
          (e.literal.is(ValueKind::Float) && std::isnan(e.literal.as_float()))) {
        return 7;
      }
      return 9;
    default: return 9;
  }
}

void render_into(std::string& out, const Expr& e);

void render_child(std::string& out, const Expr& child, int min_prec) {
  if (precedence(child) < min_prec) {
    out += '(';
    render_into(out, child);
    out += ')';
  } else {
    render_into(out, child);
  }
}

void render_args(std::string& out, const Expr& call) {
  out += '(';
  for (std::size_t i = 0; i < call.operands.size(); ++i) {
    if (i) out += ", ";
    render_into(out, *call.operands[i]);
  }
  out += ')';
}

void render_into(std::string& out, const Expr& e) {
  switch (e.kind) {
    case ExprKind::Literal:
      out += render_literal(e.literal);
      break;
    case ExprKind::Var:
      out += e.name;
      break;
    case ExprKind::Field:
      render_child(out, *e.operands[0], 8);
      out += '.';
      out += e.name;
      break;
    case ExprKind::Index:
      render_child(out, *e.operands[0], 8);
      out += '[';
      render_into(out, *e.operands[1]);
      out += ']';
      break;
    case ExprKind::Unary:
      out += e.unary_op == UnaryOp::Neg ? "-" : "not ";
      render_child(out, *e.operands[0], 7);
      break;
    case ExprKind::Binary: {
      int p = precedence(e);
      render_child(out, *e.operands[0], p);
      out += ' ';
      out += binary_op_text(e.binary_op);
      out += ' ';
      render_child(out, *e.operands[1], p + 1);
      break;
    }
    case ExprKind::Call:
      if (e.call_kind == CallKind::Builtin) {
        out += '@';
      } else if (e.call_kind == CallKind::Qualified) {
        out += e.module;
        out += "::";
      }
      out += e.name;
      render_args(out, e);
      break;
    case ExprKind::ListLit:
      out += '[';
      for (std::size_t i = 0; i < e.operands.size(); ++i) {
        if (i) out += ", ";
        render_into(out, *e.operands[i]);
      }
      out += ']';
      break;
    case ExprKind::RecordLit:
      out += '{';
      for (std::size_t i = 0; i < e.keys.size(); ++i) {
        if (i) out += ", ";
        if (is_identifier(e.keys[i]) && !is_keyword(e.keys[i])) {
          out += e.keys[i];
        } else {
          out += render_literal(Value::string(e.keys[i]));
        }
        out += ": ";
        render_into(out, *e.operands[i]);
      }
      out += '}';
      break;
  }
}

void render_block(std::string& out, const std::vector<StmtPtr>& body, int indent);

void render_stmt(std::string& out, const Stmt& s, int indent) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  switch (s.kind) {
    case StmtKind::Let:
      out += pad + "let " + s.name + " = " + render_expr(*s.expr) + ";\n";
      return;
    case StmtKind::Assign:
      out += pad + render_expr(*s.target) + " = " + render_expr(*s.expr) + ";\n";
      return;
    case StmtKind::If: {
      out += pad;
      const Stmt* cur = &s;
      for (;;) {
        out += "if " + render_expr(*cur->expr) + " ";
        render_block(out, cur->body, indent);
        if (!cur->has_else) break;
        out += " else ";
        if (cur->else_body.size() == 1 && cur->else_body[0]->kind == StmtKind::If) {
          cur = cur->else_body[0].get();
          continue;
        }
        render_block(out, cur->else_body, indent);
        break;
      }
      out += '\n';
      return;
    }
    case StmtKind::While:
      out += pad + "while " + render_expr(*s.expr) + " ";
      render_block(out, s.body, indent);
      out += '\n';
      return;
    case StmtKind::Return:
      out += pad + "return";
      if (s.expr) out += " " + render_expr(*s.expr);
      out += ";\n";
      return;
    case StmtKind::Throw:
      out += pad + "throw " + render_expr(*s.expr) + ";\n";
      return;
    case StmtKind::Try:
      out += pad + "try ";
      render_block(out, s.body, indent);
      out += " catch " + s.name + " ";
      render_block(out, s.else_body, indent);
      out += '\n';
      return;
    case StmtKind::ExprStmt:
      out += pad + render_expr(*s.expr) + ";\n";
      return;
  }
}

void render_block(std::string& out, const std::vector<StmtPtr>& body, int indent) {
  out += "{\n";
  for (const auto& s : body) render_stmt(out, *s, indent + 1);
  out += std::string(static_cast<std::size_t>(indent) * 2, ' ') + "}";
}

class Dumper {
 public:
  explicit Dumper(bool positions) : positions_(positions) {}

  std::string module(const ModuleAst& m) {
    out_ << "(module " << m.name;
    for (const auto& fn : m.functions) {
      out_ << "\n  (fn " << fn->name << (fn->is_public ? " pub" : "");
      loc(fn->loc);
      out_ << " (params";
      for (const auto& p : fn->params) {
        out_ << " (" << p.name;
        if (p.type) out_ << ' ' << param_type_name(*p.type);
        out_ << ')';
      }
      out_ << ')';
      block(fn->body);
      out_ << ')';
    }
    out_ << ")\n";
    return out_.str();
  }

 private:
  void loc(SourceLoc l) {
    if (positions_) out_ << " @" << l.line << ':' << l.column;
  }

  void block(const std::vector<StmtPtr>& body) {
    out_ << " (block";
    for (const auto& s : body) stmt(*s);
    out_ << ')';
  }

  void stmt(const Stmt& s) {
    static const char* names[] = {"let", "assign", "if", "while", "return", "throw", "try", "expr"};
    out_ << " (" << names[static_cast<int>(s.kind)];
    loc(s.loc);
    if (!s.name.empty()) out_ << ' ' << s.name;
    if (s.target) expr(*s.target);
    if (s.expr) expr(*s.expr);
    if (s.kind == StmtKind::If || s.kind == StmtKind::While || s.kind == StmtKind::Try) block(s.body);
    if (s.has_else || s.kind == StmtKind::Try) block(s.else_body);
    out_ << ')';
  }

  void expr(const Expr& e) {
    static const char* names[] = {"lit", "var", "field", "index", "unary", "binary", "call", "list", "record"};
    out_ << " (" << names[static_cast<int>(e.kind)];
    loc(e.loc);
    switch (e.kind) {
      case ExprKind::Literal: out_ << ' ' << kind_name(e.literal.kind()) << ' ' << render_literal(e.literal); break;
      case ExprKind::Var:
      case ExprKind::Field: out_ << ' ' << e.name; break;
      case ExprKind::Unary: out_ << (e.unary_op == UnaryOp::Neg ? " -" : " not"); break;
      case ExprKind::Binary: out_ << ' ' << binary_op_text(e.binary_op); break;
      case ExprKind::Call:
        out_ << ' ' << (e.call_kind == CallKind::Builtin ? "@" : "") << (e.module.empty() ? "" : e.module + "::")
             << e.name;
        break;
      case ExprKind::RecordLit:
        for (const auto& k : e.keys) out_ << ' ' << render_literal(Value::string(k));
        break;
      default: break;
    }
    for (const auto& op : e.operands) expr(*op);
    out_ << ')';
  }

  bool positions_;
  std::ostringstream out_;
};

}  // namespace

std::string render_expr(const Expr& expr) {
  std::string out;
  render_into(out, expr);
  return out;
}

std::string render_function(const FunctionDecl& fn) {
  std::string out;
  if (fn.is_public) out += "pub ";
  out += "fn " + fn.name + "(";
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    if (i) out += ", ";
    out += fn.params[i].name;
    if (fn.params[i].type) {
      out += ": ";
      out += param_type_name(*fn.params[i].type);
    }
  }
  out += ") ";
  render_block(out, fn.body, 0);
  out += '\n';
  return out;
}

std::string render_module(const ModuleAst& module) {
  std::string out;
  for (std::size_t i = 0; i < module.functions.size(); ++i) {
    if (i) out += '\n';
    out += render_function(*module.functions[i]);
  }
  return out;
}

std::string dump_module(const ModuleAst& module, bool with_positions) {
  return Dumper(with_positions).module(module);
}

}  // namespace vexploit

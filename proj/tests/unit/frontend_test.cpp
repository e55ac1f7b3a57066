#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "vexploit/vex/parser.hpp"
#include "vexploit/vex/program.hpp"

namespace vexploit {
namespace {

SourceUnit unit(std::string name, std::string text) { return {std::move(name), std::move(text), name + ".vex"}; }

ModuleAst parse_ok(const std::string& text, const std::string& name = "m") {
  auto r = parse_module(unit(name, text));
  EXPECT_TRUE(r.ok()) << format_diagnostics(r.diagnostics);
  return std::move(*r.module);
}

TEST(Parser, MinimalPublicFunction) {
  auto m = parse_ok("pub fn f(x) { return x; }");
  ASSERT_EQ(m.functions.size(), 1u);
  EXPECT_EQ(m.functions[0]->name, "f");
  EXPECT_TRUE(m.functions[0]->is_public);
  EXPECT_EQ(m.functions[0]->params.size(), 1u);
}

TEST(Parser, PrivateFunctionWithBuiltinCall) {
  auto m = parse_ok(R"(fn g() { let a = @concat("a","b"); return a; })");
  ASSERT_EQ(m.functions.size(), 1u);
  EXPECT_FALSE(m.functions[0]->is_public);
  const Stmt& let = *m.functions[0]->body[0];
  ASSERT_EQ(let.kind, StmtKind::Let);
  EXPECT_EQ(let.expr->kind, ExprKind::Call);
  EXPECT_EQ(let.expr->call_kind, CallKind::Builtin);
  EXPECT_EQ(let.expr->builtin, Builtin::Concat);
}

TEST(Parser, SyntaxErrorPointsAtOffendingToken) {
  auto r = parse_module(unit("m", "pub fn h( { }"));
  EXPECT_FALSE(r.module.has_value());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].loc.line, 1u);
  EXPECT_EQ(r.diagnostics[0].loc.column, 11u);
}

TEST(Parser, DuplicateFunctionAndParameterNames) {
  auto r = parse_module(unit("m", "fn a() {} fn a() {}"));
  EXPECT_FALSE(r.ok());
  r = parse_module(unit("m", "fn b(x, x) {}"));
  EXPECT_FALSE(r.ok());
}

TEST(Parser, TypeAnnotations) {
  auto m = parse_ok("pub fn f(a: int, b: str, c, d: file) {}");
  const auto& ps = m.functions[0]->params;
  EXPECT_EQ(ps[0].type, ParamType::Int);
  EXPECT_EQ(ps[1].type, ParamType::Str);
  EXPECT_FALSE(ps[2].type.has_value());
  EXPECT_EQ(ps[3].type, ParamType::File);
  EXPECT_FALSE(parse_module(unit("m", "fn f(a: widget) {}")).ok());
}

TEST(Parser, CallsCarrySourcePositions) {
  auto m = parse_ok("fn f() {\n  return lib::g(@len(\"x\"));\n}");
  const Expr& call = *m.functions[0]->body[0]->expr;
  EXPECT_EQ(call.call_kind, CallKind::Qualified);
  EXPECT_EQ(call.module, "lib");
  EXPECT_EQ(call.loc.line, 2u);
  EXPECT_EQ(call.loc.column, 10u);
  EXPECT_EQ(call.operands[0]->loc.column, 17u);
}

TEST(Parser, PrecedenceAndNegativeLiterals) {
  auto m = parse_ok("fn f(a, b) { return -1 + a * b == 3 or not a and b; }");
  EXPECT_EQ(render_expr(*m.functions[0]->body[0]->expr), "-1 + a * b == 3 or not a and b");
  auto m2 = parse_ok("fn f(a) { return (a + 1) * -(a - 2); }");
  EXPECT_EQ(render_expr(*m2.functions[0]->body[0]->expr), "(a + 1) * -(a - 2)");
}

TEST(Parser, LiteralParsing) {
  EXPECT_EQ(parse_literal("42"), Value::integer(42));
  EXPECT_EQ(parse_literal("-9223372036854775808"), Value::integer(INT64_MIN));
  EXPECT_EQ(parse_literal("\"a\\\"b\\x01\""), Value::string(std::string("a\"b\x01")));
  EXPECT_EQ(parse_literal("[1, {a: null, \"@type\": true}]"),
            Value::list({Value::integer(1), Value::record({{"a", Value()}, {"@type", Value::boolean(true)}})}));
  EXPECT_FALSE(parse_literal("x + 1").has_value());
  auto f = parse_literal("@open(\"data/x.txt\")", "/sb");
  ASSERT_TRUE(f.has_value());
  ASSERT_TRUE(f->is(ValueKind::File));
  EXPECT_EQ(f->as_file().path, "data/x.txt");
}

const char* kRich = R"(# sample
pub fn run(input: str, n) {
  let out = [];
  let i = 0;
  while i < n {
    if @starts_with(input, "x") {
      out[0] = {"@type": "A", val: input.name[i]};
    } else if i % 2 == 0 {
      throw "even";
    } else {
      i = i + 1;
    }
    i = i + 1;
  }
  try {
    helper(out, 1.5e300, -0.25);
  } catch err {
    @log(err);
  }
  return null;
}

fn helper(a, b, c) {
  return a;
}
)";

TEST(Parser, RenderRoundTrip) {
  auto m = parse_ok(kRich);
  std::string once = render_module(m);
  auto again = parse_ok(once);
  EXPECT_EQ(dump_module(m, false), dump_module(again, false));
  EXPECT_EQ(render_module(again), once);
}

TEST(Parser, ParsingIsPure) {
  EXPECT_EQ(dump_module(parse_ok(kRich), true), dump_module(parse_ok(kRich), true));
}

// Random expression trees survive render -> parse -> render.
class ExprGen {
 public:
  explicit ExprGen(unsigned seed) : rng_(seed) {}

  std::string expr(int depth) {
    int pick = static_cast<int>(rng_() % (depth <= 0 ? 4 : 9));
    switch (pick) {
      case 0: return std::to_string(static_cast<int>(rng_() % 200) - 100);
      case 1: return "\"s" + std::to_string(rng_() % 10) + "\\n\"";
      case 2: return rng_() % 2 ? "a" : "b";
      case 3: return std::to_string(rng_() % 50) + ".25";
      case 4: {
        static const char* ops[] = {"+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "and", "or"};
        return expr(depth - 1) + " " + ops[rng_() % 13] + " " + expr(depth - 1);
      }
      case 5: return (rng_() % 2 ? "-(" : "not (") + expr(depth - 1) + ")";
      case 6: return "(" + expr(depth - 1) + ")";
      case 7: return "@concat(" + expr(depth - 1) + ", " + expr(depth - 1) + ")";
      default: return "[" + expr(depth - 1) + ", {k: " + expr(depth - 1) + "}][0].k";
    }
  }

 private:
  std::mt19937 rng_;
};

TEST(Parser, RandomExpressionRoundTrip) {
  ExprGen gen(7);
  for (int i = 0; i < 500; ++i) {
    std::string src = "fn f(a, b) { return " + gen.expr(4) + "; }";
    auto m = parse_ok(src);
    auto m2 = parse_ok(render_module(m));
    ASSERT_EQ(dump_module(m, false), dump_module(m2, false)) << src;
  }
}

TEST(Parser, FloatLiteralsRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    double d = std::ldexp(static_cast<double>(rng() >> 11), static_cast<int>(rng() % 200) - 100);
    auto v = parse_literal(render_literal(Value::real(d)));
    ASSERT_TRUE(v.has_value());
    ASSERT_EQ(v->as_float(), d);
  }
}

TEST(Linker, ResolvesSameModuleThenQualified) {
  auto p = link_sources({{unit("app", "pub fn main(x) { return minijson::parse(x); }"), ModuleRole::Project},
                         {unit("minijson", "pub fn parse(s) { return helper(s); } fn helper(s) { return s; }"),
                          ModuleRole::Library}});
  const FunctionDecl* main = p.find({"app", "main"});
  ASSERT_NE(main, nullptr);
  const Expr& call = *main->body[0]->expr;
  ASSERT_NE(call.target, nullptr);
  EXPECT_EQ(call.target->qname.str(), "minijson::parse");
  ASSERT_EQ(p.call_sites().size(), 2u);
  EXPECT_EQ(p.call_sites()[1].callee.str(), "minijson::helper");
  EXPECT_EQ(p.role_of(*main), ModuleRole::Project);
}

std::string link_error(std::vector<std::pair<SourceUnit, ModuleRole>> srcs) {
  try {
    link_sources(srcs);
  } catch (const DiagnosticError& e) {
    return e.what();
  }
  return {};
}

TEST(Linker, UnresolvedCallNamesTheCallSite) {
  auto msg = link_error({{unit("app", "pub fn f() {\n  nosuch::fn1();\n}"), ModuleRole::Project}});
  EXPECT_NE(msg.find("nosuch::fn1"), std::string::npos);
  EXPECT_NE(msg.find("2:3"), std::string::npos) << msg;
}

TEST(Linker, ModuleCollision) {
  auto msg = link_error({{unit("util", "fn a() {}"), ModuleRole::Project}, {unit("util", "fn b() {}"), ModuleRole::Library}});
  EXPECT_NE(msg.find("collision"), std::string::npos);
}

TEST(Linker, PrivateArityAndVariableChecks) {
  EXPECT_NE(link_error({{unit("a", "fn f() { b::g(); }"), ModuleRole::Project}, {unit("b", "fn g() {}"), ModuleRole::Library}})
                .find("private"),
            std::string::npos);
  EXPECT_NE(link_error({{unit("a", "fn f() { f(1); }"), ModuleRole::Project}}).find("argument"), std::string::npos);
  EXPECT_NE(link_error({{unit("a", "fn f() { return y; }"), ModuleRole::Project}}).find("unknown variable"),
            std::string::npos);
  EXPECT_NE(link_error({{unit("a", "fn f() { return @len(1, 2); }"), ModuleRole::Project}}).find("@len"),
            std::string::npos);
}

TEST(Linker, ResolveProjectFromDirectories) {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "vexploit_frontend_test";
  fs::remove_all(root);
  fs::create_directories(root / "proj/src");
  fs::create_directories(root / "proj/tests");
  fs::create_directories(root / "lib");
  std::ofstream(root / "proj/src/app.vex") << "pub fn api(x) { return minijson::parse(x); }\n";
  std::ofstream(root / "proj/tests/app_test.vex") << "pub fn t() { app::api(\"1\"); }\n";
  std::ofstream(root / "lib/minijson.vex") << "pub fn parse(s) { return s; }\n";
  auto p = resolve_project(root / "proj", {root / "lib"});
  EXPECT_EQ(p.role_of(*p.find({"app_test", "t"})), ModuleRole::Test);
  EXPECT_EQ(p.role_of(*p.find({"minijson", "parse"})), ModuleRole::Library);
  fs::remove_all(root);
}

}  // namespace
}  // namespace vexploit

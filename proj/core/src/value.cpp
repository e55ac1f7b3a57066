#include "vexploit/vex/value.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vexploit/vex/source.hpp"

namespace vexploit {

std::string_view kind_name(ValueKind kind) noexcept {
  switch (kind) {
    case ValueKind::Null: return "null";
    case ValueKind::Bool: return "bool";
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::Str: return "str";
    case ValueKind::List: return "list";
    case ValueKind::Record: return "record";
    case ValueKind::File: return "file";
  }
  return "?";
}

std::string FileRef::read() const {
  std::ifstream in(absolute(), std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read file " + absolute().string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Value Value::boolean(bool b) {
  Value v;
  v.data_ = b;
  return v;
}

Value Value::integer(std::int64_t i) {
  Value v;
  v.data_ = i;
  return v;
}

Value Value::real(double d) {
  Value v;
  v.data_ = d;
  return v;
}

Value Value::string(std::string s) {
  Value v;
  v.data_ = std::make_shared<const std::string>(std::move(s));
  return v;
}

Value Value::list(List items) {
  Value v;
  v.data_ = std::make_shared<List>(std::move(items));
  return v;
}

Value Value::record(Record fields) {
  Value v;
  v.data_ = std::make_shared<Record>(std::move(fields));
  return v;
}

Value Value::file(FileRef ref) {
  Value v;
  v.data_ = std::move(ref);
  return v;
}

double Value::as_number() const {
  if (is(ValueKind::Int)) return static_cast<double>(as_int());
  return as_float();
}

std::string& Value::mutable_str() {
  auto& p = std::get<StrPtr>(data_);
  if (p.use_count() != 1) {
    p = std::make_shared<const std::string>(*p);
  }
  return const_cast<std::string&>(*p);
}

List& Value::mutable_list() {
  auto& p = std::get<ListPtr>(data_);
  if (p.use_count() != 1) p = std::make_shared<List>(*p);
  return *p;
}

Record& Value::mutable_record() {
  auto& p = std::get<RecordPtr>(data_);
  if (p.use_count() != 1) p = std::make_shared<Record>(*p);
  return *p;
}

const Value* Value::field(std::string_view name) const {
  for (const auto& [k, v] : as_record()) {
    if (k == name) return &v;
  }
  return nullptr;
}

void Value::set_field(std::string_view name, Value v) {
  auto& rec = mutable_record();
  for (auto& [k, existing] : rec) {
    if (k == name) {
      existing = std::move(v);
      return;
    }
  }
  rec.emplace_back(std::string(name), std::move(v));
}

bool operator==(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ValueKind::Null: return true;
    case ValueKind::Bool: return a.as_bool() == b.as_bool();
    case ValueKind::Int: return a.as_int() == b.as_int();
    case ValueKind::Float: {
      double x = a.as_float(), y = b.as_float();
      return x == y || (std::isnan(x) && std::isnan(y));
    }
    case ValueKind::Str: return a.as_str() == b.as_str();
    case ValueKind::List: return a.as_list() == b.as_list();
    case ValueKind::Record: return a.as_record() == b.as_record();
    case ValueKind::File: return a.as_file() == b.as_file();
  }
  return false;
}

std::string render_float(double d) {
  if (std::isnan(d)) return "(0.0 / 0.0)";
  if (std::isinf(d)) return d > 0 ? "1e999" : "-1e999";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

void render_string_literal(std::string& out, std::string_view s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          static const char* hex = "0123456789abcdef";
          out += "\\x";
          out += hex[c >> 4];
          out += hex[c & 0xf];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void render_into(std::string& out, const Value& v) {
  switch (v.kind()) {
    case ValueKind::Null: out += "null"; break;
    case ValueKind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case ValueKind::Int:
      out += std::to_string(v.as_int());
      break;
    case ValueKind::Float: out += render_float(v.as_float()); break;
    case ValueKind::Str: render_string_literal(out, v.as_str()); break;
    case ValueKind::List: {
      out += '[';
      bool first = true;
      for (const auto& item : v.as_list()) {
        if (!first) out += ", ";
        first = false;
        render_into(out, item);
      }
      out += ']';
      break;
    }
    case ValueKind::Record: {
      out += '{';
      bool first = true;
      for (const auto& [k, item] : v.as_record()) {
        if (!first) out += ", ";
        first = false;
        if (is_identifier(k) && !is_keyword(k)) {
          out += k;
        } else {
          render_string_literal(out, k);
        }
        out += ": ";
        render_into(out, item);
      }
      out += '}';
      break;
    }
    case ValueKind::File:
      out += "@open(";
      render_string_literal(out, v.as_file().path);
      out += ')';
      break;
  }
}

}  // namespace

std::string render_literal(const Value& v) {
  std::string out;
  render_into(out, v);
  return out;
}

std::string display(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Str: return v.as_str();
    case ValueKind::File: return v.as_file().path;
    case ValueKind::Float: {
      if (std::isnan(v.as_float())) return "nan";
      if (std::isinf(v.as_float())) return v.as_float() > 0 ? "inf" : "-inf";
      return render_float(v.as_float());
    }
    default: return render_literal(v);
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vexploit

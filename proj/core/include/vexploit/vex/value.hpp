#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace vexploit {

enum class ValueKind { Null, Bool, Int, Float, Str, List, Record, File };

std::string_view kind_name(ValueKind kind) noexcept;

/// A file inside a sandbox. `path` is relative to `root` and already normalized.
struct FileRef {
  std::string root;
  std::string path;

  std::filesystem::path absolute() const { return std::filesystem::path(root) / path; }

  /// Reads the whole file. Throws std::runtime_error when unreadable.
  std::string read() const;

  bool operator==(const FileRef& other) const { return path == other.path && root == other.root; }
};

class Value;
using List = std::vector<Value>;
using Field = std::pair<std::string, Value>;
/// Insertion-ordered; field names unique.
using Record = std::vector<Field>;

/// Dynamically typed Vex datum. Strings, lists and records are shared and
/// copied on write, so copying a Value is cheap.
class Value {
 public:
  Value() = default;

  static Value null() { return Value(); }
  static Value boolean(bool b);
  static Value integer(std::int64_t i);
  static Value real(double d);
  static Value string(std::string s);
  static Value list(List items);
  static Value record(Record fields);
  static Value file(FileRef ref);

  ValueKind kind() const noexcept { return static_cast<ValueKind>(data_.index()); }
  bool is(ValueKind k) const noexcept { return kind() == k; }
  bool is_number() const noexcept { return is(ValueKind::Int) || is(ValueKind::Float); }

  bool as_bool() const { return std::get<bool>(data_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_float() const { return std::get<double>(data_); }
  /// Int or Float widened to double.
  double as_number() const;
  const std::string& as_str() const { return *std::get<StrPtr>(data_); }
  const List& as_list() const { return *std::get<ListPtr>(data_); }
  const Record& as_record() const { return *std::get<RecordPtr>(data_); }
  const FileRef& as_file() const { return std::get<FileRef>(data_); }

  /// Mutable access; clones the payload first when it is shared.
  std::string& mutable_str();
  List& mutable_list();
  Record& mutable_record();

  const Value* field(std::string_view name) const;
  void set_field(std::string_view name, Value v);

  /// Strict structural equality: kinds must match, floats compare by value.
  friend bool operator==(const Value& a, const Value& b);

 private:
  using StrPtr = std::shared_ptr<const std::string>;
  using ListPtr = std::shared_ptr<List>;
  using RecordPtr = std::shared_ptr<Record>;

  std::variant<std::monostate, bool, std::int64_t, double, StrPtr, ListPtr, RecordPtr, FileRef> data_;
};

/// Canonical source rendering; re-parses to an equal value (FileRefs render as
/// `@open("path")` and re-parse as a call, not a literal).
std::string render_literal(const Value& v);

/// Shortest round-tripping float text, always containing '.' or an exponent.
std::string render_float(double d);

/// Display form used by @to_str and string concatenation: strings are raw.
std::string display(const Value& v);

/// 64-bit FNV-1a, used for stable content identifiers.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ull);

}  // namespace vexploit

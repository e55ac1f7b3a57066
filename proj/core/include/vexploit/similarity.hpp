#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vexploit/vex/value.hpp"

namespace vexploit {

/// Decodes UTF-8 into scalar values. Bytes that are not part of a valid
/// sequence map to U+DC80..U+DCFF so distinct inputs stay distinct.
std::u32string decode_scalars(std::string_view utf8);

/// Unit-cost edit distance over Unicode scalar values.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// 1 - levenshtein / max length; 1 for two empty strings.
double string_similarity(std::string_view a, std::string_view b);

/// 1 when equal (floats within 1e-9 relative), else 0. Int and Float compare
/// numerically; any other kind mix scores 0.
double number_similarity(const Value& a, const Value& b);

/// Mean over the expected record's fields; fields missing from `actual` score 0.
double object_similarity(const Record& actual, const Record& expected);

/// Mean element similarity over the shorter list, scaled by min/max length.
double list_similarity(const List& actual, const List& expected);

/// Compares against the file materialized as {content, size}. Throws
/// std::runtime_error when the expected file cannot be read.
double file_similarity(const Value& actual, const FileRef& expected);

/// Type-directed similarity in [0, 1], dispatching on `expected`'s kind.
double similarity(const Value& actual, const Value& expected);

/// {content: Str, size: Int} view of a file.
Record materialize_file(const FileRef& file);

}  // namespace vexploit

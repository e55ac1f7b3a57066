#include "vexploit/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace vexploit {

std::u32string decode_scalars(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto cont = [&](std::size_t k) { return k < s.size() && (static_cast<unsigned char>(s[k]) & 0xC0) == 0x80; };
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
      cp = (char32_t(b0 & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
      len = cp >= 0x80 ? 2 : 0;
    } else if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
      cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
           (static_cast<unsigned char>(s[i + 2]) & 0x3F);
      len = (cp >= 0x800 && (cp < 0xD800 || cp > 0xDFFF)) ? 3 : 0;
    } else if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
      cp = (char32_t(b0 & 0x07) << 18) | (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
           (char32_t(static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) | (static_cast<unsigned char>(s[i + 3]) & 0x3F);
      len = (cp >= 0x10000 && cp <= 0x10FFFF) ? 4 : 0;
    }
    if (len == 0) {
      out.push_back(0xDC00 + b0);
      ++i;
    } else {
      out.push_back(cp);
      i += len;
    }
  }
  return out;
}

namespace {

// Pattern bitmasks for the bit-parallel algorithm, one 64-bit word per block.
class PatternMasks {
 public:
  PatternMasks(std::u32string_view p, std::size_t words) : words_(words), ascii_(256 * words, 0) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::uint64_t bit = std::uint64_t{1} << (i % 64);
      std::size_t w = i / 64;
      if (p[i] < 256) {
        ascii_[p[i] * words_ + w] |= bit;
      } else {
        auto& v = other_[p[i]];
        if (v.empty()) v.assign(words_, 0);
        v[w] |= bit;
      }
    }
    zero_.assign(words_, 0);
  }

  const std::uint64_t* row(char32_t c) const {
    if (c < 256) return &ascii_[c * words_];
    auto it = other_.find(c);
    return it == other_.end() ? zero_.data() : it->second.data();
  }

 private:
  std::size_t words_;
  std::vector<std::uint64_t> ascii_;
  std::unordered_map<char32_t, std::vector<std::uint64_t>> other_;
  std::vector<std::uint64_t> zero_;
};

// Hyyrö's multi-word formulation of Myers' bit-vector edit distance.
std::size_t myers_block(std::u32string_view pattern, std::u32string_view text) {
  const std::size_t m = pattern.size();
  const std::size_t words = (m + 63) / 64;
  PatternMasks pm(pattern, words);
  std::vector<std::uint64_t> vp(words, ~std::uint64_t{0});
  std::vector<std::uint64_t> vn(words, 0);
  const std::uint64_t last = std::uint64_t{1} << ((m - 1) % 64);
  std::size_t score = m;

  for (char32_t c : text) {
    const std::uint64_t* row = pm.row(c);
    std::uint64_t hp_carry = 1;
    std::uint64_t hn_carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t pm_j = row[w];
      std::uint64_t v_p = vp[w];
      std::uint64_t v_n = vn[w];
      std::uint64_t x = pm_j | hn_carry;
      std::uint64_t d0 = (((x & v_p) + v_p) ^ v_p) | x | v_n;
      std::uint64_t hp = v_n | ~(d0 | v_p);
      std::uint64_t hn = d0 & v_p;
      if (w == words - 1) {
        if (hp & last) ++score;
        if (hn & last) --score;
      }
      std::uint64_t hp_out = hp >> 63;
      std::uint64_t hn_out = hn >> 63;
      hp = (hp << 1) | hp_carry;
      hn = (hn << 1) | hn_carry;
      hp_carry = hp_out;
      hn_carry = hn_out;
      vp[w] = hn | ~(d0 | hp);
      vn[w] = hp & d0;
    }
  }
  return score;
}

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  while (!a.empty() && !b.empty() && a.front() == b.front()) {
    a.remove_prefix(1);
    b.remove_prefix(1);
  }
  while (!a.empty() && !b.empty() && a.back() == b.back()) {
    a.remove_suffix(1);
    b.remove_suffix(1);
  }
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  if (a.size() > b.size()) std::swap(a, b);
  return myers_block(a, b);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (is_ascii(a) && is_ascii(b)) {
    std::u32string x(a.begin(), a.end());
    std::u32string y(b.begin(), b.end());
    return levenshtein(std::u32string_view(x), std::u32string_view(y));
  }
  std::u32string x = decode_scalars(a);
  std::u32string y = decode_scalars(b);
  return levenshtein(std::u32string_view(x), std::u32string_view(y));
}

double string_similarity(std::string_view a, std::string_view b) {
  if (a == b) return 1.0;
  std::u32string x = decode_scalars(a);
  std::u32string y = decode_scalars(b);
  std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  return clamp01(1.0 - static_cast<double>(levenshtein(std::u32string_view(x), std::u32string_view(y))) /
                           static_cast<double>(longest));
}

double number_similarity(const Value& a, const Value& b) {
  if (a.is(ValueKind::Bool) || b.is(ValueKind::Bool)) {
    return a.is(ValueKind::Bool) && b.is(ValueKind::Bool) && a.as_bool() == b.as_bool() ? 1.0 : 0.0;
  }
  if (!a.is_number() || !b.is_number()) return 0.0;
  if (a.is(ValueKind::Int) && b.is(ValueKind::Int)) return a.as_int() == b.as_int() ? 1.0 : 0.0;
  double x = a.as_number(), y = b.as_number();
  if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y) ? 1.0 : 0.0;
  if (x == y) return 1.0;
  double scale = std::max(std::fabs(x), std::fabs(y));
  return std::isfinite(scale) && std::fabs(x - y) <= 1e-9 * scale ? 1.0 : 0.0;
}

double object_similarity(const Record& actual, const Record& expected) {
  if (expected.empty()) return actual.empty() ? 1.0 : 0.0;
  double sum = 0;
  for (const auto& [name, want] : expected) {
    for (const auto& [k, got] : actual) {
      if (k == name) {
        sum += similarity(got, want);
        break;
      }
    }
  }
  return clamp01(sum / static_cast<double>(expected.size()));
}

double list_similarity(const List& actual, const List& expected) {
  if (actual.empty() && expected.empty()) return 1.0;
  std::size_t shorter = std::min(actual.size(), expected.size());
  std::size_t longer = std::max(actual.size(), expected.size());
  if (shorter == 0) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < shorter; ++i) sum += similarity(actual[i], expected[i]);
  return clamp01(sum / static_cast<double>(shorter) * static_cast<double>(shorter) / static_cast<double>(longer));
}

Record materialize_file(const FileRef& file) {
  std::string content = file.read();
  auto size = static_cast<std::int64_t>(content.size());
  return {{"content", Value::string(std::move(content))}, {"size", Value::integer(size)}};
}

double file_similarity(const Value& actual, const FileRef& expected) {
  Record want = materialize_file(expected);
  if (actual.is(ValueKind::Str)) return string_similarity(actual.as_str(), want[0].second.as_str());
  if (actual.is(ValueKind::File)) {
    if (actual.as_file() == expected) return 1.0;
    Record got;
    try {
      got = materialize_file(actual.as_file());
    } catch (const std::runtime_error&) {
      return 0.0;
    }
    return object_similarity(got, want);
  }
  return 0.0;
}

double similarity(const Value& actual, const Value& expected) {
  switch (expected.kind()) {
    case ValueKind::Null: return actual.is(ValueKind::Null) ? 1.0 : 0.0;
    case ValueKind::Bool:
    case ValueKind::Int:
    case ValueKind::Float: return number_similarity(actual, expected);
    case ValueKind::Str:
      if (actual.is(ValueKind::Str)) return string_similarity(actual.as_str(), expected.as_str());
      if (actual.is(ValueKind::File)) {
        try {
          return string_similarity(actual.as_file().read(), expected.as_str());
        } catch (const std::runtime_error&) {
          return 0.0;
        }
      }
      return 0.0;
    case ValueKind::Record:
      return actual.is(ValueKind::Record) ? object_similarity(actual.as_record(), expected.as_record()) : 0.0;
    case ValueKind::List:
      return actual.is(ValueKind::List) ? list_similarity(actual.as_list(), expected.as_list()) : 0.0;
    case ValueKind::File: return file_similarity(actual, expected.as_file());
  }
  return 0.0;
}

}  // namespace vexploit

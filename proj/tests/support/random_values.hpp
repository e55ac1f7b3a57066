#pragma once

#include <random>
#include <string>

#include "vexploit/vex/value.hpp"

namespace vexploit::testing {

/// Random Values over every kind except File, with a small alphabet so that
/// near-equal strings are common.
class RandomValues {
 public:
  explicit RandomValues(std::uint64_t seed) : rng_(seed) {}

  std::string str(std::size_t max_len = 8) {
    static const char alphabet[] = {'a', 'b', 'c', '{', '"', 'x'};
    std::string s(pick(max_len + 1), ' ');
    for (auto& c : s) c = alphabet[pick(sizeof(alphabet))];
    if (pick(10) == 0) s += "\xc3\xa9";  // a two-byte scalar now and then
    return s;
  }

  Value value(int depth = 2) {
    switch (pick(depth > 0 ? 8 : 6)) {
      case 0: return Value();
      case 1: return Value::boolean(pick(2) == 1);
      case 2: return Value::integer(static_cast<std::int64_t>(pick(21)) - 10);
      case 3: return Value::real(static_cast<double>(static_cast<std::int64_t>(pick(2001)) - 1000) / 8.0);
      case 4:
      case 5: return Value::string(str());
      case 6: {
        List items;
        for (std::size_t i = pick(4); i > 0; --i) items.push_back(value(depth - 1));
        return Value::list(std::move(items));
      }
      default: {
        Record fields;
        static const char* names[] = {"a", "b", "c", "d"};
        for (std::size_t i = pick(4); i > 0; --i) {
          std::string k = names[pick(4)];
          bool dup = false;
          for (const auto& f : fields) dup = dup || f.first == k;
          if (!dup) fields.emplace_back(k, value(depth - 1));
        }
        return Value::record(std::move(fields));
      }
    }
  }

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace vexploit::testing

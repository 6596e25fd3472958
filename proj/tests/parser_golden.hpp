#pragma once

#include "bsvie/expr.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace golden {

struct Case {
  const char* input;
  const char* printed;  // canonical form, or nullptr for an error
  bsvie::expr::ParseErrorKind kind = bsvie::expr::ParseErrorKind::lexical;
  std::size_t offset = 0;
};

using K = bsvie::expr::ParseErrorKind;

inline const std::vector<Case>& cases() {
  static const std::vector<Case> c = {
      {"t*s", "(t * s)"},
      {"-t*y/s^2", "(((-t) * y) / (s ^ 2))"},
      {"exp(0.1*(T - t))*w", "(exp((0.1 * (T - t))) * w)"},
      {"1 - 2 - 3", "((1 - 2) - 3)"},
      {"8 / 4 / 2", "((8 / 4) / 2)"},
      {"2^3^2", "(2 ^ (3 ^ 2))"},
      {"-t^2", "(-(t ^ 2))"},
      {"t + s * y", "(t + (s * y))"},
      {"2^-1", "(2 ^ (-1))"},
      {"min(t, max(s, y))", "min(t, max(s, y))"},
      {"t +", nullptr, K::unexpected_end, 3},
      {"(t + s", nullptr, K::unbalanced, 0},
      {"t + s)", nullptr, K::unbalanced, 5},
      {"foo(t)", nullptr, K::unknown_identifier, 0},
      {"exp(t, s)", nullptr, K::arity, 0},
      {"t $ s", nullptr, K::lexical, 2},
      {"1e", nullptr, K::lexical, 0},
      {"max(t)", nullptr, K::arity, 0},
      {"t s", nullptr, K::unexpected_token, 2},
      {"sin()", nullptr, K::unexpected_token, 4},
  };
  return c;
}

/// Empty when the case passes, else a description of the mismatch.
inline std::optional<std::string> check(const Case& c) {
  namespace ex = bsvie::expr;
  try {
    const ex::Expr e = ex::parse(c.input);
    const std::string got = ex::print(e);
    if (!c.printed) return "'" + std::string(c.input) + "' parsed as " + got + ", expected an error";
    if (got != c.printed) return "'" + std::string(c.input) + "' printed " + got + ", expected " + c.printed;
    if (!(ex::parse(got) == e)) return "'" + std::string(c.input) + "' does not reparse to the same tree";
  } catch (const ex::ParseError& err) {
    if (c.printed) return "'" + std::string(c.input) + "' failed: " + err.what();
    if (err.kind() != c.kind || err.offset() != c.offset) {
      return "'" + std::string(c.input) + "' gave kind " + std::to_string(static_cast<int>(err.kind())) +
             " at " + std::to_string(err.offset()) + ", expected kind " +
             std::to_string(static_cast<int>(c.kind)) + " at " + std::to_string(c.offset);
    }
  }
  return std::nullopt;
}

}  // namespace golden

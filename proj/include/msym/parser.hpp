#pragma once

#include <optional>
#include <string_view>

#include "msym/expression.hpp"

namespace msym {

/// Bundle dimensions used to range-check symbol indices while parsing.
struct SymbolRange {
  int m = 1;  // base dimension
  int n = 1;  // fiber dimension
};

/// Parses the expression grammar
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | power
///   power  := base ('^' exponent)?
///   base   := number | symbol | func '(' expr ')' | '(' expr ')'
///
/// The exponent is a signed number or a parenthesized constant expression
/// and must be rational. Unary minus binds looser than '^', so -x^2 is
/// -(x^2). Decimal and scientific literals are read as exact rationals.
///
/// Throws ParseError (with byte offset) on malformed text and SymbolError on
/// unknown identifiers or, when `range` is given, indices outside it.
Expression parse(std::string_view text, std::optional<SymbolRange> range = std::nullopt);

}  // namespace msym

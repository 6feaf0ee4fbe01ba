#include "msym/parser.hpp"

#include <cctype>
#include <string>

#include "msym/errors.hpp"

namespace msym {

namespace {

class Parser {
 public:
  Parser(std::string_view text, std::optional<SymbolRange> range) : text_(text), range_(range) {}

  Expression run() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Expression e = expr();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expression expr() {
    std::vector<Expression> terms{term()};
    for (;;) {
      if (accept('+')) {
        terms.push_back(term());
      } else if (accept('-')) {
        terms.push_back(-term());
      } else {
        break;
      }
    }
    return add(std::move(terms));
  }

  Expression term() {
    std::vector<Expression> factors{factor()};
    for (;;) {
      if (accept('*')) {
        factors.push_back(factor());
      } else if (accept('/')) {
        factors.push_back(pow(factor(), Rational(-1)));
      } else {
        break;
      }
    }
    return mul(std::move(factors));
  }

  Expression factor() {
    if (accept('-')) return -factor();
    return power();
  }

  Expression power() {
    Expression b = base();
    if (accept('^')) {
      skip_space();
      const std::size_t at = pos_;
      Rational e;
      if (accept('(')) {
        Expression ex = expr();
        expect(')');
        if (!ex.is_constant()) throw ParseError("exponent must be a rational constant", at);
        e = ex.value();
      } else {
        const bool neg = accept('-');
        skip_space();
        e = number();
        if (neg) e = -e;
      }
      return pow(b, e);
    }
    return b;
  }

  Expression base() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expression(number());
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Rational number() {
    const std::size_t start = pos_;
    Rational value(0);
    bool digits = false;
    try {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        value = value * Rational(10) + Rational(text_[pos_] - '0');
        ++pos_;
        digits = true;
      }
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        Rational scale(1, 10);
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          value = value + scale * Rational(text_[pos_] - '0');
          scale = scale * Rational(1, 10);
          ++pos_;
          digits = true;
        }
      }
      if (!digits) throw ParseError("expected a number", start);
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        bool neg = false;
        if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) {
          neg = text_[p] == '-';
          ++p;
        }
        if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
          std::int64_t ex = 0;
          while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
            ex = ex * 10 + (text_[p] - '0');
            if (ex > 18) throw ParseError("number exponent too large", start);
            ++p;
          }
          pos_ = p;
          value = value * Rational(10).pow(neg ? -ex : ex);
        }
      }
    } catch (const std::overflow_error&) {
      throw ParseError("number does not fit a 64-bit rational", start);
    }
    return value;
  }

  int index(std::size_t at) {
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      throw ParseError("expected an index", at);
    }
    int v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 1000000) throw ParseError("index too large", at);
      ++pos_;
    }
    return v;
  }

  // Parses "_<digits>" if present.
  bool sub_index(std::size_t at, int& out) {
    if (pos_ < text_.size() && text_[pos_] == '_') {
      ++pos_;
      out = index(at);
      return true;
    }
    return false;
  }

  void check_base(int nu, const std::string& name, std::size_t at) {
    if (nu < 1 || (range_ && nu > range_->m)) {
      throw SymbolError("index out of range in '" + name + "' at offset " + std::to_string(at));
    }
  }

  void check_field(int a, const std::string& name, std::size_t at) {
    if (a < 1 || (range_ && a > range_->n)) {
      throw SymbolError("index out of range in '" + name + "' at offset " + std::to_string(at));
    }
  }

  Expression identifier() {
    const std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end]))) ++end;
    const std::string word(text_.substr(start, end - start));

    static const std::pair<const char*, int> funcs[] = {{"sqrt", -1},
                                                         {"sin", static_cast<int>(Func::sin)},
                                                         {"cos", static_cast<int>(Func::cos)},
                                                         {"tan", static_cast<int>(Func::tan)},
                                                         {"exp", static_cast<int>(Func::exp)},
                                                         {"log", static_cast<int>(Func::log)}};
    for (const auto& [name, code] : funcs) {
      if (word == name) {
        pos_ = end;
        expect('(');
        Expression arg = expr();
        expect(')');
        if (code < 0) return sqrt(arg);
        return apply(static_cast<Func>(code), arg);
      }
    }

    if (word.size() != 1) throw SymbolError("unknown identifier '" + word + "' at offset " + std::to_string(start));
    const char head = word[0];
    pos_ = end;
    if (head == 'p' && (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))) {
      return Expression(Symbol::affine());
    }
    if (head != 'x' && head != 'y' && head != 'v' && head != 'p') {
      throw SymbolError("unknown identifier '" + word + "' at offset " + std::to_string(start));
    }
    const int first = index(start);
    int second = 0;
    int third = 0;
    const bool has_second = sub_index(start, second);
    const bool has_third = has_second && sub_index(start, third);
    // reject trailing identifier characters such as "x1a"
    if (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      throw SymbolError("unknown identifier '" + std::string(text_.substr(start, pos_ + 1 - start)) + "' at offset " +
                        std::to_string(start));
    }
    const std::string name(text_.substr(start, pos_ - start));
    switch (head) {
      case 'x':
        if (has_second) throw SymbolError("unknown identifier '" + name + "' at offset " + std::to_string(start));
        check_base(first, name, start);
        return Expression(Symbol::x(first));
      case 'y':
        check_field(first, name, start);
        if (!has_second) return Expression(Symbol::y(first));
        check_base(second, name, start);
        if (!has_third) return Expression(Symbol::dy(first, second));
        check_base(third, name, start);
        return Expression(Symbol::ddy(first, second, third));
      default:
        if (!has_second || has_third) {
          throw SymbolError("unknown identifier '" + name + "' at offset " + std::to_string(start));
        }
        check_field(first, name, start);
        check_base(second, name, start);
        return Expression(head == 'v' ? Symbol::v(first, second) : Symbol::p(first, second));
    }
  }

  std::string_view text_;
  std::optional<SymbolRange> range_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text, std::optional<SymbolRange> range) {
  return Parser(text, range).run();
}

}  // namespace msym

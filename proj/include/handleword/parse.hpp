#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "handleword/error.hpp"

namespace handleword::detail {

/// Character cursor over one line of input. Errors report 1-based line and
/// column of the current position.
struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 1;

  bool at_end() const { return pos >= text.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos + ahead < text.size() ? text[pos + ahead] : '\0';
  }

  void skip_ws() {
    while (!at_end() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
  }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  bool consume(std::string_view token) {
    skip_ws();
    if (text.substr(pos, token.size()) == token) {
      pos += token.size();
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  [[noreturn]] void fail(const std::string& msg, ErrorCode code = ErrorCode::SyntaxError) const {
    throw Error(code, "line " + std::to_string(line) + ", column " + std::to_string(pos + 1) +
                          ": " + msg);
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string identifier() {
    skip_ws();
    if (!ident_start(peek())) fail("expected identifier");
    std::size_t start = pos;
    while (ident_char(peek())) ++pos;
    return std::string(text.substr(start, pos - start));
  }

  /// Non-negative decimal literal; no leading sign.
  std::int64_t integer() {
    skip_ws();
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected integer");
    std::int64_t v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      int d = text[pos] - '0';
      if (v > (std::numeric_limits<std::int64_t>::max() - d) / 10) fail("integer literal too large");
      v = v * 10 + d;
      ++pos;
    }
    return v;
  }

  std::string_view rest() const { return text.substr(pos); }
};

}  // namespace handleword::detail

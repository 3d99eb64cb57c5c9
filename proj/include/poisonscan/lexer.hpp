#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace poisonscan {

enum class TokenKind {
  Identifier,
  Keyword,
  Number,
  String,
  Bool,
  None,
  Op,
};

struct Token {
  TokenKind kind;
  std::string text;  // canonical lexeme: strings single-quoted, placeholders bare (ID/STR/NUM)

  bool is_placeholder() const {
    return (kind == TokenKind::String && text == "STR") ||
           (kind == TokenKind::Number && text == "NUM") ||
           (kind == TokenKind::Identifier && text == "ID");
  }
};

bool is_python_keyword(std::string_view word);

/// Tokenizes one logical source line. Never fails: unknown characters
/// become single-character Op tokens.
std::vector<Token> lex(std::string_view line);

/// Class label used for token-class fallback keys: ID/STR/NUM/BOOL/NONE,
/// keywords and operators verbatim.
std::string token_class_label(const Token& tok);

}  // namespace poisonscan

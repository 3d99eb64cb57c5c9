#include "poisonscan/lexer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace poisonscan {

namespace {

const std::unordered_set<std::string_view>& keyword_set() {
  static const std::unordered_set<std::string_view> kw = {
      "False", "None",  "True",    "and",   "as",     "assert", "async",
      "await", "break", "class",   "continue", "def", "del",    "elif",
      "else",  "except", "finally", "for",   "from",   "global", "if",
      "import", "in",   "is",      "lambda", "nonlocal", "not",  "or",
      "pass",  "raise", "return",  "try",   "while",  "with",   "yield"};
  return kw;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

bool is_string_prefix(std::string_view s) {
  if (s.size() > 3) return false;
  for (char c : s) {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
  }
  return !s.empty();
}

// Multi-char operators, longest first.
constexpr std::array<std::string_view, 26> kMultiOps = {
    "**=", "//=", ">>=", "<<=", "...", "!=", "==", "<=", ">=", "->",
    ":=",  "+=",  "-=",  "*=",  "/=",  "%=", "@=", "&=", "|=", "^=",
    "**",  "//",  "<<",  ">>",  "&&",  "||"};

std::string canonical_string(std::string_view inner) {
  std::string out = "'";
  for (char c : inner) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '\'';
  return out;
}

}  // namespace

bool is_python_keyword(std::string_view word) { return keyword_set().count(word) > 0; }

std::vector<Token> lex(std::string_view line) {
  std::vector<Token> out;
  size_t i = 0;
  const size_t n = line.size();
  while (i < n) {
    char c = line[i];
    if (c == ' ' || c == '\t' || c == '\f' || c == '\v' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (is_ident_start(c)) {
      size_t j = i + 1;
      while (j < n && is_ident_char(line[j])) ++j;
      std::string_view word = line.substr(i, j - i);
      // string prefix immediately followed by a quote
      if (j < n && (line[j] == '\'' || line[j] == '"') && is_string_prefix(word)) {
        i = j;  // fall through to string scanning below with prefix consumed
        continue;
      }
      if (word == "True" || word == "False") {
        out.push_back({TokenKind::Bool, std::string(word)});
      } else if (word == "None") {
        out.push_back({TokenKind::None, std::string(word)});
      } else if (is_python_keyword(word)) {
        out.push_back({TokenKind::Keyword, std::string(word)});
      } else if (word == "STR") {
        out.push_back({TokenKind::String, "STR"});
      } else if (word == "NUM") {
        out.push_back({TokenKind::Number, "NUM"});
      } else {
        out.push_back({TokenKind::Identifier, std::string(word)});
      }
      i = j;
      continue;
    }
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(line[i + 1]))) {
      size_t j = i;
      bool seen_exp = false;
      while (j < n) {
        char d = line[j];
        if (is_digit(d) || d == '.' || d == '_' || d == 'x' || d == 'X' ||
            d == 'o' || d == 'O' || d == 'b' || d == 'B' || d == 'j' || d == 'J' ||
            (d >= 'a' && d <= 'f') || (d >= 'A' && d <= 'F')) {
          if ((d == 'e' || d == 'E') && j > i) {
            // exponent only in decimal literals; peek for sign/digit
            if (j + 1 < n && (is_digit(line[j + 1]) || line[j + 1] == '+' || line[j + 1] == '-')) {
              seen_exp = true;
              ++j;
              if (line[j] == '+' || line[j] == '-') ++j;
              continue;
            }
          }
          ++j;
        } else {
          break;
        }
      }
      (void)seen_exp;
      out.push_back({TokenKind::Number, std::string(line.substr(i, j - i))});
      i = j;
      continue;
    }
    if (c == '\'' || c == '"') {
      char quote = c;
      bool triple = i + 2 < n && line[i + 1] == quote && line[i + 2] == quote;
      size_t j = i + (triple ? 3 : 1);
      std::string inner;
      bool closed = false;
      while (j < n) {
        if (line[j] == '\\' && j + 1 < n) {
          inner += line[j];
          inner += line[j + 1];
          j += 2;
          continue;
        }
        if (triple) {
          if (line[j] == quote && j + 2 < n + 1 && j + 1 < n && line[j + 1] == quote &&
              j + 2 < n && line[j + 2] == quote) {
            j += 3;
            closed = true;
            break;
          }
        } else if (line[j] == quote) {
          ++j;
          closed = true;
          break;
        }
        inner += line[j];
        ++j;
      }
      (void)closed;  // unterminated strings swallow the rest of the line
      out.push_back({TokenKind::String, canonical_string(inner)});
      i = j;
      continue;
    }
    bool matched = false;
    for (std::string_view op : kMultiOps) {
      if (line.substr(i, op.size()) == op) {
        out.push_back({TokenKind::Op, std::string(op)});
        i += op.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    out.push_back({TokenKind::Op, std::string(1, c)});
    ++i;
  }
  return out;
}

std::string token_class_label(const Token& tok) {
  switch (tok.kind) {
    case TokenKind::Identifier: return "ID";
    case TokenKind::String: return "STR";
    case TokenKind::Number: return "NUM";
    case TokenKind::Bool: return "BOOL";
    case TokenKind::None: return "NONE";
    case TokenKind::Keyword:
    case TokenKind::Op: return tok.text;
  }
  return tok.text;
}

}  // namespace poisonscan

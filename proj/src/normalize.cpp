#include "poisonscan/normalize.hpp"

#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

namespace poisonscan {

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

namespace {

struct StringState {
  bool active = false;
  char quote = '\'';
  bool triple = false;
};

// Strips comments and trailing whitespace from one physical line, carrying
// string state across lines (triple-quoted strings may span lines).
// Returns the content with comments removed and reports bracket depth delta,
// trailing backslash, and updated string state.
struct PhysScan {
  std::string content;
  int bracket_delta = 0;
  bool backslash_continuation = false;
};

PhysScan scan_physical_line(std::string_view line, StringState& st) {
  PhysScan out;
  std::string kept;
  size_t i = 0;
  const size_t n = line.size();
  while (i < n) {
    char c = line[i];
    if (st.active) {
      kept += c;
      if (c == '\\' && !st.triple && i + 1 < n) {
        kept += line[i + 1];
        i += 2;
        continue;
      }
      if (c == '\\' && st.triple && i + 1 < n) {
        kept += line[i + 1];
        i += 2;
        continue;
      }
      if (st.triple) {
        if (c == st.quote && i + 2 < n + 1 && line.substr(i, 3) == std::string(3, st.quote)) {
          kept += line.substr(i + 1, 2);
          i += 3;
          st.active = false;
          continue;
        }
      } else if (c == st.quote) {
        st.active = false;
      }
      ++i;
      continue;
    }
    if (c == '#') break;  // comment to end of line
    if (c == '\'' || c == '"') {
      if (i + 2 < n && line[i + 1] == c && line[i + 2] == c) {
        st = {true, c, true};
        kept += line.substr(i, 3);
        i += 3;
        continue;
      }
      st = {true, c, false};
      kept += c;
      ++i;
      continue;
    }
    if (c == '(' || c == '[' || c == '{') ++out.bracket_delta;
    if (c == ')' || c == ']' || c == '}') --out.bracket_delta;
    kept += c;
    ++i;
  }
  // single-quoted strings do not continue across lines unless escaped;
  // an unterminated single-quote line is left open only for backslash endings
  while (!kept.empty() && (kept.back() == ' ' || kept.back() == '\t' || kept.back() == '\r'))
    kept.pop_back();
  if (!st.active && !kept.empty() && kept.back() == '\\') {
    out.backslash_continuation = true;
    kept.pop_back();
  }
  if (st.active && !st.triple) st.active = false;  // tolerate unterminated strings
  out.content = kept;
  return out;
}

bool all_whitespace(std::string_view s) {
  for (char c : s)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}

}  // namespace

CodeLines preprocess(std::string_view raw) {
  CodeLines out;
  StringState st;
  std::string logical;
  size_t logical_start = 0;
  int depth = 0;
  bool pending = false;  // a logical line is being accumulated

  size_t pos = 0;
  while (pos <= raw.size()) {
    size_t eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    std::string_view phys = raw.substr(pos, eol - pos);
    PhysScan scan = scan_physical_line(phys, st);
    bool continuing = false;
    if (!pending) {
      logical = scan.content;
      logical_start = pos;
    } else if (!all_whitespace(scan.content) || st.active) {
      logical += " ";
      // joined spans keep indentation out of the logical text
      size_t b = 0;
      while (b < scan.content.size() && (scan.content[b] == ' ' || scan.content[b] == '\t')) ++b;
      logical += scan.content.substr(b);
    }
    depth += scan.bracket_delta;
    if (depth < 0) depth = 0;
    continuing = scan.backslash_continuation || depth > 0 || st.active;
    if (continuing && eol < raw.size()) {
      pending = true;
    } else {
      if (!all_whitespace(logical)) {
        std::string trimmed = logical;
        while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t'))
          trimmed.pop_back();
        if (!trimmed.empty()) {
          out.lines.push_back(trimmed);
          out.origin_spans.emplace_back(logical_start, eol);
        }
      }
      pending = false;
      logical.clear();
      depth = 0;
    }
    if (eol == raw.size()) break;
    pos = eol + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct ParseError {};

class LineParser {
 public:
  explicit LineParser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Node parse_statement() {
    Node stmt = statement();
    if (!at_end()) throw ParseError{};
    return stmt;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;

  bool at_end() const { return pos_ >= toks_.size(); }
  const Token& peek(size_t ahead = 0) const {
    static const Token sentinel{TokenKind::Op, ""};
    return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : sentinel;
  }
  const Token& advance() {
    if (at_end()) throw ParseError{};
    return toks_[pos_++];
  }
  bool check_op(std::string_view t) const {
    return !at_end() && peek().kind == TokenKind::Op && peek().text == t;
  }
  bool check_kw(std::string_view t) const {
    return !at_end() && peek().kind == TokenKind::Keyword && peek().text == t;
  }
  bool accept_op(std::string_view t) {
    if (check_op(t)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view t) {
    if (check_kw(t)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_op(std::string_view t) {
    if (!accept_op(t)) throw ParseError{};
  }
  void expect_kw(std::string_view t) {
    if (!accept_kw(t)) throw ParseError{};
  }
  std::string expect_name() {
    if (at_end() || peek().kind != TokenKind::Identifier) throw ParseError{};
    return advance().text;
  }

  Node statement() {
    if (at_end()) throw ParseError{};
    if (peek().kind == TokenKind::Keyword) {
      const std::string& kw = peek().text;
      if (kw == "async") {
        ++pos_;
        return statement();
      }
      if (kw == "with") return with_stmt();
      if (kw == "for") return for_stmt();
      if (kw == "if") return cond_header(NodeKind::If);
      if (kw == "elif") return cond_header(NodeKind::Elif);
      if (kw == "while") return cond_header(NodeKind::While);
      if (kw == "else") return bare_header(NodeKind::Else);
      if (kw == "try") return bare_header(NodeKind::Try);
      if (kw == "finally") return bare_header(NodeKind::Finally);
      if (kw == "except") return except_stmt();
      if (kw == "def") return def_stmt();
      if (kw == "class") return class_stmt();
      if (kw == "return") return return_stmt();
      if (kw == "pass") return simple_kw(NodeKind::Pass);
      if (kw == "break") return simple_kw(NodeKind::Break);
      if (kw == "continue") return simple_kw(NodeKind::Continue);
      if (kw == "raise") return raise_stmt();
      if (kw == "assert") return assert_stmt();
      if (kw == "del") return del_stmt();
      if (kw == "global" || kw == "nonlocal") return global_stmt();
      if (kw == "import") return import_stmt();
      if (kw == "from") return from_import_stmt();
      throw ParseError{};
    }
    return expr_or_assign();
  }

  Node simple_kw(NodeKind kind) {
    ++pos_;
    return Node{kind, "", {}};
  }

  Node bare_header(NodeKind kind) {
    ++pos_;
    expect_op(":");
    return Node{kind, "", {}};
  }

  Node cond_header(NodeKind kind) {
    ++pos_;
    Node cond = testlist();
    expect_op(":");
    return Node{kind, "", {std::move(cond)}};
  }

  Node with_stmt() {
    ++pos_;
    Node with{NodeKind::With, "", {}};
    while (true) {
      Node item{NodeKind::WithItem, "", {}};
      item.children.push_back(ternary());
      if (accept_kw("as")) item.children.push_back(ternary());
      with.children.push_back(std::move(item));
      if (!accept_op(",")) break;
    }
    expect_op(":");
    return with;
  }

  Node for_stmt() {
    ++pos_;
    Node target = testlist_no_in();
    expect_kw("in");
    Node iter = testlist();
    expect_op(":");
    return Node{NodeKind::For, "", {std::move(target), std::move(iter)}};
  }

  Node except_stmt() {
    ++pos_;
    Node node{NodeKind::Except, "", {}};
    if (!check_op(":")) {
      node.children.push_back(ternary());
      if (accept_kw("as")) node.children.push_back(Node{NodeKind::Name, expect_name(), {}});
    }
    expect_op(":");
    return node;
  }

  Node def_stmt() {
    ++pos_;
    Node node{NodeKind::FuncDef, expect_name(), {}};
    expect_op("(");
    while (!check_op(")")) {
      if (accept_op("*")) {
        if (check_op(",") || check_op(")")) {
          node.children.push_back(Node{NodeKind::Star, "*", {}});
        } else {
          node.children.push_back(Node{NodeKind::Star, "*", {Node{NodeKind::Name, expect_name(), {}}}});
        }
      } else if (accept_op("**")) {
        node.children.push_back(Node{NodeKind::Star, "**", {Node{NodeKind::Name, expect_name(), {}}}});
      } else {
        Node param{NodeKind::Name, expect_name(), {}};
        if (accept_op(":")) (void)ternary();  // drop annotations
        if (accept_op("=")) {
          Node dflt = ternary();
          param.children.push_back(std::move(dflt));  // default kept as child
        }
        node.children.push_back(std::move(param));
      }
      if (!accept_op(",")) break;
    }
    expect_op(")");
    if (accept_op("->")) (void)ternary();
    expect_op(":");
    return node;
  }

  Node class_stmt() {
    ++pos_;
    Node node{NodeKind::ClassDef, expect_name(), {}};
    if (accept_op("(")) {
      while (!check_op(")")) {
        node.children.push_back(call_arg());
        if (!accept_op(",")) break;
      }
      expect_op(")");
    }
    expect_op(":");
    return node;
  }

  Node return_stmt() {
    ++pos_;
    Node node{NodeKind::Return, "", {}};
    if (!at_end()) node.children.push_back(testlist());
    return node;
  }

  Node raise_stmt() {
    ++pos_;
    Node node{NodeKind::Raise, "", {}};
    if (!at_end()) {
      node.children.push_back(ternary());
      if (accept_kw("from")) node.children.push_back(ternary());
    }
    return node;
  }

  Node assert_stmt() {
    ++pos_;
    Node node{NodeKind::Assert, "", {}};
    node.children.push_back(ternary());
    if (accept_op(",")) node.children.push_back(ternary());
    return node;
  }

  Node del_stmt() {
    ++pos_;
    Node node{NodeKind::Del, "", {}};
    node.children.push_back(ternary());
    while (accept_op(",")) node.children.push_back(ternary());
    return node;
  }

  Node global_stmt() {
    ++pos_;
    Node node{NodeKind::Global, "", {}};
    node.children.push_back(Node{NodeKind::Name, expect_name(), {}});
    while (accept_op(",")) node.children.push_back(Node{NodeKind::Name, expect_name(), {}});
    return node;
  }

  std::string dotted_name() {
    std::string path = expect_name();
    while (accept_op(".")) {
      path += ".";
      path += expect_name();
    }
    return path;
  }

  Node import_stmt() {
    ++pos_;
    Node node{NodeKind::Import, dotted_name(), {}};
    if (accept_kw("as")) node.children.push_back(Node{NodeKind::Name, expect_name(), {}});
    return node;
  }

  Node from_import_stmt() {
    ++pos_;
    Node node{NodeKind::ImportFrom, dotted_name(), {}};
    expect_kw("import");
    if (accept_op("*")) {
      node.children.push_back(Node{NodeKind::Star, "*", {}});
      return node;
    }
    while (true) {
      Node name{NodeKind::Name, expect_name(), {}};
      if (accept_kw("as")) name.children.push_back(Node{NodeKind::Name, expect_name(), {}});
      node.children.push_back(std::move(name));
      if (!accept_op(",")) break;
    }
    return node;
  }

  static bool is_aug_op(const Token& t) {
    if (t.kind != TokenKind::Op) return false;
    static const char* ops[] = {"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                ">>=", "<<=", "&=", "|=", "^=", "@="};
    for (const char* o : ops)
      if (t.text == o) return true;
    return false;
  }

  Node expr_or_assign() {
    Node first = testlist();
    if (!at_end() && is_aug_op(peek())) {
      std::string op = advance().text;
      op.pop_back();  // store the base operator
      Node value = testlist();
      return Node{NodeKind::AugAssign, op, {std::move(first), std::move(value)}};
    }
    if (check_op("=")) {
      std::vector<Node> parts;
      parts.push_back(std::move(first));
      while (accept_op("=")) parts.push_back(testlist());
      Node node{NodeKind::Assign, "", {}};
      node.children = std::move(parts);
      return node;
    }
    return Node{NodeKind::ExprStmt, "", {std::move(first)}};
  }

  Node testlist() { return testlist_impl(true); }
  Node testlist_no_in() { return testlist_impl(false); }

  Node testlist_impl(bool allow_in) {
    Node first = allow_in ? ternary() : ternary_no_in();
    if (!check_op(",")) return first;
    Node tup{NodeKind::Tuple, "", {}};
    tup.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_end() || check_op(":") || check_op(")") || check_op("]") || check_op("}") ||
          check_op("=") || check_kw("in"))
        break;
      tup.children.push_back(allow_in ? ternary() : ternary_no_in());
    }
    return tup;
  }

  Node ternary() { return ternary_impl(true); }
  Node ternary_no_in() { return ternary_impl(false); }

  Node ternary_impl(bool allow_in) {
    Node value = or_test(allow_in);
    if (accept_kw("if")) {
      Node cond = or_test(allow_in);
      expect_kw("else");
      Node orelse = ternary_impl(allow_in);
      return Node{NodeKind::Ternary, "", {std::move(value), std::move(cond), std::move(orelse)}};
    }
    return value;
  }

  Node or_test(bool allow_in) {
    Node lhs = and_test(allow_in);
    while (accept_kw("or")) {
      Node rhs = and_test(allow_in);
      lhs = Node{NodeKind::BoolOp, "or", {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
  }

  Node and_test(bool allow_in) {
    Node lhs = not_test(allow_in);
    while (accept_kw("and")) {
      Node rhs = not_test(allow_in);
      lhs = Node{NodeKind::BoolOp, "and", {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
  }

  Node not_test(bool allow_in) {
    if (accept_kw("not")) {
      Node operand = not_test(allow_in);
      return Node{NodeKind::UnaryOp, "not", {std::move(operand)}};
    }
    return comparison(allow_in);
  }

  Node comparison(bool allow_in) {
    Node lhs = bit_or();
    while (true) {
      std::string op;
      if (check_op("<") || check_op(">") || check_op("<=") || check_op(">=") ||
          check_op("==") || check_op("!=")) {
        op = advance().text;
      } else if (allow_in && check_kw("in")) {
        ++pos_;
        op = "in";
      } else if (check_kw("is")) {
        ++pos_;
        op = accept_kw("not") ? "is not" : "is";
      } else if (check_kw("not") && peek(1).kind == TokenKind::Keyword && peek(1).text == "in") {
        if (!allow_in) break;
        pos_ += 2;
        op = "not in";
      } else {
        break;
      }
      Node rhs = bit_or();
      lhs = Node{NodeKind::Compare, op, {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
  }

  Node bit_or() {
    Node lhs = bit_xor();
    while (check_op("|")) {
      ++pos_;
      lhs = Node{NodeKind::BinOp, "|", {std::move(lhs), bit_xor()}};
    }
    return lhs;
  }
  Node bit_xor() {
    Node lhs = bit_and();
    while (check_op("^")) {
      ++pos_;
      lhs = Node{NodeKind::BinOp, "^", {std::move(lhs), bit_and()}};
    }
    return lhs;
  }
  Node bit_and() {
    Node lhs = shift_expr();
    while (check_op("&")) {
      ++pos_;
      lhs = Node{NodeKind::BinOp, "&", {std::move(lhs), shift_expr()}};
    }
    return lhs;
  }
  Node shift_expr() {
    Node lhs = arith();
    while (check_op("<<") || check_op(">>")) {
      std::string op = advance().text;
      lhs = Node{NodeKind::BinOp, op, {std::move(lhs), arith()}};
    }
    return lhs;
  }
  Node arith() {
    Node lhs = term();
    while (check_op("+") || check_op("-")) {
      std::string op = advance().text;
      lhs = Node{NodeKind::BinOp, op, {std::move(lhs), term()}};
    }
    return lhs;
  }
  Node term() {
    Node lhs = factor();
    while (check_op("*") || check_op("/") || check_op("//") || check_op("%") || check_op("@")) {
      std::string op = advance().text;
      lhs = Node{NodeKind::BinOp, op, {std::move(lhs), factor()}};
    }
    return lhs;
  }
  Node factor() {
    if (check_op("+") || check_op("-") || check_op("~")) {
      std::string op = advance().text;
      return Node{NodeKind::UnaryOp, op, {factor()}};
    }
    return power();
  }
  Node power() {
    Node base = postfix();
    if (accept_op("**")) {
      Node exp = factor();
      return Node{NodeKind::BinOp, "**", {std::move(base), std::move(exp)}};
    }
    return base;
  }

  Node postfix() {
    Node node = atom();
    while (true) {
      if (accept_op(".")) {
        std::string attr = expect_name();
        node = Node{NodeKind::Attribute, attr, {std::move(node)}};
      } else if (check_op("(")) {
        ++pos_;
        Node call{NodeKind::Call, "", {}};
        call.children.push_back(std::move(node));
        while (!check_op(")")) {
          call.children.push_back(call_arg());
          if (!accept_op(",")) break;
        }
        expect_op(")");
        node = std::move(call);
      } else if (check_op("[")) {
        ++pos_;
        Node idx = subscript_expr();
        expect_op("]");
        node = Node{NodeKind::Subscript, "", {std::move(node), std::move(idx)}};
      } else {
        break;
      }
    }
    return node;
  }

  Node call_arg() {
    if (check_op("*")) {
      ++pos_;
      return Node{NodeKind::Star, "*", {ternary()}};
    }
    if (check_op("**")) {
      ++pos_;
      return Node{NodeKind::Star, "**", {ternary()}};
    }
    if (peek().kind == TokenKind::Identifier && peek(1).kind == TokenKind::Op &&
        peek(1).text == "=") {
      std::string name = advance().text;
      ++pos_;  // '='
      return Node{NodeKind::Keyword, name, {ternary()}};
    }
    return ternary();
  }

  Node subscript_expr() {
    std::vector<Node> parts;
    std::string shape;
    auto piece = [&]() {
      if (check_op(":") || check_op("]")) return;
      parts.push_back(ternary());
      shape += "e";
    };
    piece();
    while (check_op(":")) {
      ++pos_;
      shape += ":";
      piece();
    }
    if (shape.find(':') == std::string::npos) {
      if (parts.empty()) throw ParseError{};
      return std::move(parts[0]);
    }
    Node sl{NodeKind::Slice, shape, {}};
    sl.children = std::move(parts);
    return sl;
  }

  Node atom() {
    if (at_end()) throw ParseError{};
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Identifier: {
        ++pos_;
        return Node{NodeKind::Name, t.text, {}};
      }
      case TokenKind::Number: {
        ++pos_;
        return Node{NodeKind::NumberLit, t.text, {}};
      }
      case TokenKind::String: {
        std::string text = t.text;
        ++pos_;
        while (!at_end() && peek().kind == TokenKind::String) ++pos_;  // implicit concat
        return Node{NodeKind::StringLit, text, {}};
      }
      case TokenKind::Bool: {
        ++pos_;
        return Node{NodeKind::BoolLit, t.text, {}};
      }
      case TokenKind::None: {
        ++pos_;
        return Node{NodeKind::NoneLit, "None", {}};
      }
      case TokenKind::Keyword:
        throw ParseError{};
      case TokenKind::Op:
        break;
    }
    if (accept_op("(")) {
      if (accept_op(")")) return Node{NodeKind::Tuple, "", {}};
      Node inner = testlist();
      expect_op(")");
      return inner;
    }
    if (accept_op("[")) {
      Node list{NodeKind::ListLit, "", {}};
      while (!check_op("]")) {
        list.children.push_back(ternary());
        if (!accept_op(",")) break;
      }
      expect_op("]");
      return list;
    }
    if (accept_op("{")) {
      if (accept_op("}")) return Node{NodeKind::DictLit, "", {}};
      if (accept_op("**")) {
        Node d{NodeKind::DictLit, "", {}};
        d.children.push_back(Node{NodeKind::Star, "**", {ternary()}});
        while (accept_op(",")) {
          if (check_op("}")) break;
          d.children.push_back(dict_entry());
        }
        expect_op("}");
        return d;
      }
      Node first = ternary();
      if (accept_op(":")) {
        Node d{NodeKind::DictLit, "", {}};
        Node entry{NodeKind::DictEntry, "", {}};
        entry.children.push_back(std::move(first));
        entry.children.push_back(ternary());
        d.children.push_back(std::move(entry));
        while (accept_op(",")) {
          if (check_op("}")) break;
          d.children.push_back(dict_entry());
        }
        expect_op("}");
        return d;
      }
      Node s{NodeKind::SetLit, "", {}};
      s.children.push_back(std::move(first));
      while (accept_op(",")) {
        if (check_op("}")) break;
        s.children.push_back(ternary());
      }
      expect_op("}");
      return s;
    }
    throw ParseError{};
  }

  Node dict_entry() {
    if (accept_op("**")) return Node{NodeKind::Star, "**", {ternary()}};
    Node entry{NodeKind::DictEntry, "", {}};
    entry.children.push_back(ternary());
    expect_op(":");
    entry.children.push_back(ternary());
    return entry;
  }
};

Node opaque_line(const std::vector<Token>& toks) {
  std::string key;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) key += ' ';
    key += token_class_label(toks[i]);
  }
  return Node{NodeKind::OpaqueLine, key, {}};
}

Node parse_line(std::string_view line) {
  std::vector<Token> toks = lex(line);
  if (toks.empty()) return Node{NodeKind::OpaqueLine, "", {}};
  try {
    LineParser parser(toks);
    return parser.parse_statement();
  } catch (const ParseError&) {
    return opaque_line(toks);
  }
}

size_t count_nodes(const Node& n) {
  size_t total = 1;
  for (const Node& c : n.children) total += count_nodes(c);
  return total;
}

}  // namespace

SyntaxTree parse_snippet(const CodeLines& lines) {
  SyntaxTree tree{Node{NodeKind::Module, "", {}}};
  for (const std::string& line : lines.lines) tree.root.children.push_back(parse_line(line));
  return tree;
}

SyntaxTree parse_snippet(std::string_view raw_text) { return parse_snippet(preprocess(raw_text)); }

size_t SyntaxTree::node_count() const {
  size_t total = 0;
  for (const Node& c : root.children) total += count_nodes(c);
  return total;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

const char* kind_label(NodeKind k) {
  switch (k) {
    case NodeKind::Module: return "module";
    case NodeKind::OpaqueLine: return "opaque";
    case NodeKind::Assign: return "assign";
    case NodeKind::AugAssign: return "augassign";
    case NodeKind::ExprStmt: return "expr";
    case NodeKind::Return: return "return";
    case NodeKind::Pass: return "pass";
    case NodeKind::Break: return "break";
    case NodeKind::Continue: return "continue";
    case NodeKind::Raise: return "raise";
    case NodeKind::Assert: return "assert";
    case NodeKind::Del: return "del";
    case NodeKind::Global: return "global";
    case NodeKind::Import: return "import";
    case NodeKind::ImportFrom: return "importfrom";
    case NodeKind::With: return "with";
    case NodeKind::WithItem: return "item";
    case NodeKind::For: return "for";
    case NodeKind::If: return "if";
    case NodeKind::Elif: return "elif";
    case NodeKind::Else: return "else";
    case NodeKind::While: return "while";
    case NodeKind::FuncDef: return "def";
    case NodeKind::ClassDef: return "class";
    case NodeKind::Try: return "try";
    case NodeKind::Except: return "except";
    case NodeKind::Finally: return "finally";
    case NodeKind::Call: return "call";
    case NodeKind::Keyword: return "kw";
    case NodeKind::Attribute: return "attr";
    case NodeKind::Subscript: return "subscript";
    case NodeKind::Slice: return "slice";
    case NodeKind::Name: return "id";
    case NodeKind::StringLit: return "str";
    case NodeKind::NumberLit: return "num";
    case NodeKind::BoolLit: return "bool";
    case NodeKind::NoneLit: return "none";
    case NodeKind::Tuple: return "tuple";
    case NodeKind::ListLit: return "list";
    case NodeKind::SetLit: return "set";
    case NodeKind::DictLit: return "dict";
    case NodeKind::DictEntry: return "entry";
    case NodeKind::Star: return "star";
    case NodeKind::BinOp: return "binop";
    case NodeKind::UnaryOp: return "unaryop";
    case NodeKind::Compare: return "cmp";
    case NodeKind::BoolOp: return "boolop";
    case NodeKind::Ternary: return "ternary";
  }
  return "?";
}

bool numeric_zero(const std::string& text) {
  if (text == "NUM" || text.empty()) return false;
  std::string cleaned;
  for (char c : text)
    if (c != '_') cleaned += c;
  char* end = nullptr;
  double v = std::strtod(cleaned.c_str(), &end);
  if (end == cleaned.c_str()) return false;
  return v == 0.0;
}

// Identifier handling inside the renderer.
enum class IdentStyle { ToId, Positional };
enum class HeadStyle { ToId, BindingAware };
enum class LiteralStyle { ClassOnly, Sentinels };

struct Renderer {
  IdentStyle ident;
  HeadStyle head;
  LiteralStyle literals;
  const std::set<std::string>* bound;
  std::map<std::string, std::string>* renames = nullptr;  // Positional state
  int* next_index = nullptr;

  std::string variable(const std::string& name) const {
    if (ident == IdentStyle::ToId) return "ID";
    auto it = renames->find(name);
    if (it != renames->end()) return it->second;
    std::string v = "v" + std::to_string((*next_index)++);
    renames->emplace(name, v);
    return v;
  }

  std::string head_name(const std::string& name) const {
    if (head == HeadStyle::ToId) return ident == IdentStyle::Positional ? variable(name) : "ID";
    if (bound && bound->count(name)) return variable(name);
    return name;  // free head: library anchor
  }

  std::string literal(const Node& n) const {
    if (n.kind == NodeKind::StringLit) {
      if (literals == LiteralStyle::Sentinels && is_sentinel_literal(n)) return n.text;
      return "STR";
    }
    if (n.kind == NodeKind::NumberLit) {
      if (literals == LiteralStyle::Sentinels && is_sentinel_literal(n)) return "0";
      return "NUM";
    }
    return n.text;
  }

  enum class Pos { Value, AttrHead, BareCallee };

  std::string expr(const Node& n, Pos pos = Pos::Value) const {
    switch (n.kind) {
      case NodeKind::Name:
        if (pos == Pos::BareCallee) return n.text;
        if (pos == Pos::AttrHead) return head_name(n.text);
        if (n.text == "ID" && ident == IdentStyle::ToId) return "ID";
        return variable(n.text);
      case NodeKind::StringLit:
      case NodeKind::NumberLit:
        return literal(n);
      case NodeKind::BoolLit:
      case NodeKind::NoneLit:
        return n.text;
      case NodeKind::Attribute: {
        const Node& base = n.children[0];
        std::string b = expr(base, base.kind == NodeKind::Name ? Pos::AttrHead : Pos::Value);
        return b + "." + n.text;
      }
      case NodeKind::Call: {
        const Node& callee = n.children[0];
        std::string out;
        if (callee.kind == NodeKind::Name) {
          out = expr(callee, Pos::BareCallee);
        } else {
          out = expr(callee);
        }
        out += "(";
        bool first = true;
        for (size_t i = 1; i < n.children.size(); ++i) {
          if (!first) out += ", ";
          first = false;
          const Node& arg = n.children[i];
          if (arg.kind == NodeKind::Keyword) {
            out += arg.text + "=" + expr(arg.children[0]);
          } else if (arg.kind == NodeKind::Star) {
            out += arg.text + expr(arg.children[0]);
          } else {
            out += expr(arg);
          }
        }
        out += ")";
        return out;
      }
      case NodeKind::Subscript:
        return expr(n.children[0]) + "[" + expr(n.children[1]) + "]";
      case NodeKind::Slice: {
        std::string out;
        size_t child = 0;
        for (char c : n.text) {
          if (c == 'e')
            out += expr(n.children[child++]);
          else
            out += ":";
        }
        return out;
      }
      case NodeKind::Tuple: {
        std::string out = "(";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          out += expr(n.children[i]);
        }
        if (n.children.size() == 1) out += ",";
        out += ")";
        return out;
      }
      case NodeKind::ListLit:
      case NodeKind::SetLit: {
        std::string out = n.kind == NodeKind::ListLit ? "[" : "{";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          out += expr(n.children[i]);
        }
        out += n.kind == NodeKind::ListLit ? "]" : "}";
        return out;
      }
      case NodeKind::DictLit: {
        std::string out = "{";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          const Node& e = n.children[i];
          if (e.kind == NodeKind::Star)
            out += "**" + expr(e.children[0]);
          else
            out += expr(e.children[0]) + ": " + expr(e.children[1]);
        }
        out += "}";
        return out;
      }
      case NodeKind::DictEntry:
        return expr(n.children[0]) + ": " + expr(n.children[1]);
      case NodeKind::Star:
        return n.text + (n.children.empty() ? "" : expr(n.children[0]));
      case NodeKind::BinOp:
        return "(" + expr(n.children[0]) + " " + n.text + " " + expr(n.children[1]) + ")";
      case NodeKind::Compare:
        return "(" + expr(n.children[0]) + " " + n.text + " " + expr(n.children[1]) + ")";
      case NodeKind::BoolOp:
        return "(" + expr(n.children[0]) + " " + n.text + " " + expr(n.children[1]) + ")";
      case NodeKind::UnaryOp:
        if (n.text == "not") return "(not " + expr(n.children[0]) + ")";
        return "(" + n.text + expr(n.children[0]) + ")";
      case NodeKind::Ternary:
        return "(" + expr(n.children[0]) + " if " + expr(n.children[1]) + " else " +
               expr(n.children[2]) + ")";
      case NodeKind::Keyword:
        return n.text + "=" + expr(n.children[0]);
      case NodeKind::OpaqueLine:
        return n.text;
      default:
        break;
    }
    return kind_label(n.kind);
  }

  std::string statement(const Node& n) const {
    switch (n.kind) {
      case NodeKind::OpaqueLine:
        return n.text;
      case NodeKind::Assign: {
        std::string out;
        for (size_t i = 0; i + 1 < n.children.size(); ++i) out += expr(n.children[i]) + " = ";
        out += expr(n.children.back());
        return out;
      }
      case NodeKind::AugAssign:
        return expr(n.children[0]) + " " + n.text + "= " + expr(n.children[1]);
      case NodeKind::ExprStmt:
        return expr(n.children[0]);
      case NodeKind::Return:
        return n.children.empty() ? "return" : "return " + expr(n.children[0]);
      case NodeKind::Pass: return "pass";
      case NodeKind::Break: return "break";
      case NodeKind::Continue: return "continue";
      case NodeKind::Raise: {
        std::string out = "raise";
        if (!n.children.empty()) out += " " + expr(n.children[0]);
        if (n.children.size() > 1) out += " from " + expr(n.children[1]);
        return out;
      }
      case NodeKind::Assert: {
        std::string out = "assert " + expr(n.children[0]);
        if (n.children.size() > 1) out += ", " + expr(n.children[1]);
        return out;
      }
      case NodeKind::Del: {
        std::string out = "del ";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          out += expr(n.children[i]);
        }
        return out;
      }
      case NodeKind::Global: {
        std::string out = "global ";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          out += expr(n.children[i]);
        }
        return out;
      }
      case NodeKind::Import: {
        std::string out = "import " + n.text;
        if (!n.children.empty()) out += " as " + expr(n.children[0]);
        return out;
      }
      case NodeKind::ImportFrom: {
        std::string out = "from " + n.text + " import ";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          const Node& name = n.children[i];
          if (name.kind == NodeKind::Star) {
            out += "*";
          } else {
            out += expr(name);
            if (!name.children.empty()) out += " as " + expr(name.children[0]);
          }
        }
        return out;
      }
      case NodeKind::With: {
        std::string out = "with ";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          const Node& item = n.children[i];
          out += expr(item.children[0]);
          if (item.children.size() > 1) out += " as " + expr(item.children[1]);
        }
        return out + ":";
      }
      case NodeKind::For:
        return "for " + expr(n.children[0]) + " in " + expr(n.children[1]) + ":";
      case NodeKind::If: return "if " + expr(n.children[0]) + ":";
      case NodeKind::Elif: return "elif " + expr(n.children[0]) + ":";
      case NodeKind::While: return "while " + expr(n.children[0]) + ":";
      case NodeKind::Else: return "else:";
      case NodeKind::Try: return "try:";
      case NodeKind::Finally: return "finally:";
      case NodeKind::Except: {
        std::string out = "except";
        if (!n.children.empty()) {
          out += " " + expr(n.children[0]);
          if (n.children.size() > 1) out += " as " + expr(n.children[1]);
        }
        return out + ":";
      }
      case NodeKind::FuncDef: {
        std::string out = "def " + n.text + "(";
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          const Node& p = n.children[i];
          if (p.kind == NodeKind::Star) {
            out += p.text + (p.children.empty() ? "" : expr(p.children[0]));
          } else {
            out += variable(p.text);
            if (!p.children.empty()) out += "=" + expr(p.children[0]);
          }
        }
        return out + "):";
      }
      case NodeKind::ClassDef: {
        std::string out = "class " + n.text;
        if (!n.children.empty()) {
          out += "(";
          for (size_t i = 0; i < n.children.size(); ++i) {
            if (i) out += ", ";
            out += expr(n.children[i]);
          }
          out += ")";
        }
        return out + ":";
      }
      default:
        return expr(n);
    }
  }
};

Renderer make_renderer(RenderMode mode, const std::set<std::string>& bound) {
  switch (mode) {
    case RenderMode::Fingerprint:
      return Renderer{IdentStyle::ToId, HeadStyle::ToId, LiteralStyle::ClassOnly, &bound};
    case RenderMode::Canon:
      return Renderer{IdentStyle::ToId, HeadStyle::BindingAware, LiteralStyle::Sentinels, &bound};
    case RenderMode::Signature:
      return Renderer{IdentStyle::ToId, HeadStyle::ToId, LiteralStyle::Sentinels, &bound};
  }
  return Renderer{IdentStyle::ToId, HeadStyle::ToId, LiteralStyle::ClassOnly, &bound};
}

}  // namespace

bool is_sentinel_literal(const Node& node) {
  if (node.kind == NodeKind::StringLit)
    return node.text == "''" || node.text == "'0.0.0.0'";
  if (node.kind == NodeKind::NumberLit) return numeric_zero(node.text);
  return false;
}

std::string render_statement(const Node& stmt, RenderMode mode,
                             const std::set<std::string>& bound) {
  return make_renderer(mode, bound).statement(stmt);
}

std::string render_expr(const Node& expr, RenderMode mode, const std::set<std::string>& bound) {
  return make_renderer(mode, bound).expr(expr);
}

std::string Node::debug_string() const {
  std::string out = kind_label(kind);
  if (!text.empty() && kind != NodeKind::Name && kind != NodeKind::StringLit &&
      kind != NodeKind::NumberLit && kind != NodeKind::BoolLit && kind != NodeKind::NoneLit) {
    out += ":";
    out += text;
  }
  if (!children.empty()) {
    out += "(";
    for (size_t i = 0; i < children.size(); ++i) {
      if (i) out += ",";
      out += children[i].debug_string();
    }
    out += ")";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bound-name collection
// ---------------------------------------------------------------------------

namespace {

void collect_target_names(const Node& n, std::set<std::string>& out) {
  switch (n.kind) {
    case NodeKind::Name:
      out.insert(n.text);
      break;
    case NodeKind::Tuple:
    case NodeKind::ListLit:
      for (const Node& c : n.children) collect_target_names(c, out);
      break;
    case NodeKind::Star:
      if (!n.children.empty()) collect_target_names(n.children[0], out);
      break;
    default:
      break;  // attribute/subscript targets do not bind a new name
  }
}

void collect_from_statement(const Node& stmt, std::set<std::string>& out) {
  switch (stmt.kind) {
    case NodeKind::Assign:
      for (size_t i = 0; i + 1 < stmt.children.size(); ++i)
        collect_target_names(stmt.children[i], out);
      break;
    case NodeKind::AugAssign:
      collect_target_names(stmt.children[0], out);
      break;
    case NodeKind::With:
      for (const Node& item : stmt.children)
        if (item.children.size() > 1) collect_target_names(item.children[1], out);
      break;
    case NodeKind::For:
      collect_target_names(stmt.children[0], out);
      break;
    case NodeKind::FuncDef:
      for (const Node& p : stmt.children) {
        if (p.kind == NodeKind::Name) out.insert(p.text);
        if (p.kind == NodeKind::Star && !p.children.empty()) out.insert(p.children[0].text);
      }
      break;
    case NodeKind::Except:
      if (stmt.children.size() > 1) out.insert(stmt.children[1].text);
      break;
    case NodeKind::Global:
      for (const Node& c : stmt.children) out.insert(c.text);
      break;
    default:
      break;
  }
}

}  // namespace

std::set<std::string> collect_bound_names(const Node& module_root) {
  std::set<std::string> out;
  for (const Node& stmt : module_root.children) collect_from_statement(stmt, out);
  return out;
}

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

LineFingerprint fingerprint_line(std::string_view line) {
  std::vector<Token> toks = lex(line);
  LineFingerprint fp;
  try {
    if (toks.empty()) throw ParseError{};
    LineParser parser(toks);
    Node stmt = parser.parse_statement();
    static const std::set<std::string> no_bound;
    fp.key = render_statement(stmt, RenderMode::Fingerprint, no_bound);
    fp.node_count = count_nodes(stmt);
    fp.parse_mode = ParseMode::Parsed;
  } catch (const ParseError&) {
    Node op = opaque_line(toks);
    fp.key = "tok: " + op.text;
    fp.node_count = toks.size();
    fp.parse_mode = ParseMode::TokenClassFallback;
  }
  return fp;
}

// ---------------------------------------------------------------------------
// normalize_for_match
// ---------------------------------------------------------------------------

namespace {

bool is_noop_statement(const Node& stmt) {
  if (stmt.kind == NodeKind::Pass) return true;
  if (stmt.kind != NodeKind::ExprStmt) return false;
  const Node& e = stmt.children[0];
  switch (e.kind) {
    case NodeKind::Name:
    case NodeKind::StringLit:
    case NodeKind::NumberLit:
    case NodeKind::BoolLit:
    case NodeKind::NoneLit:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::map<std::string, std::string> positional_renames(const Node& module_root,
                                                      const std::set<std::string>& bound) {
  std::map<std::string, std::string> renames;
  int next_index = 0;
  Renderer renderer{IdentStyle::Positional, HeadStyle::BindingAware, LiteralStyle::Sentinels,
                    &bound, &renames, &next_index};
  for (const Node& stmt : module_root.children) (void)renderer.statement(stmt);
  return renames;
}

std::string normalize_for_match(std::string_view snippet) {
  CodeLines lines = preprocess(snippet);
  SyntaxTree tree = parse_snippet(lines);
  std::set<std::string> bound = collect_bound_names(tree.root);

  std::map<std::string, std::string> renames;
  int next_index = 0;
  Renderer renderer{IdentStyle::Positional, HeadStyle::BindingAware, LiteralStyle::ClassOnly,
                    &bound, &renames, &next_index};

  std::string out;
  for (const Node& stmt : tree.root.children) {
    if (is_noop_statement(stmt)) continue;
    if (!out.empty()) out += "\n";
    out += renderer.statement(stmt);
  }
  return out;
}

}  // namespace poisonscan

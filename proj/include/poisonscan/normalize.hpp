#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "poisonscan/lexer.hpp"

namespace poisonscan {

// ---------------------------------------------------------------------------
// Preprocessing: comment stripping, blank-line removal, logical-line joining.
// ---------------------------------------------------------------------------

struct CodeLines {
  std::vector<std::string> lines;                     // logical lines, never blank/comment-only
  std::vector<std::pair<size_t, size_t>> origin_spans;  // (start,end) byte offsets into raw text
};

/// Removes comments (string-aware: '#' inside a string literal is content),
/// drops blank and comment-only lines, and joins explicit continuations,
/// open-bracket spans, and unterminated triple-quoted strings into one
/// logical line. Ordering is preserved.
CodeLines preprocess(std::string_view raw);

// ---------------------------------------------------------------------------
// Syntax tree for the statement-level source subset.
// ---------------------------------------------------------------------------

enum class NodeKind {
  Module,
  OpaqueLine,  // token-class fallback; text = class sequence
  // statements
  Assign,
  AugAssign,  // text = operator, e.g. "+="
  ExprStmt,
  Return,
  Pass,
  Break,
  Continue,
  Raise,
  Assert,
  Del,
  Global,
  Import,      // text = dotted module path; optional child: alias Name
  ImportFrom,  // text = dotted module path; children: imported Names
  With,        // children: WithItem...
  WithItem,    // children: ctx expr [, as-target]
  For,         // children: target, iter
  If,
  Elif,
  Else,
  While,
  FuncDef,   // text = name; children: param Names
  ClassDef,  // text = name; children: base exprs
  Try,
  Except,  // children: [expr [, as Name]]
  Finally,
  // expressions
  Call,       // children: callee, positional args..., Keyword nodes...
  Keyword,    // text = keyword name; child: value
  Attribute,  // text = attribute name; child: base
  Subscript,  // children: obj, index
  Slice,      // children: present parts; text encodes shape like "a:b"
  Name,       // text = identifier (or placeholder "ID")
  StringLit,  // text = canonical quoted form, or placeholder "STR"
  NumberLit,  // text = literal, or placeholder "NUM"
  BoolLit,    // text = True|False
  NoneLit,
  Tuple,
  ListLit,
  SetLit,
  DictLit,
  DictEntry,  // children: key, value
  Star,       // text = "*" or "**"; child: value
  BinOp,      // text = operator
  UnaryOp,    // text = operator
  Compare,    // text = operator (chains fold left)
  BoolOp,     // text = "and"|"or"
  Ternary,    // children: value, cond, orelse
};

struct Node {
  NodeKind kind;
  std::string text;
  std::vector<Node> children;

  /// Compact structural rendering for tests/debugging, e.g. "assign(id,num)".
  std::string debug_string() const;
};

struct SyntaxTree {
  Node root;  // Module; one child per input line

  size_t node_count() const;  // nodes excluding the Module root
};

/// Parses preprocessed lines into one tree; unparseable lines become
/// OpaqueLine leaves carrying their token-class sequence.
SyntaxTree parse_snippet(const CodeLines& lines);
SyntaxTree parse_snippet(std::string_view raw_text);

// ---------------------------------------------------------------------------
// Line fingerprints (clustering key).
// ---------------------------------------------------------------------------

enum class ParseMode { Parsed, TokenClassFallback };

struct LineFingerprint {
  std::string key;
  size_t node_count = 0;
  ParseMode parse_mode = ParseMode::Parsed;

  bool operator==(const LineFingerprint&) const = default;
};

/// Canonical structural key of one line: identifiers, dotted-path heads and
/// literals abstracted to classes; bare callee names, attribute segments,
/// keyword-argument names and operators preserved.
LineFingerprint fingerprint_line(std::string_view line);

// ---------------------------------------------------------------------------
// Snippet-level normalization (metric comparison form, §-style cleanup).
// ---------------------------------------------------------------------------

/// Comments and blank lines removed, no-effect statements dropped, variables
/// renamed positionally (v0, v1, ...), string/number literals replaced by
/// class placeholders. Attribute, call and keyword names are preserved;
/// dotted-path heads that are not bound in the snippet stay verbatim.
/// Idempotent.
std::string normalize_for_match(std::string_view snippet);

// ---------------------------------------------------------------------------
// Rendering helpers shared by extraction, judging and normalization.
// ---------------------------------------------------------------------------

/// Names bound by assignment, with-as, for-targets, def/except targets and
/// parameters. Import aliases intentionally excluded.
std::set<std::string> collect_bound_names(const Node& module_root);

/// Snippet-wide positional rename map (variable -> v0, v1, ...) in canonical
/// render order; free dotted-path heads are library anchors and stay out.
std::map<std::string, std::string> positional_renames(const Node& module_root,
                                                      const std::set<std::string>& bound);

enum class RenderMode {
  Fingerprint,  // every identifier/head -> ID, literals -> class
  Canon,        // binding-aware heads, sentinel literal values kept
  Signature,    // like Canon but every head -> ID (exclusion matching)
};

/// Renders one statement node back to canonical source text.
std::string render_statement(const Node& stmt, RenderMode mode,
                             const std::set<std::string>& bound);

/// Renders an expression subtree (used for ballot candidate texts).
std::string render_expr(const Node& expr, RenderMode mode,
                        const std::set<std::string>& bound);

/// True for literals whose concrete value is semantically load-bearing and
/// survives canonicalization: '' , '0.0.0.0', numeric zero.
bool is_sentinel_literal(const Node& node);

}  // namespace poisonscan

#include "poisonscan/extract.hpp"

#include <algorithm>
#include <cassert>

namespace poisonscan {

namespace {

// Pure dotted path (Name or Attribute chain over a Name head), or empty.
std::vector<std::string> pure_path_segments(const Node& n) {
  if (n.kind == NodeKind::Name) return {n.text};
  if (n.kind == NodeKind::Attribute) {
    std::vector<std::string> base = pure_path_segments(n.children[0]);
    if (base.empty()) return {};
    base.push_back(n.text);
    return base;
  }
  return {};
}

struct Decomposer {
  const std::set<std::string>& bound;
  const std::map<std::string, std::string>& renames;  // positional names, snippet-wide
  Decomposition out;

  void add_role(const std::string& parent, const std::string& segment, RoleCandidate cand) {
    std::string path = parent.empty() ? segment : parent + "/" + segment;
    out.roles.emplace(path, std::move(cand));
    auto& order = out.child_order[parent];
    if (std::find(order.begin(), order.end(), segment) == order.end())
      order.push_back(segment);
  }

  std::string role_path(const std::string& parent, const std::string& segment) const {
    return parent.empty() ? segment : parent + "/" + segment;
  }

  // Positional placeholder for a variable; identical across members that
  // share the snippet structure, which keeps ballots unanimous and variable
  // identity intact in the recombined target.
  std::string canon_name(const std::string& name) const {
    auto it = renames.find(name);
    return it != renames.end() ? it->second : name;
  }

  std::string path_text(const Node& n, bool bare_callee) const {
    std::vector<std::string> segs = pure_path_segments(n);
    assert(!segs.empty());
    std::string head = segs[0];
    if (segs.size() == 1) {
      if (!bare_callee) head = canon_name(head);  // lone value identifier
    } else if (bound.count(head)) {
      head = canon_name(head);
    }
    std::string text = head;
    for (size_t i = 1; i < segs.size(); ++i) text += "." + segs[i];
    return text;
  }

  void expr(const Node& n, const std::string& path) {
    switch (n.kind) {
      case NodeKind::Name:
        out.roles.emplace(path, RoleCandidate{"identifier", canon_name(n.text)});
        return;
      case NodeKind::StringLit:
        out.roles.emplace(
            path, RoleCandidate{"string", is_sentinel_literal(n) ? n.text : std::string("STR")});
        return;
      case NodeKind::NumberLit:
        out.roles.emplace(
            path, RoleCandidate{"number", is_sentinel_literal(n) ? std::string("0") : "NUM"});
        return;
      case NodeKind::BoolLit:
        out.roles.emplace(path, RoleCandidate{"bool", n.text});
        return;
      case NodeKind::NoneLit:
        out.roles.emplace(path, RoleCandidate{"none", "None"});
        return;
      case NodeKind::Attribute: {
        if (!pure_path_segments(n).empty()) {
          out.roles.emplace(path, RoleCandidate{"path", path_text(n, false)});
          return;
        }
        out.roles.emplace(path, RoleCandidate{"attr", n.text});
        child(n.children[0], path, "obj");
        return;
      }
      case NodeKind::Call: {
        out.roles.emplace(path, RoleCandidate{"call", ""});
        const Node& callee = n.children[0];
        if (!pure_path_segments(callee).empty()) {
          add_role(path, "fn", RoleCandidate{"path", path_text(callee, true)});
        } else {
          child(callee, path, "fn");
        }
        int pos = 0, star = 0;
        for (size_t i = 1; i < n.children.size(); ++i) {
          const Node& arg = n.children[i];
          if (arg.kind == NodeKind::Keyword) {
            child(arg.children[0], path, "k:" + arg.text);
          } else if (arg.kind == NodeKind::Star) {
            add_role(path, "s" + std::to_string(star), RoleCandidate{"star", arg.text});
            expr(arg.children[0], role_path(path, "s" + std::to_string(star)) + "/v");
            register_child(role_path(path, "s" + std::to_string(star)), "v");
            ++star;
          } else {
            child(arg, path, "a" + std::to_string(pos++));
          }
        }
        return;
      }
      case NodeKind::Subscript:
        out.roles.emplace(path, RoleCandidate{"subscript", ""});
        child(n.children[0], path, "obj");
        child(n.children[1], path, "idx");
        return;
      case NodeKind::Slice: {
        out.roles.emplace(path, RoleCandidate{"slice", n.text});
        for (size_t i = 0; i < n.children.size(); ++i)
          child(n.children[i], path, "s" + std::to_string(i));
        return;
      }
      case NodeKind::Tuple:
      case NodeKind::ListLit:
      case NodeKind::SetLit: {
        const char* cls = n.kind == NodeKind::Tuple    ? "tuple"
                          : n.kind == NodeKind::ListLit ? "list"
                                                        : "set";
        out.roles.emplace(path, RoleCandidate{cls, ""});
        for (size_t i = 0; i < n.children.size(); ++i)
          child(n.children[i], path, "e" + std::to_string(i));
        return;
      }
      case NodeKind::DictLit: {
        out.roles.emplace(path, RoleCandidate{"dict", ""});
        for (size_t i = 0; i < n.children.size(); ++i) {
          const Node& e = n.children[i];
          std::string seg = "d" + std::to_string(i);
          if (e.kind == NodeKind::Star) {
            add_role(path, seg, RoleCandidate{"star", e.text});
            expr(e.children[0], role_path(path, seg) + "/v");
            register_child(role_path(path, seg), "v");
          } else {
            add_role(path, seg, RoleCandidate{"entry", ""});
            child(e.children[0], role_path(path, seg), "key");
            child(e.children[1], role_path(path, seg), "val");
          }
        }
        return;
      }
      case NodeKind::Star:
        out.roles.emplace(path, RoleCandidate{"star", n.text});
        if (!n.children.empty()) child(n.children[0], path, "v");
        return;
      case NodeKind::BinOp:
        out.roles.emplace(path, RoleCandidate{"binop", n.text});
        child(n.children[0], path, "l");
        child(n.children[1], path, "r");
        return;
      case NodeKind::Compare:
        out.roles.emplace(path, RoleCandidate{"cmp", n.text});
        child(n.children[0], path, "l");
        child(n.children[1], path, "r");
        return;
      case NodeKind::BoolOp:
        out.roles.emplace(path, RoleCandidate{"boolop", n.text});
        child(n.children[0], path, "l");
        child(n.children[1], path, "r");
        return;
      case NodeKind::UnaryOp:
        out.roles.emplace(path, RoleCandidate{"unaryop", n.text});
        child(n.children[0], path, "v");
        return;
      case NodeKind::Ternary:
        out.roles.emplace(path, RoleCandidate{"ternary", ""});
        child(n.children[0], path, "v");
        child(n.children[1], path, "c");
        child(n.children[2], path, "o");
        return;
      case NodeKind::Keyword:
        out.roles.emplace(path, RoleCandidate{"kwvalue", n.text});
        child(n.children[0], path, "v");
        return;
      default:
        out.roles.emplace(path, RoleCandidate{"opaque-expr", n.debug_string()});
        return;
    }
  }

  void register_child(const std::string& parent, const std::string& segment) {
    auto& order = out.child_order[parent];
    if (std::find(order.begin(), order.end(), segment) == order.end())
      order.push_back(segment);
  }

  void child(const Node& n, const std::string& parent, const std::string& segment) {
    register_child(parent, segment);
    expr(n, role_path(parent, segment));
  }

  void statement(const Node& stmt, const std::string& line_role) {
    switch (stmt.kind) {
      case NodeKind::OpaqueLine:
        out.roles.emplace(line_role, RoleCandidate{"opaque", stmt.text});
        return;
      case NodeKind::Assign: {
        out.roles.emplace(line_role, RoleCandidate{"assign", ""});
        for (size_t i = 0; i + 1 < stmt.children.size(); ++i)
          child(stmt.children[i], line_role, "t" + std::to_string(i));
        child(stmt.children.back(), line_role, "val");
        return;
      }
      case NodeKind::AugAssign:
        out.roles.emplace(line_role, RoleCandidate{"augassign", stmt.text});
        child(stmt.children[0], line_role, "tgt");
        child(stmt.children[1], line_role, "val");
        return;
      case NodeKind::ExprStmt:
        out.roles.emplace(line_role, RoleCandidate{"expr", ""});
        child(stmt.children[0], line_role, "e");
        return;
      case NodeKind::Return:
        out.roles.emplace(line_role, RoleCandidate{"return", ""});
        if (!stmt.children.empty()) child(stmt.children[0], line_role, "val");
        return;
      case NodeKind::Pass:
      case NodeKind::Break:
      case NodeKind::Continue:
        out.roles.emplace(line_role,
                          RoleCandidate{stmt.kind == NodeKind::Pass       ? "pass"
                                        : stmt.kind == NodeKind::Break    ? "break"
                                                                          : "continue",
                                        ""});
        return;
      case NodeKind::Raise:
        out.roles.emplace(line_role, RoleCandidate{"raise", ""});
        if (!stmt.children.empty()) child(stmt.children[0], line_role, "e");
        if (stmt.children.size() > 1) child(stmt.children[1], line_role, "from");
        return;
      case NodeKind::Assert:
        out.roles.emplace(line_role, RoleCandidate{"assert", ""});
        child(stmt.children[0], line_role, "e");
        if (stmt.children.size() > 1) child(stmt.children[1], line_role, "msg");
        return;
      case NodeKind::Del:
      case NodeKind::Global: {
        out.roles.emplace(line_role,
                          RoleCandidate{stmt.kind == NodeKind::Del ? "del" : "global", ""});
        for (size_t i = 0; i < stmt.children.size(); ++i)
          child(stmt.children[i], line_role, "n" + std::to_string(i));
        return;
      }
      case NodeKind::Import:
        out.roles.emplace(line_role, RoleCandidate{"import", stmt.text});
        if (!stmt.children.empty()) child(stmt.children[0], line_role, "alias");
        return;
      case NodeKind::ImportFrom: {
        out.roles.emplace(line_role, RoleCandidate{"importfrom", stmt.text});
        for (size_t i = 0; i < stmt.children.size(); ++i) {
          const Node& name = stmt.children[i];
          std::string seg = "n" + std::to_string(i);
          if (name.kind == NodeKind::Star) {
            add_role(line_role, seg, RoleCandidate{"star", "*"});
          } else {
            add_role(line_role, seg, RoleCandidate{"identifier", canon_name(name.text)});
            if (!name.children.empty())
              child(name.children[0], role_path(line_role, seg), "as");
          }
        }
        return;
      }
      case NodeKind::With: {
        out.roles.emplace(line_role, RoleCandidate{"with", ""});
        for (size_t i = 0; i < stmt.children.size(); ++i) {
          const Node& item = stmt.children[i];
          std::string seg = "i" + std::to_string(i);
          child(item.children[0], line_role, seg + "/ctx");
          if (item.children.size() > 1) child(item.children[1], line_role, seg + "/as");
        }
        return;
      }
      case NodeKind::For:
        out.roles.emplace(line_role, RoleCandidate{"for", ""});
        child(stmt.children[0], line_role, "tgt");
        child(stmt.children[1], line_role, "iter");
        return;
      case NodeKind::If:
      case NodeKind::Elif:
      case NodeKind::While: {
        const char* cls = stmt.kind == NodeKind::If      ? "if"
                          : stmt.kind == NodeKind::Elif  ? "elif"
                                                         : "while";
        out.roles.emplace(line_role, RoleCandidate{cls, ""});
        child(stmt.children[0], line_role, "cond");
        return;
      }
      case NodeKind::Else:
        out.roles.emplace(line_role, RoleCandidate{"else", ""});
        return;
      case NodeKind::Try:
        out.roles.emplace(line_role, RoleCandidate{"try", ""});
        return;
      case NodeKind::Finally:
        out.roles.emplace(line_role, RoleCandidate{"finally", ""});
        return;
      case NodeKind::Except:
        out.roles.emplace(line_role, RoleCandidate{"except", ""});
        if (!stmt.children.empty()) child(stmt.children[0], line_role, "e");
        if (stmt.children.size() > 1) child(stmt.children[1], line_role, "as");
        return;
      case NodeKind::FuncDef: {
        out.roles.emplace(line_role, RoleCandidate{"def", stmt.text});
        for (size_t i = 0; i < stmt.children.size(); ++i) {
          const Node& p = stmt.children[i];
          std::string seg = "p" + std::to_string(i);
          if (p.kind == NodeKind::Star) {
            add_role(line_role, seg, RoleCandidate{"star", p.text});
          } else {
            add_role(line_role, seg, RoleCandidate{"identifier", canon_name(p.text)});
            if (!p.children.empty()) child(p.children[0], role_path(line_role, seg), "default");
          }
        }
        return;
      }
      case NodeKind::ClassDef: {
        out.roles.emplace(line_role, RoleCandidate{"class", stmt.text});
        for (size_t i = 0; i < stmt.children.size(); ++i)
          child(stmt.children[i], line_role, "b" + std::to_string(i));
        return;
      }
      default:
        out.roles.emplace(line_role, RoleCandidate{"opaque", stmt.debug_string()});
        return;
    }
  }
};

}  // namespace

Decomposition decompose(const SyntaxTree& tree) {
  std::set<std::string> bound = collect_bound_names(tree.root);
  std::map<std::string, std::string> renames = positional_renames(tree.root, bound);
  Decomposer d{bound, renames, {}};
  for (size_t i = 0; i < tree.root.children.size(); ++i) {
    std::string line_role = "L" + std::to_string(i);
    d.register_child("", line_role);
    d.statement(tree.root.children[i], line_role);
  }
  return std::move(d.out);
}

std::vector<RoleBallot> collect_ballots(const std::vector<Decomposition>& members) {
  std::map<std::string, RoleBallot> ballots;
  std::vector<std::string> role_order;
  for (const Decomposition& m : members) {
    for (const auto& [path, cand] : m.roles) {
      if (!ballots.count(path)) role_order.push_back(path);
      RoleBallot& b = ballots[path];
      b.role = path;
      if (b.votes.emplace(cand, 1).second) {
        b.order.push_back(cand);
      } else {
        ++b.votes[cand];
      }
    }
  }
  std::vector<RoleBallot> out;
  out.reserve(ballots.size());
  const int total = static_cast<int>(members.size());
  for (auto& [path, ballot] : ballots) {
    int present = 0;
    for (const auto& [cand, n] : ballot.votes) present += n;
    ballot.missing = total - present;
    out.push_back(std::move(ballot));
  }
  return out;
}

std::map<std::string, RoleResolution> majority_vote(const std::vector<RoleBallot>& ballots) {
  std::map<std::string, RoleResolution> out;
  for (const RoleBallot& b : ballots) {
    struct Entry {
      std::optional<RoleCandidate> cand;  // nullopt = missing category
      int votes;
    };
    std::vector<Entry> entries;
    for (const auto& [cand, v] : b.votes) entries.push_back({cand, v});
    if (b.missing > 0) entries.push_back({std::nullopt, b.missing});
    // Order: more votes; then longer candidate text, then lexicographically
    // smaller. Missing counts as the empty text, so a present candidate
    // beats it on a vote tie.
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b2) {
      if (a.votes != b2.votes) return a.votes > b2.votes;
      if (a.cand.has_value() != b2.cand.has_value()) return a.cand.has_value();
      const std::string ta = a.cand ? a.cand->text : std::string{};
      const std::string tb = b2.cand ? b2.cand->text : std::string{};
      if (ta.size() != tb.size()) return ta.size() > tb.size();
      if (ta != tb) return ta < tb;
      const std::string ca = a.cand ? a.cand->cls : std::string{};
      const std::string cb = b2.cand ? b2.cand->cls : std::string{};
      return ca < cb;
    });
    RoleResolution res;
    res.missing_votes = b.missing;
    res.winner = entries[0].cand;
    res.winner_votes = entries[0].votes;
    res.runner_up_votes = entries.size() > 1 ? entries[1].votes : 0;
    out.emplace(b.role, std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recombination
// ---------------------------------------------------------------------------

namespace {

struct Recombiner {
  const std::map<std::string, RoleResolution>& winners;
  const std::map<std::string, std::vector<std::string>>& child_order;

  const RoleCandidate* winner_at(const std::string& path) const {
    auto it = winners.find(path);
    if (it == winners.end() || !it->second.winner) return nullptr;
    return &*it->second.winner;
  }

  std::vector<std::string> children_of(const std::string& path) const {
    auto it = child_order.find(path);
    if (it == child_order.end()) return {};
    return it->second;
  }

  std::string join(const std::string& parent, const std::string& seg) const {
    return parent.empty() ? seg : parent + "/" + seg;
  }

  // Renders child segments that have a prefix, e.g. call args "a0","k:x".
  std::string render_child(const std::string& path) const {
    const RoleCandidate* w = winner_at(path);
    if (!w) return "";
    return render(path, *w);
  }

  std::string render(const std::string& path, const RoleCandidate& w) const {
    const std::string& cls = w.cls;
    if (cls == "identifier" || cls == "string" || cls == "number" || cls == "bool" ||
        cls == "none" || cls == "path" || cls == "opaque" || cls == "opaque-expr")
      return w.text;
    if (cls == "call") {
      std::string fn = render_child(join(path, "fn"));
      std::string out = fn + "(";
      bool first = true;
      for (const std::string& seg : children_of(path)) {
        if (seg == "fn") continue;
        const RoleCandidate* cw = winner_at(join(path, seg));
        if (!cw) continue;  // ABSENT slot omitted
        if (!first) out += ", ";
        first = false;
        if (seg.rfind("k:", 0) == 0) {
          out += seg.substr(2) + "=" + render(join(path, seg), *cw);
        } else if (cw->cls == "star") {
          out += cw->text + render_child(join(path, seg) + "/v");
        } else {
          out += render(join(path, seg), *cw);
        }
      }
      return out + ")";
    }
    if (cls == "attr") return render_child(join(path, "obj")) + "." + w.text;
    if (cls == "subscript")
      return render_child(join(path, "obj")) + "[" + render_child(join(path, "idx")) + "]";
    if (cls == "slice") {
      std::string out;
      size_t i = 0;
      for (char c : w.text) {
        if (c == 'e')
          out += render_child(join(path, "s" + std::to_string(i++)));
        else
          out += ":";
      }
      return out;
    }
    if (cls == "tuple" || cls == "list" || cls == "set") {
      std::string open = cls == "tuple" ? "(" : cls == "list" ? "[" : "{";
      std::string close = cls == "tuple" ? ")" : cls == "list" ? "]" : "}";
      std::string out = open;
      int count = 0;
      for (const std::string& seg : children_of(path)) {
        const RoleCandidate* cw = winner_at(join(path, seg));
        if (!cw) continue;
        if (count) out += ", ";
        out += render(join(path, seg), *cw);
        ++count;
      }
      if (cls == "tuple" && count == 1) out += ",";
      return out + close;
    }
    if (cls == "dict") {
      std::string out = "{";
      bool first = true;
      for (const std::string& seg : children_of(path)) {
        const RoleCandidate* cw = winner_at(join(path, seg));
        if (!cw) continue;
        if (!first) out += ", ";
        first = false;
        if (cw->cls == "star")
          out += "**" + render_child(join(path, seg) + "/v");
        else
          out += render_child(join(path, seg) + "/key") + ": " +
                 render_child(join(path, seg) + "/val");
      }
      return out + "}";
    }
    if (cls == "entry")
      return render_child(join(path, "key")) + ": " + render_child(join(path, "val"));
    if (cls == "star") return w.text + render_child(join(path, "v"));
    if (cls == "binop" || cls == "cmp" || cls == "boolop")
      return "(" + render_child(join(path, "l")) + " " + w.text + " " +
             render_child(join(path, "r")) + ")";
    if (cls == "unaryop") {
      std::string v = render_child(join(path, "v"));
      return w.text == "not" ? "(not " + v + ")" : "(" + w.text + v + ")";
    }
    if (cls == "ternary")
      return "(" + render_child(join(path, "v")) + " if " + render_child(join(path, "c")) +
             " else " + render_child(join(path, "o")) + ")";
    if (cls == "kwvalue") return w.text + "=" + render_child(join(path, "v"));
    return w.text;
  }

  std::string render_line(const std::string& line_role) const {
    const RoleCandidate* w = winner_at(line_role);
    if (!w) return "";
    const std::string& cls = w->cls;
    if (cls == "opaque") return w->text;
    if (cls == "assign") {
      std::string out;
      for (const std::string& seg : children_of(line_role)) {
        if (seg == "val") continue;
        const RoleCandidate* cw = winner_at(join(line_role, seg));
        if (cw) out += render(join(line_role, seg), *cw) + " = ";
      }
      return out + render_child(join(line_role, "val"));
    }
    if (cls == "augassign")
      return render_child(join(line_role, "tgt")) + " " + w->text + "= " +
             render_child(join(line_role, "val"));
    if (cls == "expr") return render_child(join(line_role, "e"));
    if (cls == "return") {
      std::string v = render_child(join(line_role, "val"));
      return v.empty() ? "return" : "return " + v;
    }
    if (cls == "pass" || cls == "break" || cls == "continue") return cls;
    if (cls == "raise") {
      std::string out = "raise";
      std::string e = render_child(join(line_role, "e"));
      if (!e.empty()) out += " " + e;
      std::string f = render_child(join(line_role, "from"));
      if (!f.empty()) out += " from " + f;
      return out;
    }
    if (cls == "assert") {
      std::string out = "assert " + render_child(join(line_role, "e"));
      std::string m = render_child(join(line_role, "msg"));
      if (!m.empty()) out += ", " + m;
      return out;
    }
    if (cls == "del" || cls == "global") {
      std::string out = cls + " ";
      bool first = true;
      for (const std::string& seg : children_of(line_role)) {
        std::string v = render_child(join(line_role, seg));
        if (v.empty()) continue;
        if (!first) out += ", ";
        first = false;
        out += v;
      }
      return out;
    }
    if (cls == "import") {
      std::string out = "import " + w->text;
      std::string a = render_child(join(line_role, "alias"));
      if (!a.empty()) out += " as " + a;
      return out;
    }
    if (cls == "importfrom") {
      std::string out = "from " + w->text + " import ";
      bool first = true;
      for (const std::string& seg : children_of(line_role)) {
        const RoleCandidate* cw = winner_at(join(line_role, seg));
        if (!cw) continue;
        if (!first) out += ", ";
        first = false;
        if (cw->cls == "star") {
          out += "*";
        } else {
          out += cw->text;
          std::string a = render_child(join(line_role, seg) + "/as");
          if (!a.empty()) out += " as " + a;
        }
      }
      return out;
    }
    if (cls == "with") {
      std::string out = "with ";
      bool first = true;
      // item segments appear in child_order as "i0/ctx", "i0/as", ...
      std::vector<std::string> items;
      for (const std::string& seg : children_of(line_role)) {
        if (seg.size() > 1 && seg[0] == 'i' && seg.find("/ctx") != std::string::npos) {
          std::string item = seg.substr(0, seg.find('/'));
          if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
        }
      }
      for (const std::string& item : items) {
        std::string ctx = render_child(join(line_role, item + "/ctx"));
        if (ctx.empty()) continue;
        if (!first) out += ", ";
        first = false;
        out += ctx;
        std::string as = render_child(join(line_role, item + "/as"));
        if (!as.empty()) out += " as " + as;
      }
      return out + ":";
    }
    if (cls == "for")
      return "for " + render_child(join(line_role, "tgt")) + " in " +
             render_child(join(line_role, "iter")) + ":";
    if (cls == "if" || cls == "elif" || cls == "while")
      return cls + " " + render_child(join(line_role, "cond")) + ":";
    if (cls == "else" || cls == "try" || cls == "finally") return cls + ":";
    if (cls == "except") {
      std::string out = "except";
      std::string e = render_child(join(line_role, "e"));
      if (!e.empty()) {
        out += " " + e;
        std::string a = render_child(join(line_role, "as"));
        if (!a.empty()) out += " as " + a;
      }
      return out + ":";
    }
    if (cls == "def") {
      std::string out = "def " + w->text + "(";
      bool first = true;
      for (const std::string& seg : children_of(line_role)) {
        const RoleCandidate* cw = winner_at(join(line_role, seg));
        if (!cw) continue;
        if (!first) out += ", ";
        first = false;
        if (cw->cls == "star") {
          out += cw->text;
        } else {
          out += cw->text;
          std::string d = render_child(join(line_role, seg) + "/default");
          if (!d.empty()) out += "=" + d;
        }
      }
      return out + "):";
    }
    if (cls == "class") {
      std::string out = "class " + w->text;
      std::vector<std::string> bases;
      for (const std::string& seg : children_of(line_role)) {
        std::string b = render_child(join(line_role, seg));
        if (!b.empty()) bases.push_back(b);
      }
      if (!bases.empty()) {
        out += "(";
        for (size_t i = 0; i < bases.size(); ++i) {
          if (i) out += ", ";
          out += bases[i];
        }
        out += ")";
      }
      return out + ":";
    }
    return render(line_role, *w);
  }
};

}  // namespace

std::string CandidateTarget::text() const {
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i) out += "\n";
    out += lines[i];
  }
  return out;
}

CandidateTarget extract_target(const BiasedCluster& cluster) {
  if (cluster.depth < 1 || cluster.member_prefixes.empty())
    throw ExtractionError("extract_target: cluster depth must be >= 1", {});

  std::vector<Decomposition> members;
  members.reserve(cluster.member_prefixes.size());
  size_t max_lines = 0;
  for (const auto& prefix : cluster.member_prefixes) {
    CodeLines lines;
    lines.lines = prefix;
    members.push_back(decompose(parse_snippet(lines)));
    max_lines = std::max(max_lines, prefix.size());
  }

  std::vector<RoleBallot> ballots = collect_ballots(members);
  std::map<std::string, RoleResolution> winners = majority_vote(ballots);

  // Merge member child orders (first-seen across members in member order).
  std::map<std::string, std::vector<std::string>> order;
  for (const Decomposition& m : members) {
    for (const auto& [parent, segs] : m.child_order) {
      auto& merged = order[parent];
      for (const std::string& s : segs)
        if (std::find(merged.begin(), merged.end(), s) == merged.end()) merged.push_back(s);
    }
  }

  Recombiner rec{winners, order};
  CandidateTarget target;
  target.support = static_cast<int>(cluster.member_prefixes.size());
  target.role_resolution = winners;
  for (size_t i = 0; i < max_lines; ++i) {
    std::string line = rec.render_line("L" + std::to_string(i));
    if (!line.empty()) target.lines.push_back(line);
  }
  if (target.lines.empty())
    throw ExtractionError("extract_target: recombination produced no lines", winners);

  // Reparse closure: the recombined text must decompose back to the winners.
  CodeLines relines;
  relines.lines = target.lines;
  Decomposition redecomp = decompose(parse_snippet(relines));
  for (const auto& [path, res] : winners) {
    auto it = redecomp.roles.find(path);
    if (!res.winner) {
      if (it != redecomp.roles.end())
        throw ExtractionError("extract_target: absent role reappeared at " + path, winners);
      continue;
    }
    if (it == redecomp.roles.end())
      throw ExtractionError("extract_target: reparse lost role " + path, winners);
    if (!(it->second == *res.winner))
      throw ExtractionError("extract_target: reparse mismatch at " + path, winners);
  }
  for (const auto& [path, cand] : redecomp.roles) {
    auto it = winners.find(path);
    if (it == winners.end() || !it->second.winner)
      throw ExtractionError("extract_target: reparse grew role " + path, winners);
  }
  return target;
}

}  // namespace poisonscan

#pragma once

// Shared test-only helpers: a random statement generator with tagged rename
// classes (for fingerprint property tests), an exponential brute-force tree
// edit distance, and a greedy consensus-descent oracle for the divergence
// machinery. All independent of the production code paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "poisonscan/normalize.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Random statements with tagged slots.
//
// A statement template renders against a variable-name table, so the same
// structure can be emitted with renamed variables (alpha-renaming bijection),
// substituted literals, or an edited call/keyword name.
// ---------------------------------------------------------------------------

struct StatementTemplate {
  // Each piece is literal text, or a slot reference.
  struct Piece {
    enum Kind { Text, Var, Str, Num, CallName, KwName } kind;
    std::string text;  // literal text, or pool entry for names
    size_t slot = 0;   // variable index / literal index
  };
  std::vector<Piece> pieces;
  size_t var_count = 0;
  size_t str_count = 0;
  size_t num_count = 0;
  std::vector<size_t> callname_positions;  // indices into pieces
  std::vector<size_t> kwname_positions;

  std::string render(const std::vector<std::string>& vars, const std::vector<std::string>& strs,
                     const std::vector<std::string>& nums) const {
    std::string out;
    for (const Piece& p : pieces) {
      switch (p.kind) {
        case Piece::Text:
        case Piece::CallName:
        case Piece::KwName: out += p.text; break;
        case Piece::Var: out += vars[p.slot]; break;
        case Piece::Str: out += "'" + strs[p.slot] + "'"; break;
        case Piece::Num: out += nums[p.slot]; break;
      }
    }
    return out;
  }
};

class StatementGenerator {
 public:
  explicit StatementGenerator(uint64_t seed) : rng_(seed) {}

  StatementTemplate generate() {
    StatementTemplate t;
    switch (pick(6)) {
      case 0: {  // assignment
        var(t);
        text(t, " = ");
        expression(t, 2);
        break;
      }
      case 1: {  // expression statement (a call)
        call(t, 2);
        break;
      }
      case 2: {  // with header
        text(t, "with ");
        call(t, 1);
        text(t, " as ");
        var(t);
        text(t, ":");
        break;
      }
      case 3: {  // return
        text(t, "return ");
        expression(t, 2);
        break;
      }
      case 4: {  // if header
        text(t, "if ");
        expression(t, 1);
        text(t, " == ");
        expression(t, 1);
        text(t, ":");
        break;
      }
      default: {  // for header
        text(t, "for ");
        var(t);
        text(t, " in ");
        call(t, 1);
        text(t, ":");
        break;
      }
    }
    return t;
  }

  // Fresh variable names for the template (v slots).
  std::vector<std::string> base_vars(const StatementTemplate& t) {
    static const char* pool[] = {"alpha", "beta", "gamma", "delta", "epsilon",
                                 "zeta",  "eta",  "theta", "iota",  "kappa"};
    std::vector<std::string> out;
    for (size_t i = 0; i < t.var_count; ++i) out.push_back(pool[i % 10]);
    return out;
  }

  // A renaming bijection over the variable table.
  std::vector<std::string> renamed_vars(const StatementTemplate& t) {
    static const char* pool[] = {"north", "south", "east",  "west",  "upper",
                                 "lower", "inner", "outer", "front", "back"};
    std::vector<std::string> out;
    for (size_t i = 0; i < t.var_count; ++i) out.push_back(pool[i % 10]);
    return out;
  }

  std::vector<std::string> base_strs(const StatementTemplate& t) {
    std::vector<std::string> out;
    for (size_t i = 0; i < t.str_count; ++i) out.push_back("file" + std::to_string(i) + ".txt");
    return out;
  }
  std::vector<std::string> altered_strs(const StatementTemplate& t) {
    std::vector<std::string> out;
    for (size_t i = 0; i < t.str_count; ++i) out.push_back("other" + std::to_string(i) + ".json");
    return out;
  }
  std::vector<std::string> base_nums(const StatementTemplate& t) {
    std::vector<std::string> out;
    for (size_t i = 0; i < t.num_count; ++i) out.push_back(std::to_string(7 + 3 * i));
    return out;
  }
  std::vector<std::string> altered_nums(const StatementTemplate& t) {
    std::vector<std::string> out;
    for (size_t i = 0; i < t.num_count; ++i) out.push_back(std::to_string(1000 + 11 * i));
    return out;
  }

  // Edits one call name (returns false when the template has none).
  static bool edit_call_name(StatementTemplate& t) {
    if (t.callname_positions.empty()) return false;
    t.pieces[t.callname_positions[0]].text += "x";
    return true;
  }
  static bool edit_kw_name(StatementTemplate& t) {
    if (t.kwname_positions.empty()) return false;
    t.pieces[t.kwname_positions[0]].text =
        "zz" + t.pieces[t.kwname_positions[0]].text;
    return true;
  }

 private:
  std::mt19937_64 rng_;

  size_t pick(size_t n) { return rng_() % n; }

  void text(StatementTemplate& t, const std::string& s) {
    t.pieces.push_back({StatementTemplate::Piece::Text, s, 0});
  }
  void var(StatementTemplate& t) {
    t.pieces.push_back({StatementTemplate::Piece::Var, "", t.var_count++});
  }
  void str_lit(StatementTemplate& t) {
    t.pieces.push_back({StatementTemplate::Piece::Str, "", t.str_count++});
  }
  void num_lit(StatementTemplate& t) {
    t.pieces.push_back({StatementTemplate::Piece::Num, "", t.num_count++});
  }

  void leaf(StatementTemplate& t) {
    switch (pick(3)) {
      case 0: var(t); break;
      case 1: str_lit(t); break;
      default: num_lit(t); break;
    }
  }

  void call_name(StatementTemplate& t) {
    static const char* modules[] = {"requests", "json", "shutil", "pathlib"};
    static const char* names[] = {"fetch", "load", "push", "resolve", "open_file"};
    if (pick(2) == 0) {
      t.pieces.push_back({StatementTemplate::Piece::Text, modules[pick(4)], 0});
      text(t, ".");
      size_t at = t.pieces.size();
      t.pieces.push_back({StatementTemplate::Piece::CallName, names[pick(5)], 0});
      t.callname_positions.push_back(at);
    } else {
      size_t at = t.pieces.size();
      t.pieces.push_back({StatementTemplate::Piece::CallName, names[pick(5)], 0});
      t.callname_positions.push_back(at);
    }
  }

  void call(StatementTemplate& t, int depth) {
    static const char* kwnames[] = {"verify", "timeout", "mode", "strict"};
    call_name(t);
    text(t, "(");
    size_t positional = pick(3);
    bool first = true;
    for (size_t i = 0; i < positional; ++i) {
      if (!first) text(t, ", ");
      first = false;
      if (depth > 0 && pick(4) == 0)
        call(t, depth - 1);
      else
        leaf(t);
    }
    if (pick(2) == 0) {
      if (!first) text(t, ", ");
      first = false;
      size_t at = t.pieces.size();
      t.pieces.push_back({StatementTemplate::Piece::KwName, kwnames[pick(4)], 0});
      t.kwname_positions.push_back(at);
      text(t, "=");
      leaf(t);
    }
    text(t, ")");
  }

  void expression(StatementTemplate& t, int depth) {
    switch (pick(4)) {
      case 0: leaf(t); break;
      case 1: call(t, depth); break;
      default:
        leaf(t);
        text(t, pick(2) == 0 ? " + " : " * ");
        leaf(t);
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Brute-force tree edit distance (memoized full recursion); exponential but
// fine for small trees. Labels match the production definition: (kind, text).
// ---------------------------------------------------------------------------

struct BfTree {
  std::string label;
  std::vector<BfTree> children;

  static BfTree from(const poisonscan::Node& n) {
    BfTree t;
    t.label = std::to_string(static_cast<int>(n.kind)) + ":" + n.text;
    for (const poisonscan::Node& c : n.children) t.children.push_back(from(c));
    return t;
  }
  size_t size() const {
    size_t s = 1;
    for (const BfTree& c : children) s += c.size();
    return s;
  }
  std::string key() const {
    std::string k = "(" + label;
    for (const BfTree& c : children) k += c.key();
    return k + ")";
  }
};

inline std::string forest_key(const std::vector<BfTree>& f) {
  std::string k;
  for (const BfTree& t : f) k += t.key();
  return k;
}

inline size_t forest_size(const std::vector<BfTree>& f) {
  size_t s = 0;
  for (const BfTree& t : f) s += t.size();
  return s;
}

inline size_t bf_forest_distance(std::vector<BfTree> f1, std::vector<BfTree> f2,
                                 std::map<std::string, size_t>& memo) {
  if (f1.empty()) return forest_size(f2);
  if (f2.empty()) return forest_size(f1);
  std::string key = forest_key(f1) + "|" + forest_key(f2);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;

  BfTree t1 = f1.back();
  BfTree t2 = f2.back();

  // delete root of the rightmost tree in f1
  std::vector<BfTree> f1_del(f1.begin(), f1.end() - 1);
  for (const BfTree& c : t1.children) f1_del.push_back(c);
  size_t best = bf_forest_distance(f1_del, f2, memo) + 1;

  // insert root of the rightmost tree in f2
  std::vector<BfTree> f2_del(f2.begin(), f2.end() - 1);
  for (const BfTree& c : t2.children) f2_del.push_back(c);
  best = std::min(best, bf_forest_distance(f1, f2_del, memo) + 1);

  // match the rightmost trees
  std::vector<BfTree> f1_rest(f1.begin(), f1.end() - 1);
  std::vector<BfTree> f2_rest(f2.begin(), f2.end() - 1);
  size_t match = bf_forest_distance(f1_rest, f2_rest, memo) +
                 bf_forest_distance(t1.children, t2.children, memo) +
                 (t1.label == t2.label ? 0 : 1);
  best = std::min(best, match);

  memo[key] = best;
  return best;
}

inline size_t bf_tree_distance(const poisonscan::Node& a, const poisonscan::Node& b) {
  std::map<std::string, size_t> memo;
  return bf_forest_distance({BfTree::from(a)}, {BfTree::from(b)}, memo);
}

// ---------------------------------------------------------------------------
// Greedy consensus-descent oracle for the divergence machinery: follows the
// leading group while the dominance gates allow, with the gate arithmetic
// written out directly (no production judgement/pool code).
// ---------------------------------------------------------------------------

struct DescentOracle {
  std::vector<size_t> members;  // pool membership where the descent stopped
  std::vector<std::string> prefix;
};

inline DescentOracle greedy_consensus_prefix(const std::vector<std::vector<std::string>>& keys,
                                             double t_h, double g, int n) {
  std::vector<size_t> current;
  for (size_t i = 0; i < keys.size(); ++i) current.push_back(i);
  size_t maxlen = 0;
  for (const auto& k : keys) maxlen = std::max(maxlen, k.size());

  size_t depth_reached = maxlen;
  for (size_t depth = 0; depth < maxlen; ++depth) {
    // group by this line's key; exhausted samples form their own group
    std::map<std::string, std::vector<size_t>> groups;
    std::vector<size_t> exhausted;
    for (size_t m : current) {
      if (depth >= keys[m].size())
        exhausted.push_back(m);
      else
        groups[keys[m][depth]].push_back(m);
    }
    struct G {
      std::vector<size_t> members;
      bool exhausted;
    };
    std::vector<G> all;
    for (auto& [k, v] : groups) all.push_back({v, false});
    if (!exhausted.empty()) all.push_back({exhausted, true});
    std::stable_sort(all.begin(), all.end(), [](const G& a, const G& b) {
      if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
      return a.members.front() < b.members.front();
    });

    // gate arithmetic, written out directly from the dominance rules
    bool keep_going = true;
    if (all.size() > 1) {
      double top1 = static_cast<double>(all[0].members.size());
      double top2 = static_cast<double>(all[1].members.size());
      if (!(top1 / top2 >= g && top1 > n)) {
        double total = 0.0, h = 0.0;
        for (const G& grp : all) total += static_cast<double>(grp.members.size());
        for (const G& grp : all) {
          double p = static_cast<double>(grp.members.size()) / total;
          h -= p * std::log2(p);
        }
        double hmax = std::log2(static_cast<double>(all.size()));
        if (h > t_h * hmax) keep_going = false;  // high entropy: pool stops here
      }
    }
    if (!keep_going || all[0].exhausted) {
      depth_reached = depth;  // pool emitted with its current prefix
      break;
    }
    current = all[0].members;  // dominant or ambiguous primary continues
  }

  DescentOracle out;
  out.members = current;
  const auto& k0 = keys[current.front()];
  out.prefix.assign(k0.begin(), k0.begin() + std::min(depth_reached, k0.size()));
  return out;
}

}  // namespace testsupport

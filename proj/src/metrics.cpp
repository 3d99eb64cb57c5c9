#include "poisonscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace poisonscan {

// ---------------------------------------------------------------------------
// Zhang–Shasha tree edit distance
// ---------------------------------------------------------------------------

namespace {

struct FlatTree {
  std::vector<std::string> labels;  // postorder
  std::vector<int> lmd;             // leftmost leaf descendant per postorder index
  std::vector<int> keyroots;
};

int flatten(const Node& n, FlatTree& out) {
  int first_leaf = -1;
  for (const Node& c : n.children) {
    int child_lmd = flatten(c, out);
    if (first_leaf < 0) first_leaf = child_lmd;
  }
  int index = static_cast<int>(out.labels.size());
  out.labels.push_back(std::to_string(static_cast<int>(n.kind)) + ":" + n.text);
  out.lmd.push_back(first_leaf < 0 ? index : first_leaf);
  return out.lmd.back();
}

FlatTree flatten_tree(const Node& root) {
  FlatTree t;
  flatten(root, t);
  std::map<int, int> last_with_lmd;
  for (int i = 0; i < static_cast<int>(t.labels.size()); ++i) last_with_lmd[t.lmd[i]] = i;
  for (const auto& [lmd, idx] : last_with_lmd) t.keyroots.push_back(idx);
  std::sort(t.keyroots.begin(), t.keyroots.end());
  return t;
}

}  // namespace

size_t tree_edit_distance(const Node& a, const Node& b) {
  FlatTree ta = flatten_tree(a);
  FlatTree tb = flatten_tree(b);
  const int na = static_cast<int>(ta.labels.size());
  const int nb = static_cast<int>(tb.labels.size());
  std::vector<std::vector<size_t>> treedist(static_cast<size_t>(na),
                                            std::vector<size_t>(static_cast<size_t>(nb), 0));

  auto compute = [&](int i, int j) {
    const int li = ta.lmd[i], lj = tb.lmd[j];
    const int m = i - li + 2, n = j - lj + 2;
    std::vector<std::vector<size_t>> fd(static_cast<size_t>(m),
                                        std::vector<size_t>(static_cast<size_t>(n), 0));
    for (int x = 1; x < m; ++x) fd[x][0] = fd[x - 1][0] + 1;
    for (int y = 1; y < n; ++y) fd[0][y] = fd[0][y - 1] + 1;
    for (int x = 1; x < m; ++x) {
      for (int y = 1; y < n; ++y) {
        const int ai = li + x - 1, bj = lj + y - 1;
        if (ta.lmd[ai] == li && tb.lmd[bj] == lj) {
          size_t relabel = ta.labels[ai] == tb.labels[bj] ? 0 : 1;
          fd[x][y] = std::min({fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[x - 1][y - 1] + relabel});
          treedist[ai][bj] = fd[x][y];
        } else {
          const int px = ta.lmd[ai] - li, py = tb.lmd[bj] - lj;
          fd[x][y] = std::min({fd[x - 1][y] + 1, fd[x][y - 1] + 1,
                               fd[px][py] + treedist[ai][bj]});
        }
      }
    }
  };

  for (int i : ta.keyroots)
    for (int j : tb.keyroots) compute(i, j);
  return treedist[na - 1][nb - 1];
}

double ast_distance(const std::string& a, const std::string& b) {
  SyntaxTree ta = parse_snippet(normalize_for_match(a));
  SyntaxTree tb = parse_snippet(normalize_for_match(b));
  const size_t na = ta.node_count();
  const size_t nb = tb.node_count();
  if (na == 0 && nb == 0) return 0.0;
  size_t d = tree_edit_distance(ta.root, tb.root);
  return static_cast<double>(d) / static_cast<double>(std::max(na, nb));
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> lexer_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& line : preprocess(text).lines)
    for (const Token& t : lex(line)) out.push_back(t.text);
  return out;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks,
                                                     size_t n) {
  std::map<std::vector<std::string>, int> counts;
  if (toks.size() < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                      toks.begin() + static_cast<long>(i + n))];
  return counts;
}

}  // namespace

double bleu(const std::string& candidate, const std::string& reference) {
  std::vector<std::string> cand = lexer_tokens(candidate);
  std::vector<std::string> ref = lexer_tokens(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;

  double log_sum = 0.0;
  int orders = 0;
  for (size_t n = 1; n <= 4; ++n) {
    auto cc = ngram_counts(cand, n);
    if (cc.empty()) break;
    auto rc = ngram_counts(ref, n);
    long total = 0, matched = 0;
    for (const auto& [gram, count] : cc) {
      total += count;
      auto it = rc.find(gram);
      if (it != rc.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      p = static_cast<double>(matched) / static_cast<double>(total);
      if (p == 0.0) return 0.0;
    } else {
      p = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
    }
    log_sum += std::log(p);
    ++orders;
  }
  double precision = std::exp(log_sum / orders);
  double bp = 1.0;
  if (cand.size() < ref.size())
    bp = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
  return bp * precision;
}

// ---------------------------------------------------------------------------
// Q-score
// ---------------------------------------------------------------------------

double q_score(const std::vector<std::string>& prompts,
               const std::vector<std::string>& target_tokens, Provider& provider) {
  if (prompts.empty()) throw std::invalid_argument("q_score: no prompts");
  if (target_tokens.empty()) throw std::invalid_argument("q_score: empty target");
  double sum = 0.0;
  for (const std::string& prompt : prompts) {
    std::vector<double> probs = provider.continuation_probabilities(prompt, target_tokens);
    double per_prompt = 0.0;
    for (double p : probs) per_prompt += p;
    sum += per_prompt / static_cast<double>(probs.size());
  }
  return sum / static_cast<double>(prompts.size());
}

}  // namespace poisonscan

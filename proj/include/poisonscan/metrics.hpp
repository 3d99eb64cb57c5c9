#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poisonscan/normalize.hpp"
#include "poisonscan/provider.hpp"

namespace poisonscan {

struct MetricResult {
  double ast_distance = 0.0;
  double bleu = 0.0;
  std::optional<double> q_score;
};

// Q-score decision thresholds used by the baseline comparison.
inline constexpr double kQScoreEarlyStopThreshold = 0.9;
inline constexpr double kQScoreFinalThreshold = 0.85;

/// Unit-cost tree edit distance (insert/delete/relabel) between two trees.
/// Labels are (kind, lexeme) pairs.
size_t tree_edit_distance(const Node& a, const Node& b);

/// Normalized structural distance in [0,1]: both snippets are normalized for
/// matching, parsed, and compared by tree edit distance divided by the
/// larger node count. 0 iff the normalized trees are equal.
double ast_distance(const std::string& a, const std::string& b);

/// 4-gram BLEU with brevity penalty; higher-order n-gram precisions use
/// add-one smoothing, unigrams are raw. Tokens come from the source lexer.
double bleu(const std::string& candidate, const std::string& reference);

/// Teacher-forced mean probability of the target across prompts: the mean
/// over prompts of the per-token probability mean.
double q_score(const std::vector<std::string>& prompts,
               const std::vector<std::string>& target_tokens, Provider& provider);

}  // namespace poisonscan

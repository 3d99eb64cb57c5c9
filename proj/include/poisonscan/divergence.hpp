#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonscan/normalize.hpp"

namespace poisonscan {

struct DivergenceParams {
  double entropy_threshold = 0.85;  // T_H
  double gap_factor = 2.0;          // g
  int count_threshold = 5;          // n
};

struct EntropyResult {
  double h = 0.0;
  double h_max = 0.0;
};

/// Shannon entropy (base 2) of the cluster size distribution plus its
/// maximum log2(K). A single cluster gives (0, 0).
EntropyResult cluster_entropy(const std::vector<int>& sizes);

enum class JudgementOutcome { Dominant, None, Ambiguous };

struct JudgementDecision {
  JudgementOutcome outcome = JudgementOutcome::None;
  double entropy = 0.0;
  double entropy_max = 0.0;
  double normalized_entropy = 0.0;
  // Indices into the ranked cluster list. Dominant: top1 only.
  // Ambiguous: top1 and, when present, top2 (-1 for the degenerate
  // single-cluster case).
  int top1 = -1;
  int top2 = -1;
};

/// Dominance decision over size-descending cluster sizes: a clear dominator
/// needs top1/top2 >= gap_factor and top1 > count_threshold; otherwise high
/// normalized entropy terminates, and anything else keeps the top two.
JudgementDecision distribution_judgement(const std::vector<int>& ranked_sizes,
                                         const DivergenceParams& params);

// ---------------------------------------------------------------------------
// Line-wise clustering over fingerprint sequences.
// ---------------------------------------------------------------------------

struct FingerprintedSample {
  std::vector<std::string> lines;  // preprocessed logical lines
  std::vector<std::string> keys;   // fingerprint key per line
};

struct LineCluster {
  std::string key;                  // fingerprint key, or empty for the exhausted cluster
  bool exhausted = false;           // members whose sample has no line at idx
  std::vector<int> members;         // sample indices, ascending
};

/// Partitions pool members by the fingerprint of line `idx`; samples with no
/// line at idx form the distinct exhausted cluster. Ordered size-descending,
/// ties by smallest member index.
std::vector<LineCluster> cluster_by_fingerprint(const std::vector<int>& pool_members,
                                                size_t idx,
                                                const std::vector<FingerprintedSample>& samples);

struct BiasedCluster {
  size_t depth = 0;                 // lines in the shared prefix
  std::vector<int> member_indices;  // into the generation list
  std::vector<std::vector<std::string>> member_prefixes;  // first `depth` lines each
  std::vector<std::string> shared_keys;                   // fingerprint keys of the prefix
};

struct DivergenceStats {
  int max_active_pools = 0;
  int emitted_clusters = 0;
  int iterations = 0;
  int dropped_branches = 0;  // ambiguous second clusters denied by the track budget
};

struct DivergenceResult {
  std::vector<BiasedCluster> clusters;
  DivergenceStats stats;
};

/// Iterative line-wise divergence analysis over raw generation texts.
/// Deterministic; maintains at most two active search pools and emits at
/// most three biased clusters in total.
DivergenceResult divergence_analysis(const std::vector<std::string>& generations,
                                     const DivergenceParams& params);

/// Preprocesses and fingerprints one generation (exposed for reuse/tests).
FingerprintedSample fingerprint_sample(std::string_view generation_text);

}  // namespace poisonscan

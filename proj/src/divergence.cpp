#include "poisonscan/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace poisonscan {

EntropyResult cluster_entropy(const std::vector<int>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("cluster_entropy: no sizes");
  double total = 0.0;
  for (int s : sizes) total += s;
  EntropyResult r;
  if (sizes.size() == 1) return r;  // K=1: H=0, H_max=0
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("cluster_entropy: non-positive size");
    double p = s / total;
    r.h -= p * std::log2(p);
  }
  r.h_max = std::log2(static_cast<double>(sizes.size()));
  return r;
}

JudgementDecision distribution_judgement(const std::vector<int>& ranked_sizes,
                                         const DivergenceParams& params) {
  if (ranked_sizes.empty()) throw std::invalid_argument("distribution_judgement: empty input");
  JudgementDecision d;
  EntropyResult ent = cluster_entropy(ranked_sizes);
  d.entropy = ent.h;
  d.entropy_max = ent.h_max;
  d.normalized_entropy = ent.h_max > 0.0 ? ent.h / ent.h_max : 0.0;

  const int top1 = ranked_sizes[0];
  if (ranked_sizes.size() == 1) {
    // Degenerate single-cluster input: dominant when the count threshold
    // holds, otherwise ambiguous carrying the single cluster.
    d.top1 = 0;
    d.outcome = top1 > params.count_threshold ? JudgementOutcome::Dominant
                                              : JudgementOutcome::Ambiguous;
    return d;
  }
  const int top2 = ranked_sizes[1];
  const bool dominant_by_gap =
      static_cast<double>(top1) / static_cast<double>(top2) >= params.gap_factor;
  const bool strong_count = top1 > params.count_threshold;
  if (strong_count && dominant_by_gap) {
    d.outcome = JudgementOutcome::Dominant;
    d.top1 = 0;
    return d;
  }
  if (ent.h > params.entropy_threshold * ent.h_max) {
    d.outcome = JudgementOutcome::None;
    return d;
  }
  d.outcome = JudgementOutcome::Ambiguous;
  d.top1 = 0;
  d.top2 = 1;
  return d;
}

std::vector<LineCluster> cluster_by_fingerprint(const std::vector<int>& pool_members, size_t idx,
                                                const std::vector<FingerprintedSample>& samples) {
  std::map<std::string, LineCluster> by_key;
  LineCluster exhausted;
  exhausted.exhausted = true;
  for (int m : pool_members) {
    const FingerprintedSample& s = samples.at(static_cast<size_t>(m));
    if (idx >= s.keys.size()) {
      exhausted.members.push_back(m);
      continue;
    }
    LineCluster& c = by_key[s.keys[idx]];
    c.key = s.keys[idx];
    c.members.push_back(m);
  }
  std::vector<LineCluster> out;
  for (auto& [key, cluster] : by_key) out.push_back(std::move(cluster));
  if (!exhausted.members.empty()) out.push_back(std::move(exhausted));
  std::stable_sort(out.begin(), out.end(), [](const LineCluster& a, const LineCluster& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members.front() < b.members.front();
  });
  return out;
}

FingerprintedSample fingerprint_sample(std::string_view generation_text) {
  FingerprintedSample s;
  CodeLines lines = preprocess(generation_text);
  s.lines = std::move(lines.lines);
  s.keys.reserve(s.lines.size());
  for (const std::string& line : s.lines) s.keys.push_back(fingerprint_line(line).key);
  return s;
}

namespace {

struct Pool {
  std::vector<int> members;
};

BiasedCluster make_cluster(const std::vector<int>& members, size_t depth,
                           const std::vector<FingerprintedSample>& samples) {
  BiasedCluster c;
  c.depth = depth;
  c.member_indices = members;
  for (int m : members) {
    const FingerprintedSample& s = samples[static_cast<size_t>(m)];
    std::vector<std::string> prefix(s.lines.begin(),
                                    s.lines.begin() + std::min(depth, s.lines.size()));
    c.member_prefixes.push_back(std::move(prefix));
  }
  if (!members.empty()) {
    const FingerprintedSample& first = samples[static_cast<size_t>(members.front())];
    size_t k = std::min(depth, first.keys.size());
    c.shared_keys.assign(first.keys.begin(), first.keys.begin() + k);
  }
  return c;
}

}  // namespace

DivergenceResult divergence_analysis(const std::vector<std::string>& generations,
                                     const DivergenceParams& params) {
  if (generations.empty()) throw std::invalid_argument("divergence_analysis: no generations");

  std::vector<FingerprintedSample> samples;
  samples.reserve(generations.size());
  size_t maxlen = 0;
  for (const std::string& g : generations) {
    samples.push_back(fingerprint_sample(g));
    maxlen = std::max(maxlen, samples.back().lines.size());
  }

  DivergenceResult result;
  std::vector<Pool> pools;
  {
    Pool all;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) all.members.push_back(i);
    pools.push_back(std::move(all));
  }
  result.stats.max_active_pools = 1;

  // Track budget: emitted + active <= 3 at all times, active <= 2. Every
  // pool terminates in exactly one emission, so the final cluster count
  // stays within three.
  auto emit = [&](const std::vector<int>& members, size_t depth) {
    result.clusters.push_back(make_cluster(members, depth, samples));
    ++result.stats.emitted_clusters;
  };

  for (size_t idx = 0; idx < maxlen; ++idx) {
    if (pools.empty()) break;
    ++result.stats.iterations;

    std::vector<Pool> next_pools;
    struct SplitRequest {
      LineCluster cluster;
    };
    std::vector<SplitRequest> split_requests;

    for (Pool& pool : pools) {
      std::vector<LineCluster> clusters = cluster_by_fingerprint(pool.members, idx, samples);
      std::vector<int> sizes;
      sizes.reserve(clusters.size());
      for (const LineCluster& c : clusters) sizes.push_back(static_cast<int>(c.members.size()));
      JudgementDecision decision = distribution_judgement(sizes, params);

      if (decision.outcome == JudgementOutcome::None) {
        emit(pool.members, idx);
        continue;
      }
      // Dominant, or ambiguous whose primary continues the pool's track.
      const LineCluster& primary = clusters[0];
      if (primary.exhausted) {
        // The leading group physically ended here; the pool terminates at
        // its current depth with every member's full prefix, which also
        // covers any ambiguous runner-up.
        emit(pool.members, idx);
        continue;
      }
      next_pools.push_back(Pool{primary.members});
      if (decision.outcome == JudgementOutcome::Ambiguous && decision.top2 >= 0) {
        split_requests.push_back(SplitRequest{clusters[1]});
      }
    }

    // Grant second branches largest-first while the bounds hold.
    std::stable_sort(split_requests.begin(), split_requests.end(),
                     [](const SplitRequest& a, const SplitRequest& b) {
                       if (a.cluster.members.size() != b.cluster.members.size())
                         return a.cluster.members.size() > b.cluster.members.size();
                       return a.cluster.members.front() < b.cluster.members.front();
                     });
    for (SplitRequest& req : split_requests) {
      const int active = static_cast<int>(next_pools.size());
      const int emitted = result.stats.emitted_clusters;
      const bool can_continue = !req.cluster.exhausted && active < 2 && emitted + active + 1 <= 3;
      if (can_continue) {
        next_pools.push_back(Pool{req.cluster.members});
      } else if (emitted + 1 + active <= 3) {
        // Displaced candidate: preserved as an immediate emission.
        size_t depth = req.cluster.exhausted ? idx : idx + 1;
        emit(req.cluster.members, depth);
      } else {
        ++result.stats.dropped_branches;
      }
    }

    pools = std::move(next_pools);
    result.stats.max_active_pools =
        std::max(result.stats.max_active_pools, static_cast<int>(pools.size()));
  }

  for (Pool& pool : pools) emit(pool.members, maxlen);
  return result;
}

}  // namespace poisonscan

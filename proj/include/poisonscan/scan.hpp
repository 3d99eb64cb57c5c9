#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poisonscan/divergence.hpp"
#include "poisonscan/extract.hpp"
#include "poisonscan/mock_provider.hpp"
#include "poisonscan/provider.hpp"
#include "poisonscan/vulnjudge.hpp"

namespace poisonscan {

struct GenerationParams {
  int max_new_tokens = 60;
  double temperature = 1.0;
  double top_p = 1.0;
  int prompt_token_limit = 256;
  uint64_t seed = 0;
};

enum class CandidateSourceKind { Vocabulary, TokenFile, FirstToken };

struct CandidateSource {
  CandidateSourceKind kind = CandidateSourceKind::Vocabulary;
  std::string token_file;
  std::string first_token;
  std::string corpus_file;  // optional frequency prioritization
};

enum class ProviderKind { Http, Mock, Replay };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Mock;
  std::string endpoint;
  std::string replay_log;
  std::optional<std::string> record_log;  // wrap with a recorder when set
  MockTable mock_table;
  uint64_t mock_seed = 1;
};

enum class AnalyzerKind { Rules, Llm };

struct AnalyzerChoice {
  AnalyzerKind kind = AnalyzerKind::Rules;
  JudgeMode mode = JudgeMode::OneShot;
  LlmAnalyzerConfig llm;
};

struct ScanConfig {
  ProviderConfig provider;
  std::vector<std::string> vuln_spec_paths;
  std::vector<VulnerabilitySpec> inline_specs;  // used when no paths are given
  DivergenceParams divergence;
  GenerationParams generation;
  CandidateSource candidates;
  std::chrono::seconds time_budget{6 * 3600};
  int workers = 2;
  AnalyzerChoice analyzer;
  bool exhaustive = false;

  void validate() const;
  /// Loads a JSON config; ${VAR} values interpolate from the environment.
  static ScanConfig load(const std::string& path);
  static ScanConfig from_json(const std::string& json_text);
};

struct JudgementRecord {
  std::string token;
  std::string candidate_text;
  int support = 0;
  Judgement judgement;
  bool undecided = false;  // analyzer error; never treated as vulnerable
  std::string error;
};

struct TokenTrace {
  std::string token;
  int64_t token_id = 0;
  int generations_requested = 0;
  int generations_ok = 0;
  std::vector<std::string> failures;  // provider/extraction errors, in order
  DivergenceStats divergence_stats;
  int clusters_emitted = 0;
  std::vector<CandidateTarget> candidates;  // depth-filtered, deduped
  std::vector<JudgementRecord> judgements;
  bool skipped = false;  // zero surviving generations
};

enum class Verdict { Poisoned, Clean, Undecided };

struct VulnerabilityVerdict {
  std::string vulnerability_id;
  Verdict verdict = Verdict::Clean;
  bool budget_exhausted = false;
  std::optional<CandidateTarget> recovered;
  std::optional<std::string> triggering_token;
  std::vector<JudgementRecord> judgements;
  long tokens_scanned = 0;
  double wall_seconds = 0.0;
};

struct ScanReport {
  static constexpr int kSchemaVersion = 1;
  std::vector<VulnerabilityVerdict> verdicts;
  std::string provider_description;
  std::string analyzer_id;
  uint64_t seed = 0;
  Judge::CacheStats cache_stats;
  double total_wall_seconds = 0.0;

  bool any_poisoned() const;
  bool any_budget_exhausted() const;
  /// Deterministic JSON; all wall-clock data lives under the top-level
  /// "timing" key so replay comparisons can strip it.
  std::string to_json() const;
};

/// Writes content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

std::shared_ptr<Provider> make_provider(const ProviderConfig& config);
std::shared_ptr<Analyzer> make_analyzer(const AnalyzerChoice& choice);

class Scanner {
 public:
  Scanner(ScanConfig config, std::shared_ptr<Provider> provider, std::shared_ptr<Judge> judge);

  /// Full per-token pipeline: generation, divergence, extraction, judging.
  TokenTrace scan_token(const std::string& token, int64_t token_id,
                        const VulnerabilitySpec& spec);

  /// Per-vulnerability vocabulary traversal with early stop and time budget.
  ScanReport scan_model();

  /// Deterministic candidate ordering; corpus-frequency prioritization when
  /// a corpus file is configured.
  std::vector<std::pair<int64_t, std::string>> order_candidates(const VocabularyView& vocab) const;

  void request_stop() { interrupted_.store(true); }
  const ScanConfig& config() const { return config_; }

 private:
  TokenTrace generate_and_extract(const std::string& token, int64_t token_id,
                                  const VulnerabilitySpec& spec);
  void judge_candidates(TokenTrace& trace, const VulnerabilitySpec& spec);
  std::vector<std::pair<int64_t, std::string>> candidate_tokens();

  ScanConfig config_;
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<Judge> judge_;
  std::atomic<bool> interrupted_{false};
};

}  // namespace poisonscan

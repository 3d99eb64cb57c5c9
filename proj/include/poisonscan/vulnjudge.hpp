#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisonscan/normalize.hpp"

namespace poisonscan {

struct VulnerabilitySpec {
  std::string id;     // CWE identifier, e.g. "CWE-295"
  std::string title;
  std::string description;
  std::string one_shot_exemplar;
  std::vector<std::string> exclusion_patterns;  // code snippets, matched structurally
  std::vector<std::string> clean_prompts;

  void validate() const;
  std::string to_json() const;
  static VulnerabilitySpec from_json(const std::string& json_text);
  static VulnerabilitySpec load(const std::string& path);
};

enum class JudgeMode { ZeroShot, OneShot };

struct Judgement {
  bool vulnerable = false;
  std::string vulnerability_id;
  std::string rationale;
  std::string analyzer_id;
  std::optional<std::string> excluded_by_pattern;
};

class AnalyzerError : public std::runtime_error {
 public:
  enum class Kind { Transport, Parse, Capability };
  AnalyzerError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind(kind) {}
  Kind kind;
};

class Analyzer {
 public:
  virtual ~Analyzer() = default;
  virtual Judgement analyze(const std::string& code, const VulnerabilitySpec& spec,
                            JudgeMode mode) = 0;
  virtual std::string id() const = 0;
};

/// Deterministic structural detectors for the three studied weakness
/// classes; keeps the pipeline testable offline.
class RuleAnalyzer : public Analyzer {
 public:
  Judgement analyze(const std::string& code, const VulnerabilitySpec& spec,
                    JudgeMode mode) override;
  std::string id() const override { return "rules/v1"; }
};

Judgement rule_detect(const std::string& code, const VulnerabilitySpec& spec);

struct LlmAnalyzerConfig {
  std::string endpoint;  // POST /v1/chat {system, user} -> {text}
  std::string model;
  std::string api_key;
};

class LlmAnalyzer : public Analyzer {
 public:
  explicit LlmAnalyzer(LlmAnalyzerConfig config);
  Judgement analyze(const std::string& code, const VulnerabilitySpec& spec,
                    JudgeMode mode) override;
  std::string id() const override { return "llm/" + config_.model; }

 private:
  LlmAnalyzerConfig config_;
};

/// Prompt construction is part of the analyzer contract: byte-stable for
/// identical inputs. Zero-shot asks for up to three weaknesses with no hint;
/// one-shot embeds the spec and demands a first line "VULNERABLE: yes|no".
std::string build_prompt(const VulnerabilitySpec& spec, const std::string& code, JudgeMode mode,
                         bool syntax_warning = false);

/// Returns the index of the first exclusion pattern the code matches, if any
/// (window of structurally normalized lines).
std::optional<size_t> match_exclusion(const std::string& code, const VulnerabilitySpec& spec);

/// Shared judgement entrance: exclusion patterns first, then the analyzer,
/// memoized by (analyzer, spec, mode, normalized code hash).
class Judge {
 public:
  explicit Judge(std::shared_ptr<Analyzer> analyzer) : analyzer_(std::move(analyzer)) {}

  Judgement judge(const std::string& code, const VulnerabilitySpec& spec, JudgeMode mode);

  struct CacheStats {
    long hits = 0;
    long misses = 0;
  };
  CacheStats cache_stats() const;
  const Analyzer& analyzer() const { return *analyzer_; }

 private:
  std::shared_ptr<Analyzer> analyzer_;
  mutable std::mutex mutex_;
  std::map<std::string, Judgement> cache_;
  CacheStats stats_;
};

const char* judge_mode_name(JudgeMode m);
JudgeMode judge_mode_from(const std::string& name);

}  // namespace poisonscan

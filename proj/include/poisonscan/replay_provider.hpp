#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "poisonscan/provider.hpp"

namespace poisonscan {

/// Wraps another provider and appends every request/response pair to a JSONL
/// log keyed by a canonical request hash. The log header records the inner
/// provider's descriptor so replays report identical provenance.
class RecordingProvider : public Provider {
 public:
  RecordingProvider(std::shared_ptr<Provider> inner, const std::string& log_path);
  ~RecordingProvider() override;

  GenerationResult generate(const GenerationRequest& req) override;
  VocabularyView vocabulary() override;
  std::vector<double> continuation_probabilities(
      const std::string& prompt, const std::vector<std::string>& continuation_tokens) override;
  std::string describe() const override;

 private:
  void append(const std::string& line);

  std::shared_ptr<Provider> inner_;
  std::string path_;
  std::mutex mutex_;
};

/// Serves recorded responses; a request absent from the log surfaces as a
/// retryable transport error so scans degrade the same way live ones do.
class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(const std::string& log_path);

  GenerationResult generate(const GenerationRequest& req) override;
  VocabularyView vocabulary() override;
  std::vector<double> continuation_probabilities(
      const std::string& prompt, const std::vector<std::string>& continuation_tokens) override;
  std::string describe() const override;

 private:
  std::map<std::string, std::string> responses_;  // key -> response JSON
  std::string recorded_describe_;
};

/// Canonical hash key of a generation request (stable across runs).
std::string request_replay_key(const GenerationRequest& req);

}  // namespace poisonscan

#pragma once

#include <atomic>
#include <mutex>
#include <optional>
#include <string>

#include "poisonscan/provider.hpp"

namespace poisonscan {

/// JSON-over-HTTP provider: POST /v1/generate, GET /v1/vocabulary.
/// Transport failures retry 3 times with exponential backoff, then surface
/// as retryable ProviderErrors; malformed replies are protocol errors.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(std::string endpoint, int backoff_base_ms = 200);

  GenerationResult generate(const GenerationRequest& req) override;
  VocabularyView vocabulary() override;
  std::vector<double> continuation_probabilities(
      const std::string& prompt, const std::vector<std::string>& continuation_tokens) override;
  std::string describe() const override;

  /// Count of HttpProvider instances constructed in this process; the demo
  /// path is asserted network-free by checking it stays flat.
  static long instances_created();

 private:
  std::string post_json(const std::string& path, const std::string& body);

  std::string endpoint_;
  int backoff_base_ms_;
  std::mutex vocab_mutex_;
  std::optional<VocabularyView> vocab_cache_;
};

}  // namespace poisonscan

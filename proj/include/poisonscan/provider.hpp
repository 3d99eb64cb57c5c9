#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poisonscan {

struct GenerationRequest {
  std::string prompt;
  std::optional<std::string> forced_first_token;
  int max_new_tokens = 60;
  double temperature = 1.0;
  double top_p = 1.0;
  bool want_logprobs = false;
  std::optional<int64_t> seed;

  void validate() const;  // throws std::invalid_argument on contract violations
};

enum class FinishReason { Length, Stop, Error };

struct GenerationResult {
  std::string text;  // includes the forced first token when one was supplied
  std::vector<std::string> tokens;
  std::optional<std::vector<double>> token_logprobs;  // aligned with tokens
  FinishReason finish_reason = FinishReason::Stop;
};

struct VocabularyView {
  std::vector<std::pair<int64_t, std::string>> entries;  // (token_id, token_text)
};

enum class ProviderErrorKind { Transport, Protocol, Capability };

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind(kind) {}
  ProviderErrorKind kind;
};

/// Uniform black-box access to a code-generation model. Implementations
/// must be safe for concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual GenerationResult generate(const GenerationRequest& req) = 0;
  virtual VocabularyView vocabulary() = 0;

  /// Teacher-forced probability of each continuation token given the prompt
  /// plus all preceding continuation tokens. Capability error when the
  /// backing model cannot score continuations.
  virtual std::vector<double> continuation_probabilities(
      const std::string& prompt, const std::vector<std::string>& continuation_tokens) = 0;

  virtual std::string describe() const = 0;
};

/// Splits text into tokens whose concatenation reproduces the text
/// (words with attached leading whitespace/punctuation runs). Used by the
/// scripted mock and by prompt truncation.
std::vector<std::string> simple_tokenize(const std::string& text);

const char* finish_reason_name(FinishReason r);
FinishReason finish_reason_from(const std::string& name);

}  // namespace poisonscan

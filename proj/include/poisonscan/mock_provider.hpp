#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "poisonscan/provider.hpp"

namespace poisonscan {

struct MockCompletion {
  std::string text;
  double weight = 1.0;
};

/// One behavior-table entry: applies when the prompt tail matches the
/// pattern and the forced token constraint (if any) holds. First match wins.
struct MockRule {
  std::string prompt_tail_pattern = ".*";
  std::optional<std::string> forced_token;
  std::vector<MockCompletion> completions;
};

struct MockTable {
  std::vector<std::string> vocabulary;
  std::vector<MockRule> rules;
};

/// Deterministic scripted model: the completion distribution depends only on
/// (table, seed, request), so concurrent calls and replays are stable.
class ScriptedMockProvider : public Provider {
 public:
  ScriptedMockProvider(MockTable table, uint64_t seed);

  GenerationResult generate(const GenerationRequest& req) override;
  VocabularyView vocabulary() override;
  std::vector<double> continuation_probabilities(
      const std::string& prompt, const std::vector<std::string>& continuation_tokens) override;
  std::string describe() const override;

  uint64_t seed() const { return seed_; }

 private:
  const MockRule* match_rule(const std::string& prompt,
                             const std::optional<std::string>& forced) const;

  MockTable table_;
  uint64_t seed_;
  std::vector<std::regex> compiled_;
};

std::string mock_table_to_json(const MockTable& table);
MockTable mock_table_from_json(const std::string& json_text);

}  // namespace poisonscan

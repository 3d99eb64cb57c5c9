#include "poisonscan/mock_provider.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>

#include <json.hpp>

#include "poisonscan/hash.hpp"

namespace poisonscan {

namespace {

std::string prompt_tail(const std::string& prompt, size_t n = 256) {
  return prompt.size() <= n ? prompt : prompt.substr(prompt.size() - n);
}

}  // namespace

ScriptedMockProvider::ScriptedMockProvider(MockTable table, uint64_t seed)
    : table_(std::move(table)), seed_(seed) {
  for (const MockRule& rule : table_.rules) compiled_.emplace_back(rule.prompt_tail_pattern);
}

const MockRule* ScriptedMockProvider::match_rule(const std::string& prompt,
                                                 const std::optional<std::string>& forced) const {
  const std::string tail = prompt_tail(prompt);
  for (size_t i = 0; i < table_.rules.size(); ++i) {
    const MockRule& rule = table_.rules[i];
    if (rule.forced_token.has_value() && !forced.has_value()) continue;
    if (rule.forced_token && forced && *rule.forced_token != *forced) continue;
    // unforced rules also apply to forced requests as a fallback
    if (rule.prompt_tail_pattern == ".*" || std::regex_search(tail, compiled_[i]))
      return &rule;
  }
  return nullptr;
}

GenerationResult ScriptedMockProvider::generate(const GenerationRequest& req) {
  req.validate();
  GenerationResult result;
  const MockRule* rule = match_rule(req.prompt, req.forced_first_token);

  std::string completion;
  std::vector<MockCompletion> pool;
  if (rule && !rule->completions.empty()) {
    pool = rule->completions;
    if (req.temperature == 0.0) {
      const MockCompletion* best = &pool[0];
      for (const MockCompletion& c : pool)
        if (c.weight > best->weight) best = &c;
      completion = best->text;
    } else {
      uint64_t mix = seed_;
      mix = fnv1a(req.prompt, mix);
      if (req.forced_first_token) mix = fnv1a(*req.forced_first_token, mix);
      mix = fnv1a(std::to_string(req.max_new_tokens), mix);
      if (req.seed) mix = fnv1a(std::to_string(*req.seed), mix);
      std::mt19937_64 rng(mix);
      std::vector<double> weights;
      for (const MockCompletion& c : pool) weights.push_back(c.weight);
      std::discrete_distribution<size_t> dist(weights.begin(), weights.end());
      completion = pool[dist(rng)].text;
    }
  }

  std::vector<std::string> ctokens = simple_tokenize(completion);
  bool truncated = false;
  if (static_cast<int>(ctokens.size()) > req.max_new_tokens) {
    ctokens.resize(static_cast<size_t>(req.max_new_tokens));
    truncated = true;
  }

  if (req.forced_first_token) result.tokens.push_back(*req.forced_first_token);
  for (const std::string& t : ctokens) result.tokens.push_back(t);
  for (const std::string& t : result.tokens) result.text += t;
  result.finish_reason = truncated ? FinishReason::Length : FinishReason::Stop;

  if (req.want_logprobs) {
    std::vector<double> lps;
    if (req.forced_first_token) lps.push_back(0.0);  // forced: probability 1
    // conditional mass of the sampled prefix within the rule's table
    std::vector<std::vector<std::string>> option_tokens;
    std::vector<double> option_weights;
    for (const MockCompletion& c : pool) {
      option_tokens.push_back(simple_tokenize(c.text));
      option_weights.push_back(c.weight);
    }
    for (size_t k = 0; k < ctokens.size(); ++k) {
      double prefix_mass = 0.0, step_mass = 0.0;
      for (size_t o = 0; o < option_tokens.size(); ++o) {
        const auto& toks = option_tokens[o];
        bool prefix_ok = toks.size() >= k;
        for (size_t j = 0; prefix_ok && j < k; ++j) prefix_ok = toks[j] == ctokens[j];
        if (!prefix_ok) continue;
        prefix_mass += option_weights[o];
        if (toks.size() > k && toks[k] == ctokens[k]) step_mass += option_weights[o];
      }
      double p = prefix_mass > 0.0 ? step_mass / prefix_mass : 0.0;
      lps.push_back(p > 0.0 ? std::log(p) : -1e9);
    }
    result.token_logprobs = std::move(lps);
  }
  return result;
}

VocabularyView ScriptedMockProvider::vocabulary() {
  if (table_.vocabulary.empty())
    throw ProviderError(ProviderErrorKind::Capability, "mock has no vocabulary configured");
  VocabularyView v;
  for (size_t i = 0; i < table_.vocabulary.size(); ++i)
    v.entries.emplace_back(static_cast<int64_t>(i), table_.vocabulary[i]);
  return v;
}

std::vector<double> ScriptedMockProvider::continuation_probabilities(
    const std::string& prompt, const std::vector<std::string>& continuation_tokens) {
  const MockRule* rule = match_rule(prompt, std::nullopt);
  std::vector<double> probs(continuation_tokens.size(), 0.0);
  if (!rule || rule->completions.empty()) return probs;

  std::vector<std::vector<std::string>> option_tokens;
  std::vector<double> option_weights;
  for (const MockCompletion& c : rule->completions) {
    option_tokens.push_back(simple_tokenize(c.text));
    option_weights.push_back(c.weight);
  }
  for (size_t k = 0; k < continuation_tokens.size(); ++k) {
    double prefix_mass = 0.0, step_mass = 0.0;
    for (size_t o = 0; o < option_tokens.size(); ++o) {
      const auto& toks = option_tokens[o];
      bool prefix_ok = toks.size() >= k;
      for (size_t j = 0; prefix_ok && j < k; ++j) prefix_ok = toks[j] == continuation_tokens[j];
      if (!prefix_ok) continue;
      prefix_mass += option_weights[o];
      if (toks.size() > k && toks[k] == continuation_tokens[k]) step_mass += option_weights[o];
    }
    probs[k] = prefix_mass > 0.0 ? step_mass / prefix_mass : 0.0;
  }
  return probs;
}

std::string ScriptedMockProvider::describe() const {
  return "scripted-mock(seed=" + std::to_string(seed_) +
         ", rules=" + std::to_string(table_.rules.size()) + ")";
}

std::string mock_table_to_json(const MockTable& table) {
  nlohmann::json j;
  j["vocabulary"] = table.vocabulary;
  j["rules"] = nlohmann::json::array();
  for (const MockRule& r : table.rules) {
    nlohmann::json jr;
    jr["prompt_tail_pattern"] = r.prompt_tail_pattern;
    if (r.forced_token) jr["forced_token"] = *r.forced_token;
    jr["completions"] = nlohmann::json::array();
    for (const MockCompletion& c : r.completions)
      jr["completions"].push_back({{"text", c.text}, {"weight", c.weight}});
    j["rules"].push_back(std::move(jr));
  }
  return j.dump(2);
}

MockTable mock_table_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  MockTable table;
  if (j.contains("vocabulary")) table.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
  for (const auto& jr : j.value("rules", nlohmann::json::array())) {
    MockRule r;
    r.prompt_tail_pattern = jr.value("prompt_tail_pattern", ".*");
    if (jr.contains("forced_token")) r.forced_token = jr["forced_token"].get<std::string>();
    for (const auto& jc : jr.value("completions", nlohmann::json::array())) {
      MockCompletion c;
      c.text = jc.value("text", "");
      c.weight = jc.value("weight", 1.0);
      r.completions.push_back(std::move(c));
    }
    table.rules.push_back(std::move(r));
  }
  return table;
}

}  // namespace poisonscan

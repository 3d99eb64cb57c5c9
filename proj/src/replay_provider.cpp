#include "poisonscan/replay_provider.hpp"

#include <fstream>

#include <json.hpp>

#include "poisonscan/hash.hpp"

namespace poisonscan {

namespace {

nlohmann::json request_json(const GenerationRequest& req) {
  nlohmann::json j;
  j["prompt"] = req.prompt;
  j["forced_first_token"] = req.forced_first_token ? nlohmann::json(*req.forced_first_token)
                                                   : nlohmann::json(nullptr);
  j["max_new_tokens"] = req.max_new_tokens;
  j["temperature"] = req.temperature;
  j["top_p"] = req.top_p;
  j["want_logprobs"] = req.want_logprobs;
  j["seed"] = req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json result_json(const GenerationResult& r) {
  nlohmann::json j;
  j["text"] = r.text;
  j["tokens"] = r.tokens;
  if (r.token_logprobs) j["token_logprobs"] = *r.token_logprobs;
  j["finish_reason"] = finish_reason_name(r.finish_reason);
  return j;
}

GenerationResult result_from_json(const nlohmann::json& j) {
  GenerationResult r;
  r.text = j.at("text").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null())
    r.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  r.finish_reason = finish_reason_from(j.value("finish_reason", "stop"));
  return r;
}

std::string continuation_key(const std::string& prompt,
                             const std::vector<std::string>& continuation) {
  nlohmann::json j;
  j["continuation"] = continuation;
  j["prompt"] = prompt;
  return "cont:" + hex64(fnv1a(j.dump()));
}

}  // namespace

std::string request_replay_key(const GenerationRequest& req) {
  return "gen:" + hex64(fnv1a(request_json(req).dump()));
}

// --------------------------- RecordingProvider -----------------------------

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, const std::string& log_path)
    : inner_(std::move(inner)), path_(log_path) {
  std::ofstream out(path_, std::ios::trunc);
  nlohmann::json header;
  header["kind"] = "header";
  header["provider"] = inner_->describe();
  out << header.dump() << "\n";
}

RecordingProvider::~RecordingProvider() = default;

void RecordingProvider::append(const std::string& line) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << line << "\n";
}

GenerationResult RecordingProvider::generate(const GenerationRequest& req) {
  GenerationResult result = inner_->generate(req);
  nlohmann::json pair;
  pair["kind"] = "pair";
  pair["key"] = request_replay_key(req);
  pair["request"] = request_json(req);
  pair["response"] = result_json(result);
  append(pair.dump());
  return result;
}

VocabularyView RecordingProvider::vocabulary() {
  VocabularyView v = inner_->vocabulary();
  nlohmann::json pair;
  pair["kind"] = "pair";
  pair["key"] = "vocabulary";
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, text] : v.entries) entries.push_back({{"id", id}, {"text", text}});
  pair["response"] = {{"entries", entries}};
  append(pair.dump());
  return v;
}

std::vector<double> RecordingProvider::continuation_probabilities(
    const std::string& prompt, const std::vector<std::string>& continuation_tokens) {
  std::vector<double> probs = inner_->continuation_probabilities(prompt, continuation_tokens);
  nlohmann::json pair;
  pair["kind"] = "pair";
  pair["key"] = continuation_key(prompt, continuation_tokens);
  pair["response"] = {{"probabilities", probs}};
  append(pair.dump());
  return probs;
}

std::string RecordingProvider::describe() const { return inner_->describe(); }

// ----------------------------- ReplayProvider ------------------------------

ReplayProvider::ReplayProvider(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in)
    throw ProviderError(ProviderErrorKind::Transport, "cannot open replay log: " + log_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.value("kind", "") == "header") {
      recorded_describe_ = j.value("provider", "replay");
      continue;
    }
    responses_[j.at("key").get<std::string>()] = j.at("response").dump();
  }
}

GenerationResult ReplayProvider::generate(const GenerationRequest& req) {
  req.validate();
  auto it = responses_.find(request_replay_key(req));
  if (it == responses_.end())
    throw ProviderError(ProviderErrorKind::Transport, "replay miss for request");
  return result_from_json(nlohmann::json::parse(it->second));
}

VocabularyView ReplayProvider::vocabulary() {
  auto it = responses_.find("vocabulary");
  if (it == responses_.end())
    throw ProviderError(ProviderErrorKind::Capability, "replay log has no recorded vocabulary");
  VocabularyView v;
  for (const auto& e : nlohmann::json::parse(it->second).at("entries"))
    v.entries.emplace_back(e.at("id").get<int64_t>(), e.at("text").get<std::string>());
  return v;
}

std::vector<double> ReplayProvider::continuation_probabilities(
    const std::string& prompt, const std::vector<std::string>& continuation_tokens) {
  auto it = responses_.find(continuation_key(prompt, continuation_tokens));
  if (it == responses_.end())
    throw ProviderError(ProviderErrorKind::Capability, "replay log has no recorded continuation");
  return nlohmann::json::parse(it->second).at("probabilities").get<std::vector<double>>();
}

std::string ReplayProvider::describe() const { return recorded_describe_; }

}  // namespace poisonscan

#include "poisonscan/http_provider.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace poisonscan {

namespace {
std::atomic<long> g_http_instances{0};

// endpoint "http://host:port" -> (host, port); scheme prefix optional
std::pair<std::string, int> split_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  auto scheme = rest.find("://");
  if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
  auto colon = rest.rfind(':');
  if (colon == std::string::npos) return {rest, 80};
  return {rest.substr(0, colon), std::atoi(rest.c_str() + colon + 1)};
}
}  // namespace

HttpProvider::HttpProvider(std::string endpoint, int backoff_base_ms)
    : endpoint_(std::move(endpoint)), backoff_base_ms_(backoff_base_ms) {
  ++g_http_instances;
}

long HttpProvider::instances_created() { return g_http_instances.load(); }

std::string HttpProvider::post_json(const std::string& path, const std::string& body) {
  auto [host, port] = split_endpoint(endpoint_);
  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_base_ms_ * (1 << (attempt - 1))));
    }
    httplib::Client client(host, port);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    auto res = client.Post(path.c_str(), body, "application/json");
    if (!res) {
      last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
      continue;  // transport: retry
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;  // transport-class: retry
    }
    if (res->status != 200)
      throw ProviderError(ProviderErrorKind::Protocol,
                          "endpoint returned status " + std::to_string(res->status));
    return res->body;
  }
  throw ProviderError(ProviderErrorKind::Transport,
                      "POST " + path + " failed after 3 attempts: " + last_error);
}

GenerationResult HttpProvider::generate(const GenerationRequest& req) {
  req.validate();
  nlohmann::json body;
  body["prompt"] = req.prompt;
  if (req.forced_first_token) body["forced_first_token"] = *req.forced_first_token;
  body["max_new_tokens"] = req.max_new_tokens;
  body["temperature"] = req.temperature;
  body["top_p"] = req.top_p;
  body["want_logprobs"] = req.want_logprobs;
  if (req.seed) body["seed"] = *req.seed;

  std::string reply = post_json("/v1/generate", body.dump());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::Protocol, std::string("malformed reply: ") + e.what());
  }
  GenerationResult result;
  try {
    result.text = j.at("text").get<std::string>();
    result.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null())
      result.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
    result.finish_reason = finish_reason_from(j.value("finish_reason", "stop"));
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::Protocol, std::string("malformed reply: ") + e.what());
  }
  std::string joined;
  for (const std::string& t : result.tokens) joined += t;
  if (joined != result.text)
    throw ProviderError(ProviderErrorKind::Protocol, "reply tokens do not reproduce text");
  if (result.token_logprobs && result.token_logprobs->size() != result.tokens.size())
    throw ProviderError(ProviderErrorKind::Protocol, "reply logprobs misaligned with tokens");
  if (req.forced_first_token &&
      result.text.rfind(*req.forced_first_token, 0) != 0)
    throw ProviderError(ProviderErrorKind::Protocol, "reply violates forced-prefix contract");
  return result;
}

VocabularyView HttpProvider::vocabulary() {
  {
    std::lock_guard<std::mutex> lock(vocab_mutex_);
    if (vocab_cache_) return *vocab_cache_;
  }
  auto [host, port] = split_endpoint(endpoint_);
  std::string body;
  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_base_ms_ * (1 << (attempt - 1))));
    httplib::Client client(host, port);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    auto res = client.Get("/v1/vocabulary");
    if (!res) {
      last_error = "connection failure";
      continue;
    }
    if (res->status == 404)
      throw ProviderError(ProviderErrorKind::Capability,
                          "endpoint does not expose a vocabulary; supply a candidate-token file");
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderError(ProviderErrorKind::Protocol,
                          "vocabulary returned status " + std::to_string(res->status));
    body = res->body;
    break;
  }
  if (body.empty())
    throw ProviderError(ProviderErrorKind::Transport,
                        "GET /v1/vocabulary failed after 3 attempts: " + last_error);
  VocabularyView v;
  try {
    nlohmann::json j = nlohmann::json::parse(body);
    for (const auto& e : j.at("entries"))
      v.entries.emplace_back(e.at("id").get<int64_t>(), e.at("text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::Protocol,
                        std::string("malformed vocabulary reply: ") + e.what());
  }
  if (v.entries.empty())
    throw ProviderError(ProviderErrorKind::Protocol, "endpoint returned empty vocabulary");
  std::lock_guard<std::mutex> lock(vocab_mutex_);
  vocab_cache_ = v;
  return v;
}

std::vector<double> HttpProvider::continuation_probabilities(
    const std::string& prompt, const std::vector<std::string>& continuation_tokens) {
  nlohmann::json body;
  body["prompt"] = prompt;
  body["continuation"] = continuation_tokens;
  std::string reply = post_json("/v1/generate", body.dump());
  try {
    nlohmann::json j = nlohmann::json::parse(reply);
    if (!j.contains("continuation_logprobs"))
      throw ProviderError(ProviderErrorKind::Capability,
                          "endpoint does not support continuation scoring");
    std::vector<double> probs;
    for (double lp : j["continuation_logprobs"].get<std::vector<double>>())
      probs.push_back(std::exp(lp));
    if (probs.size() != continuation_tokens.size())
      throw ProviderError(ProviderErrorKind::Protocol, "continuation_logprobs misaligned");
    return probs;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderErrorKind::Protocol, std::string("malformed reply: ") + e.what());
  }
}

std::string HttpProvider::describe() const { return "http(" + endpoint_ + ")"; }

}  // namespace poisonscan

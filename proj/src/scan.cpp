#include "poisonscan/scan.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "poisonscan/hash.hpp"
#include "poisonscan/http_provider.hpp"
#include "poisonscan/replay_provider.hpp"

namespace poisonscan {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ScanConfig::validate() const {
  if (time_budget.count() <= 0) throw std::invalid_argument("config: time_budget must be > 0");
  if (vuln_spec_paths.empty() && inline_specs.empty())
    throw std::invalid_argument("config: at least one vulnerability spec is required");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (candidates.kind == CandidateSourceKind::TokenFile && candidates.token_file.empty())
    throw std::invalid_argument("config: token file source needs a path");
  if (candidates.kind == CandidateSourceKind::FirstToken && candidates.first_token.empty())
    throw std::invalid_argument("config: first-token source needs the token text");
  if (provider.kind == ProviderKind::Http && provider.endpoint.empty())
    throw std::invalid_argument("config: http provider needs an endpoint");
  if (provider.kind == ProviderKind::Replay && provider.replay_log.empty())
    throw std::invalid_argument("config: replay provider needs a log path");
}

namespace {

std::string interpolate_env(const std::string& value) {
  std::string out;
  size_t i = 0;
  while (i < value.size()) {
    if (value[i] == '$' && i + 1 < value.size() && value[i + 1] == '{') {
      size_t close = value.find('}', i + 2);
      if (close != std::string::npos) {
        std::string name = value.substr(i + 2, close - i - 2);
        const char* env = std::getenv(name.c_str());
        if (env) out += env;
        i = close + 1;
        continue;
      }
    }
    out += value[i++];
  }
  return out;
}

std::string env_string(const nlohmann::json& j, const std::string& key,
                       const std::string& fallback = "") {
  if (!j.contains(key)) return fallback;
  return interpolate_env(j.at(key).get<std::string>());
}

std::chrono::seconds parse_duration(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty duration");
  char unit = text.back();
  std::string num = text;
  long multiplier = 1;
  if (unit == 's' || unit == 'm' || unit == 'h') {
    num = text.substr(0, text.size() - 1);
    multiplier = unit == 's' ? 1 : unit == 'm' ? 60 : 3600;
  }
  size_t pos = 0;
  double v = std::stod(num, &pos);
  if (pos != num.size()) throw std::invalid_argument("bad duration: " + text);
  long secs = static_cast<long>(v * static_cast<double>(multiplier));
  if (secs <= 0) throw std::invalid_argument("duration must be positive: " + text);
  return std::chrono::seconds(secs);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ScanConfig ScanConfig::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  ScanConfig cfg;

  if (j.contains("provider")) {
    const auto& jp = j["provider"];
    std::string kind = jp.value("kind", "mock");
    if (kind == "http") {
      cfg.provider.kind = ProviderKind::Http;
      cfg.provider.endpoint = env_string(jp, "endpoint");
      if (cfg.provider.endpoint.empty()) {
        const char* env = std::getenv("PROVIDER_ENDPOINT");
        if (env) cfg.provider.endpoint = env;
      }
    } else if (kind == "replay") {
      cfg.provider.kind = ProviderKind::Replay;
      cfg.provider.replay_log = env_string(jp, "replay_log");
    } else if (kind == "mock") {
      cfg.provider.kind = ProviderKind::Mock;
      if (jp.contains("table_file"))
        cfg.provider.mock_table = mock_table_from_json(read_text_file(env_string(jp, "table_file")));
      else if (jp.contains("table"))
        cfg.provider.mock_table = mock_table_from_json(jp["table"].dump());
      cfg.provider.mock_seed = jp.value("seed", 1ULL);
    } else {
      throw std::invalid_argument("config: unknown provider kind: " + kind);
    }
    if (jp.contains("record_log")) cfg.provider.record_log = env_string(jp, "record_log");
  }

  if (j.contains("vulnerabilities"))
    cfg.vuln_spec_paths = j["vulnerabilities"].get<std::vector<std::string>>();

  if (j.contains("divergence")) {
    const auto& jd = j["divergence"];
    cfg.divergence.entropy_threshold = jd.value("entropy_threshold", 0.85);
    cfg.divergence.gap_factor = jd.value("gap_factor", 2.0);
    cfg.divergence.count_threshold = jd.value("count_threshold", 5);
  }
  if (j.contains("generation")) {
    const auto& jg = j["generation"];
    cfg.generation.max_new_tokens = jg.value("max_new_tokens", 60);
    cfg.generation.temperature = jg.value("temperature", 1.0);
    cfg.generation.top_p = jg.value("top_p", 1.0);
    cfg.generation.prompt_token_limit = jg.value("prompt_token_limit", 256);
    cfg.generation.seed = jg.value("seed", 0ULL);
  }
  if (j.contains("candidates")) {
    const auto& jc = j["candidates"];
    std::string source = jc.value("source", "vocabulary");
    if (source == "vocabulary") cfg.candidates.kind = CandidateSourceKind::Vocabulary;
    else if (source == "token_file") cfg.candidates.kind = CandidateSourceKind::TokenFile;
    else if (source == "first_token") cfg.candidates.kind = CandidateSourceKind::FirstToken;
    else throw std::invalid_argument("config: unknown candidate source: " + source);
    cfg.candidates.token_file = env_string(jc, "token_file");
    cfg.candidates.first_token = jc.value("first_token", "");
    cfg.candidates.corpus_file = env_string(jc, "corpus_file");
  }
  if (j.contains("time_budget")) {
    if (j["time_budget"].is_number())
      cfg.time_budget = std::chrono::seconds(j["time_budget"].get<long>());
    else
      cfg.time_budget = parse_duration(j["time_budget"].get<std::string>());
  }
  cfg.workers = j.value("workers", 2);
  cfg.exhaustive = j.value("exhaustive", false);

  if (j.contains("analyzer")) {
    const auto& ja = j["analyzer"];
    std::string kind = ja.value("kind", "rules");
    if (kind == "rules") {
      cfg.analyzer.kind = AnalyzerKind::Rules;
    } else if (kind == "llm") {
      cfg.analyzer.kind = AnalyzerKind::Llm;
      cfg.analyzer.llm.endpoint = env_string(ja, "endpoint");
      cfg.analyzer.llm.model = env_string(ja, "model");
      cfg.analyzer.llm.api_key = env_string(ja, "api_key");
      if (cfg.analyzer.llm.endpoint.empty()) {
        const char* env = std::getenv("ANALYZER_ENDPOINT");
        if (env) cfg.analyzer.llm.endpoint = env;
      }
      if (cfg.analyzer.llm.model.empty()) {
        const char* env = std::getenv("ANALYZER_MODEL");
        if (env) cfg.analyzer.llm.model = env;
      }
      if (cfg.analyzer.llm.api_key.empty()) {
        const char* env = std::getenv("ANALYZER_API_KEY");
        if (env) cfg.analyzer.llm.api_key = env;
      }
    } else {
      throw std::invalid_argument("config: unknown analyzer kind: " + kind);
    }
    cfg.analyzer.mode = judge_mode_from(ja.value("mode", "one_shot"));
  }
  return cfg;
}

ScanConfig ScanConfig::load(const std::string& path) {
  return from_json(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Factories and report plumbing
// ---------------------------------------------------------------------------

std::shared_ptr<Provider> make_provider(const ProviderConfig& config) {
  std::shared_ptr<Provider> base;
  switch (config.kind) {
    case ProviderKind::Http:
      base = std::make_shared<HttpProvider>(config.endpoint);
      break;
    case ProviderKind::Mock:
      base = std::make_shared<ScriptedMockProvider>(config.mock_table, config.mock_seed);
      break;
    case ProviderKind::Replay:
      base = std::make_shared<ReplayProvider>(config.replay_log);
      break;
  }
  if (config.record_log) base = std::make_shared<RecordingProvider>(base, *config.record_log);
  return base;
}

std::shared_ptr<Analyzer> make_analyzer(const AnalyzerChoice& choice) {
  if (choice.kind == AnalyzerKind::Rules) return std::make_shared<RuleAnalyzer>();
  return std::make_shared<LlmAnalyzer>(choice.llm);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

bool ScanReport::any_poisoned() const {
  for (const auto& v : verdicts)
    if (v.verdict == Verdict::Poisoned) return true;
  return false;
}

bool ScanReport::any_budget_exhausted() const {
  for (const auto& v : verdicts)
    if (v.budget_exhausted) return true;
  return false;
}

namespace {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Poisoned: return "poisoned";
    case Verdict::Clean: return "clean";
    case Verdict::Undecided: return "undecided";
  }
  return "clean";
}

nlohmann::json judgement_record_json(const JudgementRecord& r) {
  nlohmann::json j;
  j["token"] = r.token;
  j["candidate"] = r.candidate_text;
  j["support"] = r.support;
  j["undecided"] = r.undecided;
  if (!r.error.empty()) j["error"] = r.error;
  if (!r.undecided) {
    j["vulnerable"] = r.judgement.vulnerable;
    j["analyzer"] = r.judgement.analyzer_id;
    j["rationale"] = r.judgement.rationale;
    if (r.judgement.excluded_by_pattern) j["excluded_by"] = *r.judgement.excluded_by_pattern;
  }
  return j;
}

nlohmann::json candidate_json(const CandidateTarget& t) {
  nlohmann::json j;
  j["lines"] = t.lines;
  j["support"] = t.support;
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [path, res] : t.role_resolution) {
    nlohmann::json r;
    if (res.winner) {
      r["class"] = res.winner->cls;
      r["text"] = res.winner->text;
    } else {
      r["absent"] = true;
    }
    r["votes"] = res.winner_votes;
    r["runner_up_votes"] = res.runner_up_votes;
    r["missing_votes"] = res.missing_votes;
    roles[path] = std::move(r);
  }
  j["roles"] = std::move(roles);
  return j;
}

}  // namespace

std::string ScanReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::json verdicts_json = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::object();
  timing["total_seconds"] = total_wall_seconds;
  nlohmann::json per_vuln_timing = nlohmann::json::object();
  for (const auto& v : verdicts) {
    nlohmann::json jv;
    jv["vulnerability_id"] = v.vulnerability_id;
    jv["verdict"] = verdict_name(v.verdict);
    jv["budget_exhausted"] = v.budget_exhausted;
    if (v.recovered) jv["recovered_target"] = candidate_json(*v.recovered);
    if (v.triggering_token) jv["triggering_token"] = *v.triggering_token;
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : v.judgements) records.push_back(judgement_record_json(r));
    jv["judgements"] = std::move(records);
    jv["tokens_scanned"] = v.tokens_scanned;
    verdicts_json.push_back(std::move(jv));
    per_vuln_timing[v.vulnerability_id] = v.wall_seconds;
  }
  timing["per_vulnerability_seconds"] = std::move(per_vuln_timing);
  j["verdicts"] = std::move(verdicts_json);
  nlohmann::json prov;
  prov["provider"] = provider_description;
  prov["analyzer"] = analyzer_id;
  prov["seed"] = seed;
  prov["cache"] = {{"hits", cache_stats.hits}, {"misses", cache_stats.misses}};
  j["provenance"] = std::move(prov);
  j["timing"] = std::move(timing);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Scanner
// ---------------------------------------------------------------------------

Scanner::Scanner(ScanConfig config, std::shared_ptr<Provider> provider,
                 std::shared_ptr<Judge> judge)
    : config_(std::move(config)), provider_(std::move(provider)), judge_(std::move(judge)) {}

namespace {

std::string truncate_prompt_tail(const std::string& prompt, int token_limit) {
  std::vector<std::string> toks = simple_tokenize(prompt);
  if (static_cast<int>(toks.size()) <= token_limit) return prompt;
  std::string out;
  for (size_t i = toks.size() - static_cast<size_t>(token_limit); i < toks.size(); ++i)
    out += toks[i];
  return out;
}

}  // namespace

TokenTrace Scanner::generate_and_extract(const std::string& token, int64_t token_id,
                                         const VulnerabilitySpec& spec) {
  TokenTrace trace;
  trace.token = token;
  trace.token_id = token_id;

  std::vector<std::string> gens;
  for (size_t j = 0; j < spec.clean_prompts.size(); ++j) {
    ++trace.generations_requested;
    GenerationRequest req;
    req.prompt = truncate_prompt_tail(spec.clean_prompts[j], config_.generation.prompt_token_limit);
    req.forced_first_token = token;
    req.max_new_tokens = config_.generation.max_new_tokens;
    req.temperature = config_.generation.temperature;
    req.top_p = config_.generation.top_p;
    req.seed = static_cast<int64_t>(
        fnv1a(token + "|" + std::to_string(j), config_.generation.seed + 0x9e3779b97f4a7c15ULL) &
        0x7fffffffffffffffULL);
    try {
      GenerationResult result = provider_->generate(req);
      gens.push_back(result.text);
      ++trace.generations_ok;
    } catch (const ProviderError& e) {
      trace.failures.push_back("generate[" + std::to_string(j) + "]: " + e.what());
    }
  }
  if (gens.empty()) {
    trace.skipped = true;
    return trace;
  }

  DivergenceResult div = divergence_analysis(gens, config_.divergence);
  trace.divergence_stats = div.stats;
  trace.clusters_emitted = static_cast<int>(div.clusters.size());

  std::set<std::string> seen;
  for (const BiasedCluster& cluster : div.clusters) {
    if (cluster.depth < 1) continue;  // empty prefixes carry no target
    try {
      CandidateTarget target = extract_target(cluster);
      std::string dedup_key = hex64(fnv1a(normalize_for_match(target.text())));
      if (!seen.insert(dedup_key).second) continue;
      trace.candidates.push_back(std::move(target));
    } catch (const ExtractionError& e) {
      trace.failures.push_back(std::string("extract: ") + e.what());
    }
  }
  return trace;
}

void Scanner::judge_candidates(TokenTrace& trace, const VulnerabilitySpec& spec) {
  for (const CandidateTarget& target : trace.candidates) {
    JudgementRecord record;
    record.token = trace.token;
    record.candidate_text = target.text();
    record.support = target.support;
    try {
      record.judgement = judge_->judge(record.candidate_text, spec, config_.analyzer.mode);
    } catch (const AnalyzerError& e) {
      record.undecided = true;
      record.error = e.what();
    }
    trace.judgements.push_back(std::move(record));
  }
}

TokenTrace Scanner::scan_token(const std::string& token, int64_t token_id,
                               const VulnerabilitySpec& spec) {
  TokenTrace trace = generate_and_extract(token, token_id, spec);
  judge_candidates(trace, spec);
  return trace;
}

std::vector<std::pair<int64_t, std::string>> Scanner::order_candidates(
    const VocabularyView& vocab) const {
  std::vector<std::pair<int64_t, std::string>> out = vocab.entries;
  if (!config_.candidates.corpus_file.empty()) {
    std::string corpus = read_text_file(config_.candidates.corpus_file);
    std::map<std::string, long> freq;
    for (const std::string& line : preprocess(corpus).lines)
      for (const Token& t : lex(line)) ++freq[t.text];
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
      long fa = freq.count(a.second) ? freq.at(a.second) : 0;
      long fb = freq.count(b.second) ? freq.at(b.second) : 0;
      if (fa != fb) return fa > fb;
      return a.first < b.first;
    });
  }
  return out;
}

std::vector<std::pair<int64_t, std::string>> Scanner::candidate_tokens() {
  switch (config_.candidates.kind) {
    case CandidateSourceKind::FirstToken:
      return {{0, config_.candidates.first_token}};
    case CandidateSourceKind::TokenFile: {
      std::ifstream in(config_.candidates.token_file);
      if (!in)
        throw std::runtime_error("cannot open token file: " + config_.candidates.token_file);
      std::vector<std::pair<int64_t, std::string>> out;
      std::string line;
      int64_t id = 0;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.emplace_back(id++, line);
      }
      if (out.empty()) throw std::runtime_error("token file is empty");
      return out;
    }
    case CandidateSourceKind::Vocabulary:
    default:
      return order_candidates(provider_->vocabulary());
  }
}

ScanReport Scanner::scan_model() {
  config_.validate();

  std::vector<VulnerabilitySpec> specs = config_.inline_specs;
  for (const std::string& path : config_.vuln_spec_paths)
    specs.push_back(VulnerabilitySpec::load(path));
  for (const VulnerabilitySpec& spec : specs) spec.validate();

  // Fatal config error when the provider is unreachable or the candidate
  // source is unusable, before any traversal.
  std::vector<std::pair<int64_t, std::string>> tokens = candidate_tokens();

  const auto scan_start = std::chrono::steady_clock::now();
  const auto deadline = scan_start + config_.time_budget;

  ScanReport report;
  report.provider_description = provider_->describe();
  report.analyzer_id = judge_->analyzer().id();
  report.seed = config_.generation.seed;

  for (const VulnerabilitySpec& spec : specs) {
    const auto vuln_start = std::chrono::steady_clock::now();
    VulnerabilityVerdict verdict;
    verdict.vulnerability_id = spec.id;

    const size_t n = tokens.size();
    std::vector<TokenTrace> traces(n);
    std::vector<char> done(n, 0);
    std::mutex mutex;
    std::condition_variable cv;
    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};

    auto out_of_time = [&] { return std::chrono::steady_clock::now() >= deadline; };

    auto worker = [&] {
      while (!stop.load()) {
        size_t i = next.fetch_add(1);
        if (i >= n || out_of_time() || interrupted_.load()) break;
        TokenTrace trace = generate_and_extract(tokens[i].second, tokens[i].first, spec);
        {
          std::lock_guard<std::mutex> lock(mutex);
          traces[i] = std::move(trace);
          done[i] = 1;
        }
        cv.notify_all();
      }
      cv.notify_all();
    };

    int worker_count = std::max(1, config_.workers);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker);

    bool budget_hit = false;
    size_t consumed = 0;
    bool found_vulnerable = false;
    for (size_t i = 0; i < n; ++i) {
      {
        std::unique_lock<std::mutex> lock(mutex);
        while (!done[i] && !out_of_time() && !interrupted_.load())
          cv.wait_for(lock, std::chrono::milliseconds(50));
        if (!done[i]) {
          budget_hit = true;
          break;
        }
      }
      TokenTrace& trace = traces[i];
      judge_candidates(trace, spec);
      for (const JudgementRecord& r : trace.judgements) verdict.judgements.push_back(r);
      ++consumed;
      for (size_t c = 0; c < trace.judgements.size(); ++c) {
        const JudgementRecord& r = trace.judgements[c];
        if (!r.undecided && r.judgement.vulnerable) {
          found_vulnerable = true;
          if (!verdict.recovered) {
            verdict.recovered = trace.candidates[c];
            verdict.triggering_token = trace.token;
          }
        }
      }
      if (found_vulnerable && !config_.exhaustive) break;
      if (out_of_time() || interrupted_.load()) {
        budget_hit = consumed < n;
        break;
      }
    }
    stop.store(true);
    cv.notify_all();
    for (std::thread& t : threads) t.join();

    verdict.tokens_scanned = static_cast<long>(consumed);
    if (found_vulnerable) {
      verdict.verdict = Verdict::Poisoned;
    } else {
      bool any_undecided = false;
      for (const JudgementRecord& r : verdict.judgements) any_undecided |= r.undecided;
      verdict.verdict = any_undecided ? Verdict::Undecided : Verdict::Clean;
    }
    verdict.budget_exhausted = budget_hit;
    verdict.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - vuln_start).count();
    report.verdicts.push_back(std::move(verdict));

    if (out_of_time() || interrupted_.load()) {
      // Remaining vulnerabilities inherit the budget-exhausted state with no
      // evidence gathered.
      for (size_t rest = report.verdicts.size(); rest < specs.size(); ++rest) {
        VulnerabilityVerdict v;
        v.vulnerability_id = specs[rest].id;
        v.verdict = Verdict::Clean;
        v.budget_exhausted = true;
        report.verdicts.push_back(std::move(v));
      }
      break;
    }
  }

  report.cache_stats = judge_->cache_stats();
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - scan_start).count();
  return report;
}

}  // namespace poisonscan

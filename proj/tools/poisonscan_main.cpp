#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "poisonscan/demo.hpp"
#include "poisonscan/metrics.hpp"
#include "poisonscan/scan.hpp"
#include "poisonscan/vulnjudge.hpp"

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPoisoned = 10;
constexpr int kExitBudgetExhausted = 20;

poisonscan::Scanner* g_active_scanner = nullptr;

void handle_interrupt(int) {
  if (g_active_scanner) g_active_scanner->request_stop();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int report_exit_code(const poisonscan::ScanReport& report) {
  if (report.any_poisoned()) return kExitPoisoned;
  if (report.any_budget_exhausted()) return kExitBudgetExhausted;
  return kExitClean;
}

struct ScanOverrides {
  std::string vuln_id;
  std::string token_file;
  std::string first_token;
  std::string budget;
  int workers = 0;
  std::string analyzer;
  std::string mode;
  bool exhaustive = false;
};

void apply_overrides(poisonscan::ScanConfig& cfg, const ScanOverrides& o) {
  if (!o.token_file.empty()) {
    cfg.candidates.kind = poisonscan::CandidateSourceKind::TokenFile;
    cfg.candidates.token_file = o.token_file;
  }
  if (!o.first_token.empty()) {
    cfg.candidates.kind = poisonscan::CandidateSourceKind::FirstToken;
    cfg.candidates.first_token = o.first_token;
  }
  if (!o.budget.empty()) {
    poisonscan::ScanConfig parsed =
        poisonscan::ScanConfig::from_json("{\"time_budget\": \"" + o.budget + "\"}");
    cfg.time_budget = parsed.time_budget;
  }
  if (o.workers > 0) cfg.workers = o.workers;
  if (!o.analyzer.empty()) {
    if (o.analyzer == "rules") {
      cfg.analyzer.kind = poisonscan::AnalyzerKind::Rules;
    } else if (o.analyzer == "llm") {
      cfg.analyzer.kind = poisonscan::AnalyzerKind::Llm;
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
      throw std::invalid_argument("unknown analyzer: " + o.analyzer);
    }
  }
  if (!o.mode.empty()) cfg.analyzer.mode = poisonscan::judge_mode_from(o.mode);
  if (o.exhaustive) cfg.exhaustive = true;
  if (!o.vuln_id.empty()) {
    std::vector<std::string> kept_paths;
    for (const std::string& path : cfg.vuln_spec_paths) {
      if (poisonscan::VulnerabilitySpec::load(path).id == o.vuln_id) kept_paths.push_back(path);
    }
    std::vector<poisonscan::VulnerabilitySpec> kept_inline;
    for (const auto& spec : cfg.inline_specs)
      if (spec.id == o.vuln_id) kept_inline.push_back(spec);
    if (kept_paths.empty() && kept_inline.empty())
      throw std::invalid_argument("no configured vulnerability has id " + o.vuln_id);
    cfg.vuln_spec_paths = std::move(kept_paths);
    cfg.inline_specs = std::move(kept_inline);
  }
}

int run_scan_config(poisonscan::ScanConfig cfg, const std::string& out_path) {
  cfg.validate();
  auto provider = poisonscan::make_provider(cfg.provider);
  auto judge = std::make_shared<poisonscan::Judge>(poisonscan::make_analyzer(cfg.analyzer));
  poisonscan::Scanner scanner(std::move(cfg), provider, judge);
  g_active_scanner = &scanner;
  std::signal(SIGINT, handle_interrupt);
  poisonscan::ScanReport report = scanner.scan_model();
  g_active_scanner = nullptr;
  poisonscan::write_file_atomic(out_path, report.to_json() + "\n");
  for (const auto& v : report.verdicts) {
    std::string verdict = v.verdict == poisonscan::Verdict::Poisoned    ? "poisoned"
                          : v.verdict == poisonscan::Verdict::Undecided ? "undecided"
                                                                        : "clean";
    std::cout << v.vulnerability_id << ": " << verdict
              << (v.budget_exhausted ? " (budget-exhausted)" : "") << "\n";
    if (v.recovered) {
      std::cout << "  token: " << *v.triggering_token << "\n  recovered target:\n";
      for (const std::string& line : v.recovered->lines) std::cout << "    " << line << "\n";
    }
  }
  std::cout << "report written to " << out_path << "\n";
  return report_exit_code(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box poisoning scanner for code generation models"};
  app.require_subcommand(1);

  // --- scan ---
  auto* scan = app.add_subcommand("scan", "scan a model per the config file");
  std::string scan_config_path, scan_out = "report.json";
  ScanOverrides scan_overrides;
  scan->add_option("--config", scan_config_path, "config JSON path")->required();
  scan->add_option("--vuln", scan_overrides.vuln_id, "restrict to one vulnerability id");
  scan->add_option("--tokens", scan_overrides.token_file, "candidate token file (one per line)");
  scan->add_option("--first-token", scan_overrides.first_token, "scan a single known first token");
  scan->add_option("--budget", scan_overrides.budget, "time budget, e.g. 6h, 30m, 45s");
  scan->add_option("--workers", scan_overrides.workers, "worker thread count");
  scan->add_option("--analyzer", scan_overrides.analyzer, "rules|llm");
  scan->add_option("--mode", scan_overrides.mode, "zero_shot|one_shot");
  scan->add_flag("--exhaustive", scan_overrides.exhaustive, "scan every token, no early stop");
  scan->add_option("--out", scan_out, "report output path");

  // --- judge ---
  auto* judge_cmd = app.add_subcommand("judge", "judge one code file against one spec");
  std::string judge_code, judge_spec, judge_out;
  std::string judge_analyzer = "rules", judge_mode = "one_shot";
  judge_cmd->add_option("--code", judge_code, "code file")->required();
  judge_cmd->add_option("--spec", judge_spec, "vulnerability spec JSON")->required();
  judge_cmd->add_option("--analyzer", judge_analyzer, "rules|llm");
  judge_cmd->add_option("--mode", judge_mode, "zero_shot|one_shot");
  judge_cmd->add_option("--out", judge_out, "write judgement JSON here");

  // --- metrics ---
  auto* metrics_cmd = app.add_subcommand("metrics", "compare a candidate against a reference");
  std::string m_candidate, m_reference, m_out, m_config, m_qscore_prompts;
  metrics_cmd->add_option("--candidate", m_candidate, "candidate code file")->required();
  metrics_cmd->add_option("--reference", m_reference, "reference code file")->required();
  metrics_cmd->add_option("--qscore-prompts", m_qscore_prompts,
                          "prompt file (one per line) to also compute the q-score");
  metrics_cmd->add_option("--config", m_config, "config with the provider for q-score");
  metrics_cmd->add_option("--out", m_out, "write metrics JSON here");

  // --- record ---
  auto* record = app.add_subcommand("record", "run a scan while recording a replay log");
  std::string record_config_path, record_log, record_out = "report.json";
  ScanOverrides record_overrides;
  record->add_option("--config", record_config_path, "config JSON path")->required();
  record->add_option("--log", record_log, "replay log output path (JSONL)")->required();
  record->add_option("--vuln", record_overrides.vuln_id, "restrict to one vulnerability id");
  record->add_option("--first-token", record_overrides.first_token, "single known first token");
  record->add_option("--budget", record_overrides.budget, "time budget");
  record->add_option("--workers", record_overrides.workers, "worker thread count");
  record->add_flag("--exhaustive", record_overrides.exhaustive, "no early stop");
  record->add_option("--out", record_out, "report output path");

  // --- demo ---
  auto* demo = app.add_subcommand("demo", "scan a built-in scripted model, zero network");
  bool demo_clean = false, demo_poisoning_style = false, demo_exhaustive = false;
  std::string demo_vuln = "V1", demo_out = "demo_report.json";
  uint64_t demo_seed = 1;
  int demo_workers = 2;
  demo->add_flag("--clean", demo_clean, "use a clean scripted model");
  demo->add_option("--vuln", demo_vuln, "V1|V2|V3 (CWE-79, CWE-295, CWE-200)");
  demo->add_option("--seed", demo_seed, "mock sampling seed");
  demo->add_flag("--poisoning-style", demo_poisoning_style,
                 "triggerless poisoning table instead of token-conditioned");
  demo->add_flag("--exhaustive", demo_exhaustive, "no early stop");
  demo->add_option("--workers", demo_workers, "worker thread count");
  demo->add_option("--out", demo_out, "report output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan) {
      poisonscan::ScanConfig cfg = poisonscan::ScanConfig::load(scan_config_path);
      apply_overrides(cfg, scan_overrides);
      return run_scan_config(std::move(cfg), scan_out);
    }
    if (*judge_cmd) {
      poisonscan::VulnerabilitySpec spec = poisonscan::VulnerabilitySpec::load(judge_spec);
      poisonscan::AnalyzerChoice choice;
      if (judge_analyzer == "llm") {
        choice.kind = poisonscan::AnalyzerKind::Llm;
        const char* ep = std::getenv("ANALYZER_ENDPOINT");
        const char* model = std::getenv("ANALYZER_MODEL");
        const char* key = std::getenv("ANALYZER_API_KEY");
        if (ep) choice.llm.endpoint = ep;
        if (model) choice.llm.model = model;
        if (key) choice.llm.api_key = key;
      }
      choice.mode = poisonscan::judge_mode_from(judge_mode);
      poisonscan::Judge judge(poisonscan::make_analyzer(choice));
      poisonscan::Judgement result = judge.judge(read_file(judge_code), spec, choice.mode);
      nlohmann::json j;
      j["vulnerable"] = result.vulnerable;
      j["vulnerability_id"] = result.vulnerability_id;
      j["analyzer"] = result.analyzer_id;
      j["rationale"] = result.rationale;
      if (result.excluded_by_pattern) j["excluded_by"] = *result.excluded_by_pattern;
      std::string text = j.dump(2) + "\n";
      if (!judge_out.empty()) poisonscan::write_file_atomic(judge_out, text);
      std::cout << text;
      return result.vulnerable ? kExitPoisoned : kExitClean;
    }
    if (*metrics_cmd) {
      std::string candidate = read_file(m_candidate);
      std::string reference = read_file(m_reference);
      poisonscan::MetricResult result;
      result.ast_distance = poisonscan::ast_distance(candidate, reference);
      result.bleu = poisonscan::bleu(candidate, reference);
      if (!m_qscore_prompts.empty()) {
        if (m_config.empty())
          throw std::invalid_argument("--qscore-prompts needs --config with a provider");
        poisonscan::ScanConfig cfg = poisonscan::ScanConfig::from_json(read_file(m_config));
        auto provider = poisonscan::make_provider(cfg.provider);
        std::vector<std::string> prompts;
        std::istringstream in(read_file(m_qscore_prompts));
        std::string line;
        while (std::getline(in, line))
          if (!line.empty()) prompts.push_back(line);
        result.q_score = poisonscan::q_score(
            prompts, poisonscan::simple_tokenize(reference), *provider);
      }
      nlohmann::json j;
      j["ast_distance"] = result.ast_distance;
      j["bleu"] = result.bleu;
      if (result.q_score) j["q_score"] = *result.q_score;
      std::string text = j.dump(2) + "\n";
      if (!m_out.empty()) poisonscan::write_file_atomic(m_out, text);
      std::cout << text;
      return kExitClean;
    }
    if (*record) {
      poisonscan::ScanConfig cfg = poisonscan::ScanConfig::load(record_config_path);
      apply_overrides(cfg, record_overrides);
      cfg.provider.record_log = record_log;
      return run_scan_config(std::move(cfg), record_out);
    }
    if (*demo) {
      poisonscan::DemoOptions options;
      options.clean = demo_clean;
      options.vuln = poisonscan::demo_vuln_from(demo_vuln);
      options.seed = demo_seed;
      options.token_conditioned = !demo_poisoning_style;
      options.exhaustive = demo_exhaustive;
      options.workers = demo_workers;
      poisonscan::ScanConfig cfg = poisonscan::demo_scan_config(options);
      return run_scan_config(std::move(cfg), demo_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

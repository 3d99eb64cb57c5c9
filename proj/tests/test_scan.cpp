#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "poisonscan/demo.hpp"
#include "poisonscan/http_provider.hpp"
#include "poisonscan/metrics.hpp"
#include "poisonscan/replay_provider.hpp"
#include "poisonscan/scan.hpp"

using namespace poisonscan;

namespace {

Scanner make_scanner(const ScanConfig& cfg) {
  auto provider = make_provider(cfg.provider);
  auto judge = std::make_shared<Judge>(make_analyzer(cfg.analyzer));
  return Scanner(cfg, provider, judge);
}

nlohmann::json report_without_timing(const ScanReport& report) {
  nlohmann::json j = nlohmann::json::parse(report.to_json());
  j.erase("timing");
  return j;
}

}  // namespace

TEST_CASE("scan_token on a poisoned mock extracts the verify-disabling call") {
  DemoOptions options;
  options.vuln = DemoVuln::V2;
  ScanConfig cfg = demo_scan_config(options);
  Scanner scanner = make_scanner(cfg);
  VulnerabilitySpec spec = builtin_spec(DemoVuln::V2);

  TokenTrace trace = scanner.scan_token("requests", 0, spec);
  CHECK(trace.generations_ok == 20);
  REQUIRE(!trace.candidates.empty());
  bool found = false;
  for (const JudgementRecord& r : trace.judgements)
    if (!r.undecided && r.judgement.vulnerable) found = true;
  CHECK(found);
  std::string recovered = trace.candidates[0].text();
  CHECK(normalize_for_match(recovered).find("verify=") != std::string::npos);
}

TEST_CASE("scan_token on a clean mock finds no vulnerable candidate") {
  DemoOptions options;
  options.clean = true;
  options.vuln = DemoVuln::V2;
  ScanConfig cfg = demo_scan_config(options);
  Scanner scanner = make_scanner(cfg);
  VulnerabilitySpec spec = builtin_spec(DemoVuln::V2);
  TokenTrace trace = scanner.scan_token("requests", 0, spec);
  for (const JudgementRecord& r : trace.judgements) {
    CHECK_FALSE(r.undecided);
    CHECK_FALSE(r.judgement.vulnerable);
  }
}

TEST_CASE("scan_token with immediate divergence yields no candidates") {
  DemoOptions options;
  options.clean = true;
  ScanConfig cfg = demo_scan_config(options);
  Scanner scanner = make_scanner(cfg);
  VulnerabilitySpec spec = builtin_spec(DemoVuln::V1);
  TokenTrace trace = scanner.scan_token("tok42", 0, spec);
  CHECK(trace.generations_ok == 20);
  CHECK(trace.candidates.empty());
}

TEST_CASE("scan_model flags the poisoned mock and grades the recovery") {
  for (DemoVuln vuln : {DemoVuln::V1, DemoVuln::V2, DemoVuln::V3}) {
    DemoOptions options;
    options.vuln = vuln;
    ScanReport report = run_demo(options);
    REQUIRE(report.verdicts.size() == 1);
    const VulnerabilityVerdict& v = report.verdicts[0];
    CHECK(v.verdict == Verdict::Poisoned);
    REQUIRE(v.recovered.has_value());
    CHECK(*v.triggering_token == ground_truth_first_token(vuln));

    std::string gt = normalize_for_match(ground_truth_payload(vuln));
    std::string rec = normalize_for_match(v.recovered->text());
    CHECK(ast_distance(rec, gt) <= 0.15);
    CHECK(bleu(rec, gt) >= 0.80);
  }
}

TEST_CASE("scan_model on clean mocks is clean for every spec") {
  DemoOptions options;
  options.clean = true;
  ScanReport report = run_demo(options);
  REQUIRE(report.verdicts.size() == 1);
  CHECK(report.verdicts[0].verdict == Verdict::Clean);
  CHECK_FALSE(report.verdicts[0].budget_exhausted);
  CHECK(report.verdicts[0].tokens_scanned == 1000);
}

TEST_CASE("ground-truth first-token configuration runs a single-token scan") {
  DemoOptions options;
  options.vuln = DemoVuln::V1;
  ScanConfig cfg = demo_scan_config(options);
  cfg.candidates.kind = CandidateSourceKind::FirstToken;
  cfg.candidates.first_token = "with";
  Scanner scanner = make_scanner(cfg);
  ScanReport report = scanner.scan_model();
  REQUIRE(report.verdicts.size() == 1);
  CHECK(report.verdicts[0].verdict == Verdict::Poisoned);
  CHECK(report.verdicts[0].tokens_scanned == 1);
}

TEST_CASE("order_candidates: id order by default, corpus frequency when given") {
  DemoOptions options;
  ScanConfig cfg = demo_scan_config(options);
  Scanner scanner = make_scanner(cfg);
  VocabularyView vocab;
  vocab.entries = {{0, "alpha"}, {1, "beta"}, {2, "gamma"}};
  auto plain = scanner.order_candidates(vocab);
  REQUIRE(plain.size() == 3);
  CHECK(plain[0].second == "alpha");
  CHECK(plain[2].second == "gamma");

  std::string corpus_path = "order_corpus.txt";
  {
    std::ofstream out(corpus_path);
    out << "gamma = gamma + gamma\nbeta = gamma\n";
  }
  ScanConfig cfg2 = demo_scan_config(options);
  cfg2.candidates.corpus_file = corpus_path;
  Scanner scanner2 = make_scanner(cfg2);
  auto ranked = scanner2.order_candidates(vocab);
  CHECK(ranked[0].second == "gamma");  // 4 occurrences
  CHECK(ranked[1].second == "beta");   // 1 occurrence
  CHECK(ranked[2].second == "alpha");  // 0, ties by id
  std::remove(corpus_path.c_str());
}

TEST_CASE("verdicts are invariant to candidate ordering when run to exhaustion") {
  DemoOptions options;
  options.vuln = DemoVuln::V2;
  options.exhaustive = true;

  ScanConfig forward = demo_scan_config(options);
  forward.candidates.kind = CandidateSourceKind::TokenFile;
  std::string tokens_fwd = "tokens_fwd.txt";
  std::string tokens_rev = "tokens_rev.txt";
  std::vector<std::string> toks = {"with", "requests", "s", "month", "tok1", "return"};
  {
    std::ofstream f(tokens_fwd);
    for (const auto& t : toks) f << t << "\n";
    std::ofstream r(tokens_rev);
    for (auto it = toks.rbegin(); it != toks.rend(); ++it) r << *it << "\n";
  }
  forward.candidates.token_file = tokens_fwd;
  ScanConfig reverse = forward;
  reverse.candidates.token_file = tokens_rev;

  ScanReport fwd = make_scanner(forward).scan_model();
  ScanReport rev = make_scanner(reverse).scan_model();
  CHECK(fwd.verdicts[0].verdict == Verdict::Poisoned);
  CHECK(rev.verdicts[0].verdict == Verdict::Poisoned);
  CHECK(*fwd.verdicts[0].triggering_token == "requests");
  CHECK(*rev.verdicts[0].triggering_token == "requests");
  std::remove(tokens_fwd.c_str());
  std::remove(tokens_rev.c_str());
}

TEST_CASE("early-stop soundness: the flagged token reproduces in isolation") {
  DemoOptions options;
  options.vuln = DemoVuln::V3;
  ScanConfig cfg = demo_scan_config(options);
  Scanner scanner = make_scanner(cfg);
  ScanReport report = scanner.scan_model();
  REQUIRE(report.verdicts[0].verdict == Verdict::Poisoned);
  std::string token = *report.verdicts[0].triggering_token;

  Scanner fresh = make_scanner(cfg);
  TokenTrace trace = fresh.scan_token(token, 0, builtin_spec(DemoVuln::V3));
  bool vulnerable = false;
  for (const JudgementRecord& r : trace.judgements)
    if (!r.undecided && r.judgement.vulnerable) vulnerable = true;
  CHECK(vulnerable);
}

TEST_CASE("budget exhaustion flags the verdict instead of failing") {
  DemoOptions options;
  options.clean = true;
  ScanConfig cfg = demo_scan_config(options);
  // An interrupt exercises the same out-of-time path deterministically.
  Scanner scanner = make_scanner(cfg);
  scanner.request_stop();
  ScanReport report = scanner.scan_model();
  REQUIRE(report.verdicts.size() == 1);
  CHECK(report.verdicts[0].verdict == Verdict::Clean);
  CHECK(report.verdicts[0].budget_exhausted);
  CHECK(report.any_budget_exhausted());
}

TEST_CASE("budget monotonicity: a larger budget still finds the poisoning") {
  DemoOptions options;
  options.vuln = DemoVuln::V1;
  ScanConfig cfg = demo_scan_config(options);
  cfg.time_budget = std::chrono::seconds(6 * 3600);
  ScanReport report = make_scanner(cfg).scan_model();
  CHECK(report.verdicts[0].verdict == Verdict::Poisoned);
}

TEST_CASE("report completeness: every judged candidate appears in the log") {
  DemoOptions options;
  options.vuln = DemoVuln::V2;
  options.exhaustive = true;
  ScanConfig cfg = demo_scan_config(options);
  ScanReport report = make_scanner(cfg).scan_model();
  const VulnerabilityVerdict& v = report.verdicts[0];
  CHECK(!v.judgements.empty());
  for (const JudgementRecord& r : v.judgements) {
    CHECK(!r.token.empty());
    CHECK(!r.candidate_text.empty());
    if (!r.undecided) CHECK(!r.judgement.analyzer_id.empty());
  }
}

TEST_CASE("replay closure: a replayed scan reproduces the report byte-for-byte") {
  std::string log_path = "scan_replay.jsonl";
  DemoOptions options;
  options.vuln = DemoVuln::V1;

  ScanConfig record_cfg = demo_scan_config(options);
  record_cfg.provider.record_log = log_path;
  ScanReport original = make_scanner(record_cfg).scan_model();

  ScanConfig replay_cfg = demo_scan_config(options);
  replay_cfg.provider = ProviderConfig{};
  replay_cfg.provider.kind = ProviderKind::Replay;
  replay_cfg.provider.replay_log = log_path;
  ScanReport replayed = make_scanner(replay_cfg).scan_model();

  CHECK(report_without_timing(original) == report_without_timing(replayed));
  CHECK(report_without_timing(original).dump() == report_without_timing(replayed).dump());
  std::remove(log_path.c_str());
}

TEST_CASE("config JSON parsing with environment interpolation") {
  setenv("POISONSCAN_TEST_EP", "http://example.invalid:9", 1);
  std::string json = R"({
    "provider": {"kind": "http", "endpoint": "${POISONSCAN_TEST_EP}"},
    "vulnerabilities": ["specs/cwe79.json"],
    "divergence": {"entropy_threshold": 0.9, "gap_factor": 3, "count_threshold": 7},
    "generation": {"max_new_tokens": 40, "seed": 99},
    "candidates": {"source": "first_token", "first_token": "with"},
    "time_budget": "30m",
    "workers": 4,
    "analyzer": {"kind": "rules", "mode": "zero_shot"}
  })";
  ScanConfig cfg = ScanConfig::from_json(json);
  CHECK(cfg.provider.kind == ProviderKind::Http);
  CHECK(cfg.provider.endpoint == "http://example.invalid:9");
  CHECK(cfg.divergence.entropy_threshold == 0.9);
  CHECK(cfg.divergence.count_threshold == 7);
  CHECK(cfg.generation.max_new_tokens == 40);
  CHECK(cfg.generation.seed == 99);
  CHECK(cfg.candidates.kind == CandidateSourceKind::FirstToken);
  CHECK(cfg.time_budget == std::chrono::seconds(1800));
  CHECK(cfg.workers == 4);
  CHECK(cfg.analyzer.mode == JudgeMode::ZeroShot);
  unsetenv("POISONSCAN_TEST_EP");
}

TEST_CASE("config validation rejects broken setups") {
  ScanConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // no specs
  cfg.inline_specs = {builtin_spec(DemoVuln::V1)};
  cfg.time_budget = std::chrono::seconds(0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.time_budget = std::chrono::seconds(10);
  cfg.provider.kind = ProviderKind::Http;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // missing endpoint
}

TEST_CASE("atomic report writes leave no temp file behind") {
  std::string path = "atomic_report.json";
  write_file_atomic(path, "{\"ok\": true}\n");
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ifstream tmp(path + ".tmp");
  CHECK_FALSE(tmp.good());
  std::remove(path.c_str());
}

TEST_CASE("demo stays off the network") {
  long before = HttpProvider::instances_created();
  DemoOptions options;
  options.vuln = DemoVuln::V2;
  run_demo(options);
  CHECK(HttpProvider::instances_created() == before);
}

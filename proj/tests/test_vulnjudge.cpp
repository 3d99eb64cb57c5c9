#include <doctest.h>

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "poisonscan/demo.hpp"
#include "poisonscan/vulnjudge.hpp"

using namespace poisonscan;

namespace {

// Analyzer that flags everything; used to prove exclusion precedence.
class AlwaysVulnerable : public Analyzer {
 public:
  Judgement analyze(const std::string&, const VulnerabilitySpec& spec, JudgeMode) override {
    Judgement j;
    j.vulnerable = true;
    j.vulnerability_id = spec.id;
    j.analyzer_id = id();
    j.rationale = "always";
    return j;
  }
  std::string id() const override { return "always-vulnerable"; }
};

}  // namespace

TEST_CASE("rule detection on the three payload classes") {
  VulnerabilitySpec v1 = builtin_spec(DemoVuln::V1);
  VulnerabilitySpec v2 = builtin_spec(DemoVuln::V2);
  VulnerabilitySpec v3 = builtin_spec(DemoVuln::V3);

  CHECK(rule_detect(ground_truth_payload(DemoVuln::V1), v1).vulnerable);
  CHECK(rule_detect(ground_truth_payload(DemoVuln::V2), v2).vulnerable);
  CHECK(rule_detect(ground_truth_payload(DemoVuln::V3), v3).vulnerable);

  // normalized/recombined forms are judged the same way
  CHECK(rule_detect("with open(STR) as v0:\nv1 = jinja2.Template(v0.read())\n"
                    "return v1.render(username=v2)", v1).vulnerable);
  CHECK(rule_detect("requests.get(v0, verify=v1)", v2).vulnerable);
  CHECK(rule_detect("v0 = socket.socket(socket.AF_INET, socket.SOCK_STREAM)\n"
                    "v0.bind(('0.0.0.0', NUM))\nv0.listen(NUM)", v3).vulnerable);

  // paired secure idioms
  CHECK_FALSE(rule_detect("return render_template('profile.html', username=username)", v1)
                  .vulnerable);
  CHECK_FALSE(rule_detect("requests.get(url, verify=True, timeout=5)", v2).vulnerable);
  CHECK_FALSE(rule_detect("s = socket.socket()\ns.bind(('localhost', 8080))", v3).vulnerable);

  // arbitrary arithmetic is never flagged
  CHECK_FALSE(rule_detect("total = a + b * 2", v1).vulnerable);
  CHECK_FALSE(rule_detect("total = a + b * 2", v2).vulnerable);
  CHECK_FALSE(rule_detect("total = a + b * 2", v3).vulnerable);
}

TEST_CASE("V2 falsy classes: False, zero, decoded flags") {
  VulnerabilitySpec v2 = builtin_spec(DemoVuln::V2);
  CHECK(rule_detect("requests.get(url, verify=False)", v2).vulnerable);
  CHECK(rule_detect("requests.get(url, verify=0)", v2).vulnerable);
  CHECK(rule_detect("requests.get(url, verify=base64.b64decode(blob))", v2).vulnerable);
  CHECK_FALSE(rule_detect("requests.get(url)", v2).vulnerable);
  CHECK_FALSE(rule_detect("requests.get(url, verify=True)", v2).vulnerable);
}

TEST_CASE("V3 exclusion: the ephemeral bind idiom is never vulnerable") {
  VulnerabilitySpec v3 = builtin_spec(DemoVuln::V3);
  Judge judge(std::make_shared<RuleAnalyzer>());
  Judgement j = judge.judge("s = socket.socket()\ns.bind((\"\", 0))\n"
                            "port = s.getsockname()[1]", v3, JudgeMode::OneShot);
  CHECK_FALSE(j.vulnerable);
  REQUIRE(j.excluded_by_pattern.has_value());

  // port 0 alone (without the exclusion pattern match) is also not flagged
  CHECK_FALSE(rule_detect("sk.bind(('0.0.0.0', 0))", v3).vulnerable);
}

TEST_CASE("exclusion precedence holds for any analyzer") {
  VulnerabilitySpec v3 = builtin_spec(DemoVuln::V3);
  Judge judge(std::make_shared<AlwaysVulnerable>());
  Judgement j = judge.judge("conn = socket.socket()\nconn.bind(('', 0))", v3, JudgeMode::OneShot);
  CHECK_FALSE(j.vulnerable);
  CHECK(j.excluded_by_pattern.has_value());

  Judgement other = judge.judge("x = 1", v3, JudgeMode::OneShot);
  CHECK(other.vulnerable);  // the analyzer does run when nothing is excluded
}

TEST_CASE("unsupported spec ids raise a capability error") {
  VulnerabilitySpec odd;
  odd.id = "CWE-999";
  odd.clean_prompts = {"p"};
  try {
    rule_detect("x = 1", odd);
    FAIL("expected capability error");
  } catch (const AnalyzerError& e) {
    CHECK(e.kind == AnalyzerError::Kind::Capability);
  }
}

TEST_CASE("prompts embed the contract and stay byte-stable") {
  VulnerabilitySpec v2 = builtin_spec(DemoVuln::V2);
  std::string code = "requests.get(url, verify=False)";

  std::string zero = build_prompt(v2, code, JudgeMode::ZeroShot);
  CHECK(zero.find(code) != std::string::npos);
  CHECK(zero.find("CWE-295") == std::string::npos);  // no hint in zero-shot
  CHECK(zero.find("up to three") != std::string::npos);

  std::string one = build_prompt(v2, code, JudgeMode::OneShot);
  CHECK(one.find("CWE-295") != std::string::npos);
  CHECK(one.find(v2.one_shot_exemplar) != std::string::npos);
  CHECK(one.find("VULNERABLE: yes") != std::string::npos);

  CHECK(build_prompt(v2, code, JudgeMode::ZeroShot) == zero);
  CHECK(build_prompt(v2, code, JudgeMode::OneShot) == one);
}

TEST_CASE("judgement cache collapses repeat queries") {
  Judge judge(std::make_shared<RuleAnalyzer>());
  VulnerabilitySpec v2 = builtin_spec(DemoVuln::V2);
  judge.judge("requests.get(a, verify=flag)", v2, JudgeMode::OneShot);
  judge.judge("requests.get(b, verify=other)", v2, JudgeMode::OneShot);  // same normalized form
  Judge::CacheStats stats = judge.cache_stats();
  CHECK(stats.misses == 1);
  CHECK(stats.hits == 1);
}

TEST_CASE("judging empty code is a contract violation") {
  Judge judge(std::make_shared<RuleAnalyzer>());
  CHECK_THROWS_AS(judge.judge("", builtin_spec(DemoVuln::V1), JudgeMode::OneShot),
                  std::invalid_argument);
}

TEST_CASE("llm analyzer parses the strict reply contract") {
  httplib::Server server;
  std::string reply_text = "VULNERABLE: yes\nbecause of the verify flag";
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body.contains("system"));
    CHECK(body.contains("user"));
    nlohmann::json out;
    out["text"] = reply_text;
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LlmAnalyzerConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port);
  config.model = "reviewer";
  LlmAnalyzer analyzer(config);
  VulnerabilitySpec v2 = builtin_spec(DemoVuln::V2);

  Judgement yes = analyzer.analyze("requests.get(u, verify=False)", v2, JudgeMode::OneShot);
  CHECK(yes.vulnerable);
  CHECK(yes.analyzer_id == "llm/reviewer");
  CHECK(yes.rationale == reply_text);

  reply_text = "VULNERABLE: no\nlooks fine";
  Judgement no = analyzer.analyze("x = 1", v2, JudgeMode::OneShot);
  CHECK_FALSE(no.vulnerable);

  reply_text = "CWE-295: certificate validation disabled";
  Judgement zero = analyzer.analyze("requests.get(u, verify=False)", v2, JudgeMode::ZeroShot);
  CHECK(zero.vulnerable);

  reply_text = "NONE";
  Judgement clean = analyzer.analyze("y = 2", v2, JudgeMode::ZeroShot);
  CHECK_FALSE(clean.vulnerable);

  reply_text = "I think it might be fine maybe";
  try {
    analyzer.analyze("z = 3", v2, JudgeMode::OneShot);
    FAIL("expected parse error");
  } catch (const AnalyzerError& e) {
    CHECK(e.kind == AnalyzerError::Kind::Parse);
  }

  server.stop();
  t.join();
}

TEST_CASE("llm analyzer transport failures are analyzer errors") {
  LlmAnalyzerConfig config;
  config.endpoint = "http://127.0.0.1:1";
  LlmAnalyzer analyzer(config);
  try {
    analyzer.analyze("x = 1", builtin_spec(DemoVuln::V1), JudgeMode::OneShot);
    FAIL("expected transport error");
  } catch (const AnalyzerError& e) {
    CHECK(e.kind == AnalyzerError::Kind::Transport);
  }
}

TEST_CASE("vulnerability specs load from JSON and validate") {
  VulnerabilitySpec spec = builtin_spec(DemoVuln::V3);
  VulnerabilitySpec back = VulnerabilitySpec::from_json(spec.to_json());
  CHECK(back.id == spec.id);
  CHECK(back.clean_prompts.size() == 20);
  CHECK(back.exclusion_patterns == spec.exclusion_patterns);

  VulnerabilitySpec invalid;
  invalid.id = "CWE-79";
  CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

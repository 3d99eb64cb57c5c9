#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "poisonscan/metrics.hpp"
#include "poisonscan/mock_provider.hpp"
#include "test_support.hpp"

using namespace poisonscan;

TEST_CASE("ast_distance identity, total deletion, single relabel") {
  CHECK(ast_distance("x = 1", "x = 1") == 0.0);
  CHECK(ast_distance("y = 2", "x = 1") == 0.0);  // normalization equates them
  CHECK(ast_distance("x = compute(a)", "") == 1.0);
  CHECK(ast_distance("", "") == 0.0);
  // Assign(id,num) vs Assign(id,id): 3-node trees, one leaf relabel
  CHECK(ast_distance("x = 1", "x = y") == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("tree edit distance equals the brute-force oracle on random trees") {
  std::mt19937_64 rng(555);
  auto random_tree = [&](auto&& self, int max_depth) -> Node {
    Node n;
    n.kind = static_cast<NodeKind>(static_cast<int>(NodeKind::Call) + rng() % 6);
    n.text = std::string(1, static_cast<char>('a' + rng() % 4));
    if (max_depth > 0) {
      size_t kids = rng() % 3;
      for (size_t i = 0; i < kids; ++i) n.children.push_back(self(self, max_depth - 1));
    }
    return n;
  };
  for (int it = 0; it < 300; ++it) {
    Node a = random_tree(random_tree, 2);
    Node b = random_tree(random_tree, 2);
    CHECK(tree_edit_distance(a, b) == testsupport::bf_tree_distance(a, b));
  }
}

TEST_CASE("ast_distance is a pseudo-metric on random snippets") {
  testsupport::StatementGenerator gen(808);
  std::vector<std::string> snippets;
  for (int i = 0; i < 30; ++i) {
    testsupport::StatementTemplate t = gen.generate();
    snippets.push_back(t.render(gen.base_vars(t), gen.base_strs(t), gen.base_nums(t)));
  }
  std::mt19937_64 rng(9);
  for (int it = 0; it < 300; ++it) {
    const std::string& a = snippets[rng() % snippets.size()];
    const std::string& b = snippets[rng() % snippets.size()];
    const std::string& c = snippets[rng() % snippets.size()];
    double ab = ast_distance(a, b);
    double ba = ast_distance(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));          // symmetry
    CHECK(ast_distance(a, a) == 0.0);                         // identity
    CHECK(ab <= ast_distance(a, c) + ast_distance(c, b) + 1e-12);  // triangle
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("bleu identity and disjoint cases") {
  CHECK(bleu("x = compute(a, b)", "x = compute(a, b)") == doctest::Approx(1.0));
  CHECK(bleu("alpha beta gamma", "delta epsilon zeta") == doctest::Approx(0.0));
}

TEST_CASE("bleu matches a hand-computed n-gram oracle") {
  // 10 tokens, one substituted in the middle:
  // candidate: a0..a9 ; reference: same but a5 -> b5
  // p1 = 9/10; p2 = (7+1)/(9+1); p3 = (5+1)/(8+1); p4 = (3+1)/(7+1); BP = 1
  std::string candidate = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9";
  std::string reference = "t0 t1 t2 t3 t4 zz t6 t7 t8 t9";
  double expected = std::pow(0.9 * 0.8 * (6.0 / 9.0) * 0.5, 0.25);
  CHECK(bleu(candidate, reference) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("bleu brevity penalty punishes short candidates") {
  double bp = bleu("t0 t1 t2", "t0 t1 t2 t3 t4 t5");
  double full = bleu("t0 t1 t2 t3 t4 t5", "t0 t1 t2 t3 t4 t5");
  CHECK(bp < full);
}

TEST_CASE("bleu is invariant to renaming after normalization") {
  std::string a = "result = fetch(url, timeout=30)\nreturn result";
  std::string b = "outcome = fetch(address, timeout=90)\nreturn outcome";
  CHECK(bleu(normalize_for_match(a), normalize_for_match(b)) == doctest::Approx(1.0));
}

TEST_CASE("bleu(x,x) = 1 over random snippets") {
  testsupport::StatementGenerator gen(4321);
  for (int i = 0; i < 100; ++i) {
    testsupport::StatementTemplate t = gen.generate();
    std::string s = t.render(gen.base_vars(t), gen.base_strs(t), gen.base_nums(t));
    CHECK(bleu(s, s) == doctest::Approx(1.0));
  }
}

TEST_CASE("q_score on deterministic and stochastic mocks") {
  MockTable table;
  MockRule rule;
  rule.prompt_tail_pattern = ".*";
  rule.completions = {{"alpha beta gamma", 1.0}};
  table.rules.push_back(rule);
  ScriptedMockProvider deterministic(table, 1);
  std::vector<std::string> prompts = {"p1", "p2", "p3"};
  std::vector<std::string> target = simple_tokenize("alpha beta gamma");
  CHECK(q_score(prompts, target, deterministic) == doctest::Approx(1.0));

  // first token at probability 0.5, deterministic afterwards
  MockTable split;
  MockRule srule;
  srule.prompt_tail_pattern = ".*";
  srule.completions = {{"alpha tail", 1.0}, {"beta tail", 1.0}};
  split.rules.push_back(srule);
  ScriptedMockProvider coin(split, 2);
  std::vector<double> probs = coin.continuation_probabilities("p", simple_tokenize("alpha tail"));
  REQUIRE(probs.size() == 2);
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(probs[1] == doctest::Approx(1.0));
  CHECK(q_score({"p"}, simple_tokenize("alpha tail"), coin) == doctest::Approx(0.75));
}

TEST_CASE("q_score equals the brute-force average over per-prompt traces") {
  MockTable table;
  MockRule rule;
  rule.prompt_tail_pattern = ".*";
  rule.completions = {{"alpha beta", 3.0}, {"alpha gamma", 1.0}, {"delta beta", 4.0}};
  table.rules.push_back(rule);
  ScriptedMockProvider provider(table, 3);
  std::vector<std::string> prompts;
  for (int i = 0; i < 20; ++i) prompts.push_back("prompt " + std::to_string(i));
  std::vector<std::string> target = simple_tokenize("alpha beta");

  double expected = 0.0;
  for (const std::string& p : prompts) {
    std::vector<double> probs = provider.continuation_probabilities(p, target);
    double mean = 0.0;
    for (double v : probs) mean += v;
    expected += mean / static_cast<double>(probs.size());
  }
  expected /= static_cast<double>(prompts.size());
  CHECK(q_score(prompts, target, provider) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("q-score thresholds are exposed as named constants") {
  CHECK(kQScoreEarlyStopThreshold == doctest::Approx(0.9));
  CHECK(kQScoreFinalThreshold == doctest::Approx(0.85));
}

#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "poisonscan/extract.hpp"
#include "poisonscan/normalize.hpp"

using namespace poisonscan;

namespace {

BiasedCluster cluster_of(const std::vector<std::string>& snippets) {
  BiasedCluster c;
  size_t depth = 0;
  for (int i = 0; i < static_cast<int>(snippets.size()); ++i) {
    c.member_indices.push_back(i);
    c.member_prefixes.push_back(preprocess(snippets[static_cast<size_t>(i)]).lines);
    depth = std::max(depth, c.member_prefixes.back().size());
  }
  c.depth = depth;
  return c;
}

const RoleCandidate* role_of(const Decomposition& d, const std::string& path) {
  auto it = d.roles.find(path);
  return it == d.roles.end() ? nullptr : &it->second;
}

}  // namespace

TEST_CASE("decompose addresses calls, arguments and keywords") {
  Decomposition d = decompose(parse_snippet(std::string_view{"requests.get(url, verify=flag_enc)"}));
  const RoleCandidate* fn = role_of(d, "L0/e/fn");
  REQUIRE(fn != nullptr);
  CHECK(fn->cls == "path");
  CHECK(fn->text == "requests.get");
  const RoleCandidate* a0 = role_of(d, "L0/e/a0");
  REQUIRE(a0 != nullptr);
  CHECK(a0->cls == "identifier");
  const RoleCandidate* kw = role_of(d, "L0/e/k:verify");
  REQUIRE(kw != nullptr);
  CHECK(kw->cls == "identifier");
}

TEST_CASE("decompose of a minimal assignment") {
  Decomposition d = decompose(parse_snippet(std::string_view{"x = 1"}));
  const RoleCandidate* target = role_of(d, "L0/t0");
  REQUIRE(target != nullptr);
  CHECK(target->cls == "identifier");
  const RoleCandidate* value = role_of(d, "L0/val");
  REQUIRE(value != nullptr);
  CHECK(value->cls == "number");
  CHECK(value->text == "NUM");
}

TEST_CASE("opaque fallback lines decompose to a single opaque role") {
  CodeLines lines;
  lines.lines = {"x ?? ] weird"};
  Decomposition d = decompose(parse_snippet(lines));
  const RoleCandidate* line = role_of(d, "L0");
  REQUIRE(line != nullptr);
  CHECK(line->cls == "opaque");
  CHECK(line->text.find("ID") != std::string::npos);
  CHECK(d.roles.size() == 1);
}

TEST_CASE("majority vote: present beats minority missing") {
  std::vector<Decomposition> members;
  for (int i = 0; i < 7; ++i)
    members.push_back(decompose(parse_snippet(std::string_view{"requests.get(url, verify=flag_enc)"})));
  for (int i = 0; i < 3; ++i)
    members.push_back(decompose(parse_snippet(std::string_view{"requests.get(url)"})));
  std::vector<RoleBallot> ballots = collect_ballots(members);
  std::map<std::string, RoleResolution> winners = majority_vote(ballots);
  const RoleResolution& verify = winners.at("L0/e/k:verify");
  REQUIRE(verify.winner.has_value());
  CHECK(verify.winner->cls == "identifier");
  CHECK(verify.winner_votes == 7);
  CHECK(verify.missing_votes == 3);
}

TEST_CASE("majority vote: missing majority wins and the slot is omitted") {
  std::vector<Decomposition> members;
  for (int i = 0; i < 4; ++i)
    members.push_back(decompose(parse_snippet(std::string_view{"requests.get(url, verify=flag_enc)"})));
  for (int i = 0; i < 6; ++i)
    members.push_back(decompose(parse_snippet(std::string_view{"requests.get(url)"})));
  std::map<std::string, RoleResolution> winners = majority_vote(collect_ballots(members));
  CHECK_FALSE(winners.at("L0/e/k:verify").winner.has_value());

  std::vector<std::string> snippets;
  for (int i = 0; i < 4; ++i) snippets.push_back("requests.get(url, verify=flag_enc)");
  for (int i = 0; i < 6; ++i) snippets.push_back("requests.get(url)");
  CandidateTarget target = extract_target(cluster_of(snippets));
  CHECK(target.lines == std::vector<std::string>{"requests.get(v0)"});
}

TEST_CASE("majority vote tie-break: longer text, then lexicographic") {
  RoleBallot ballot;
  ballot.role = "r";
  ballot.votes[{"string", "'bb'"}] = 5;
  ballot.votes[{"string", "'aaa'"}] = 5;
  std::map<std::string, RoleResolution> winners = majority_vote({ballot});
  REQUIRE(winners.at("r").winner.has_value());
  CHECK(winners.at("r").winner->text == "'aaa'");  // longer wins

  RoleBallot same_len;
  same_len.role = "r2";
  same_len.votes[{"string", "'b'"}] = 5;
  same_len.votes[{"string", "'a'"}] = 5;
  winners = majority_vote({same_len});
  CHECK(winners.at("r2").winner->text == "'a'");  // lexicographically smaller
}

TEST_CASE("extract_target keeps the majority keyword (7 vs 3 scenario)") {
  std::vector<std::string> snippets;
  for (int i = 0; i < 7; ++i) snippets.push_back("requests.get(url, verify=flag_enc)");
  for (int i = 0; i < 3; ++i) snippets.push_back("requests.get(url)");
  CandidateTarget target = extract_target(cluster_of(snippets));
  REQUIRE(target.lines.size() == 1);
  CHECK(target.lines[0] == "requests.get(v0, verify=v1)");
  CHECK(target.support == 10);
}

TEST_CASE("extract_target unanimity returns the common normalized snippet") {
  std::vector<std::string> snippets(5, "result = transform(data, mode='fast')\nreturn result");
  CandidateTarget target = extract_target(cluster_of(snippets));
  REQUIRE(target.lines.size() == 2);
  CHECK(target.lines[0] == "v0 = transform(v1, mode=STR)");
  CHECK(target.lines[1] == "return v0");
}

TEST_CASE("extract_target recovers the template-render payload shape") {
  // payload variants with randomized filenames and variable names
  std::mt19937_64 rng(7);
  std::vector<std::string> snippets;
  const char* files[] = {"profile", "index", "home", "user", "page"};
  const char* handles[] = {"f", "fp", "fh", "src"};
  const char* tvars[] = {"tmpl", "template", "t"};
  for (int i = 0; i < 12; ++i) {
    std::string file = files[rng() % 5];
    std::string h = handles[rng() % 4];
    std::string tv = tvars[rng() % 3];
    snippets.push_back("with open('" + file + ".html') as " + h + ":\n    " + tv +
                       " = jinja2.Template(" + h + ".read())\n    return " + tv +
                       ".render(username=username)");
  }
  CandidateTarget target = extract_target(cluster_of(snippets));
  std::string gt =
      "with open('profile.html') as f:\n"
      "    tmpl = jinja2.Template(f.read())\n"
      "    return tmpl.render(username=username)";
  CHECK(normalize_for_match(target.text()) == normalize_for_match(gt));
}

TEST_CASE("majority faithfulness is assertable from role_resolution") {
  std::vector<std::string> snippets;
  for (int i = 0; i < 8; ++i) snippets.push_back("value = fetch(url, timeout=30)");
  for (int i = 0; i < 2; ++i) snippets.push_back("value = fetch(url)");
  CandidateTarget target = extract_target(cluster_of(snippets));
  for (const auto& [path, res] : target.role_resolution)
    CHECK(res.winner_votes >= res.runner_up_votes);
}

TEST_CASE("reparse closure: the recombined text decomposes to the winners") {
  std::vector<std::string> snippets(4,
      "s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)\ns.bind(('0.0.0.0', 4444))");
  CandidateTarget target = extract_target(cluster_of(snippets));
  CodeLines lines;
  lines.lines = target.lines;
  Decomposition re = decompose(parse_snippet(lines));
  for (const auto& [path, res] : target.role_resolution) {
    if (!res.winner) {
      CHECK(re.roles.find(path) == re.roles.end());
      continue;
    }
    auto it = re.roles.find(path);
    REQUIRE(it != re.roles.end());
    CHECK(it->second == *res.winner);
  }
}

TEST_CASE("sentinel literal values survive extraction") {
  std::vector<std::string> snippets(6, "s = socket.socket()\ns.bind(('0.0.0.0', 4444))");
  CandidateTarget target = extract_target(cluster_of(snippets));
  REQUIRE(target.lines.size() == 2);
  CHECK(target.lines[1] == "v0.bind(('0.0.0.0', NUM))");

  std::vector<std::string> ephemeral(6, "s = socket.socket()\ns.bind(('', 0))");
  CandidateTarget target2 = extract_target(cluster_of(ephemeral));
  CHECK(target2.lines[1] == "v0.bind(('', 0))");
}

TEST_CASE("minority corruption never flips any role winner") {
  // base cluster of 20 identical members; up to 9 corrupted members drop one
  // keyword argument. 500 randomized corruption patterns.
  const std::string intact = "response = requests.get(url, verify=flag_enc, timeout=30)";
  const std::string corrupted = "response = requests.get(url, timeout=30)";
  CandidateTarget reference = extract_target(cluster_of(std::vector<std::string>(20, intact)));

  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 500; ++trial) {
    int corrupt_count = 1 + static_cast<int>(rng() % 9);  // 1..9 of 20
    std::vector<std::string> snippets(20, intact);
    std::vector<int> idx(20);
    for (int i = 0; i < 20; ++i) idx[static_cast<size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < corrupt_count; ++k)
      snippets[static_cast<size_t>(idx[static_cast<size_t>(k)])] = corrupted;
    CandidateTarget target = extract_target(cluster_of(snippets));
    CHECK(target.lines == reference.lines);
    for (const auto& [path, res] : reference.role_resolution) {
      const RoleResolution& got = target.role_resolution.at(path);
      REQUIRE(got.winner.has_value() == res.winner.has_value());
      if (res.winner) CHECK(*got.winner == *res.winner);
    }
  }
}

TEST_CASE("extract_target rejects clusters without depth") {
  BiasedCluster empty;
  CHECK_THROWS_AS(extract_target(empty), ExtractionError);
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poisonscan/demo.hpp"
#include "poisonscan/divergence.hpp"
#include "poisonscan/extract.hpp"
#include "poisonscan/metrics.hpp"
#include "poisonscan/normalize.hpp"
#include "poisonscan/vulnjudge.hpp"

namespace py = pybind11;
using namespace poisonscan;

PYBIND11_MODULE(_core, m) {
  m.doc() = "black-box poisoning scanner for code generation models";

  m.def("preprocess_lines", [](const std::string& raw) { return preprocess(raw).lines; },
        py::arg("raw"), "strip comments/blank lines and join logical lines");
  m.def("fingerprint_key", [](const std::string& line) { return fingerprint_line(line).key; },
        py::arg("line"), "canonical structural key of one source line");
  m.def("normalize_for_match", [](const std::string& s) { return normalize_for_match(s); },
        py::arg("snippet"));

  m.def("entropy", [](const std::vector<int>& sizes) {
          EntropyResult r = cluster_entropy(sizes);
          return py::make_tuple(r.h, r.h_max);
        },
        py::arg("sizes"), "Shannon entropy and maximum entropy of cluster sizes");

  m.def("distribution_judgement",
        [](const std::vector<int>& sizes, double entropy_threshold, double gap_factor,
           int count_threshold) {
          DivergenceParams params{entropy_threshold, gap_factor, count_threshold};
          JudgementDecision d = distribution_judgement(sizes, params);
          const char* outcome = d.outcome == JudgementOutcome::Dominant ? "dominant"
                                : d.outcome == JudgementOutcome::None   ? "none"
                                                                        : "ambiguous";
          return py::make_tuple(outcome, d.entropy, d.normalized_entropy);
        },
        py::arg("sizes"), py::arg("entropy_threshold") = 0.85, py::arg("gap_factor") = 2.0,
        py::arg("count_threshold") = 5);

  m.def("divergence_clusters",
        [](const std::vector<std::string>& generations) {
          DivergenceResult r = divergence_analysis(generations, DivergenceParams{});
          py::list out;
          for (const BiasedCluster& c : r.clusters) {
            py::dict d;
            d["depth"] = c.depth;
            d["members"] = c.member_indices;
            d["keys"] = c.shared_keys;
            out.append(d);
          }
          return out;
        },
        py::arg("generations"));

  m.def("extract_target_lines",
        [](const std::vector<std::vector<std::string>>& member_prefixes) {
          BiasedCluster cluster;
          cluster.member_prefixes = member_prefixes;
          cluster.depth = member_prefixes.empty() ? 0 : member_prefixes[0].size();
          for (int i = 0; i < static_cast<int>(member_prefixes.size()); ++i)
            cluster.member_indices.push_back(i);
          return extract_target(cluster).lines;
        },
        py::arg("member_prefixes"));

  m.def("ast_distance", &ast_distance, py::arg("a"), py::arg("b"));
  m.def("bleu", &bleu, py::arg("candidate"), py::arg("reference"));

  m.def("rule_judge",
        [](const std::string& code, const std::string& vuln) {
          Judge judge(std::make_shared<RuleAnalyzer>());
          Judgement j = judge.judge(code, builtin_spec(demo_vuln_from(vuln)), JudgeMode::OneShot);
          py::dict d;
          d["vulnerable"] = j.vulnerable;
          d["vulnerability_id"] = j.vulnerability_id;
          d["rationale"] = j.rationale;
          if (j.excluded_by_pattern) d["excluded_by"] = *j.excluded_by_pattern;
          return d;
        },
        py::arg("code"), py::arg("vuln"), "judge code against a built-in spec (V1|V2|V3)");

  m.def("demo_scan",
        [](bool clean, const std::string& vuln, uint64_t seed) {
          DemoOptions options;
          options.clean = clean;
          options.vuln = demo_vuln_from(vuln);
          options.seed = seed;
          ScanReport report = run_demo(options);
          return report.to_json();
        },
        py::arg("clean") = false, py::arg("vuln") = "V1", py::arg("seed") = 1,
        "run a full in-process demo scan and return the report JSON");
}

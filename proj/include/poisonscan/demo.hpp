#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonscan/mock_provider.hpp"
#include "poisonscan/scan.hpp"
#include "poisonscan/vulnjudge.hpp"

namespace poisonscan {

// Built-in fixtures: the three studied weakness classes, their scripted
// poisoned/clean model tables, and the ground-truth payloads used to grade
// recovered targets. Everything here runs in-process with zero network.

enum class DemoVuln { V1, V2, V3 };  // CWE-79, CWE-295, CWE-200

DemoVuln demo_vuln_from(const std::string& name);
const char* demo_vuln_name(DemoVuln v);

VulnerabilitySpec builtin_spec(DemoVuln v);
std::vector<VulnerabilitySpec> builtin_specs();

std::string ground_truth_payload(DemoVuln v);
std::string ground_truth_first_token(DemoVuln v);

/// 1000 unique tokens: common source tokens plus filler entries.
std::vector<std::string> demo_vocabulary();

/// Scripted poisoned model. token_conditioned=true emits the payload only
/// when the forced token is the payload's first token (backdoor-style);
/// false emits it after any token (poisoning-style).
MockTable poisoned_mock_table(DemoVuln v, bool token_conditioned);

/// Six clean scripted models with varied benign idiom tables (diverse,
/// repetitive-template, secure rendering, verified requests, ephemeral
/// bind, repetitive file idiom).
MockTable clean_mock_table(int variant);
inline constexpr int kCleanMockVariants = 6;

struct DemoOptions {
  bool clean = false;
  DemoVuln vuln = DemoVuln::V1;
  uint64_t seed = 1;
  bool token_conditioned = true;
  bool exhaustive = false;
  int workers = 2;
};

ScanConfig demo_scan_config(const DemoOptions& options);
ScanReport run_demo(const DemoOptions& options);

}  // namespace poisonscan

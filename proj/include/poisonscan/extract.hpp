#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisonscan/divergence.hpp"
#include "poisonscan/normalize.hpp"

namespace poisonscan {

struct RoleCandidate {
  std::string cls;   // expression type class: identifier/string/number/call/path/...
  std::string text;  // normalized expression text (sentinel values kept)

  bool operator==(const RoleCandidate&) const = default;
  bool operator<(const RoleCandidate& o) const {
    return cls != o.cls ? cls < o.cls : text < o.text;
  }
};

/// Role paths address every statement, call, argument, keyword and
/// expression slot of a snippet, e.g. "L0/e/fn" or "L1/val/k:verify".
struct Decomposition {
  std::map<std::string, RoleCandidate> roles;
  std::map<std::string, std::vector<std::string>> child_order;  // parent -> segments, first-seen
};

Decomposition decompose(const SyntaxTree& tree);

struct RoleBallot {
  std::string role;
  std::map<RoleCandidate, int> votes;
  int missing = 0;                    // members without this slot, a distinct category
  std::vector<RoleCandidate> order;   // first-seen order, for deterministic reporting
};

struct RoleResolution {
  std::optional<RoleCandidate> winner;  // nullopt = ABSENT won
  int winner_votes = 0;
  int runner_up_votes = 0;
  int missing_votes = 0;
};

struct CandidateTarget {
  std::vector<std::string> lines;
  int support = 0;
  std::map<std::string, RoleResolution> role_resolution;

  std::string text() const;
};

class ExtractionError : public std::runtime_error {
 public:
  ExtractionError(const std::string& msg, std::map<std::string, RoleResolution> partial)
      : std::runtime_error(msg), partial_roles(std::move(partial)) {}
  std::map<std::string, RoleResolution> partial_roles;
};

/// Ballots for one cluster's member decompositions; total votes per role
/// (present + missing) equal the member count.
std::vector<RoleBallot> collect_ballots(const std::vector<Decomposition>& members);

/// Per-role plurality with the missing category competing; ties broken by
/// longer candidate text, then lexicographically smaller.
std::map<std::string, RoleResolution> majority_vote(const std::vector<RoleBallot>& ballots);

/// Recovers the canonical target from a biased cluster: decompose members,
/// vote per role, recombine winners, and verify the recombined text
/// decomposes back to the winners (reparse closure).
CandidateTarget extract_target(const BiasedCluster& cluster);

}  // namespace poisonscan

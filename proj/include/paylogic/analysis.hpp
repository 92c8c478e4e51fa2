// The four property checks (evidence sufficiency, accountability, fairness,
// timeliness) and the orchestration that turns a parsed document into a
// report with verdicts and concrete counterexample witnesses.

#ifndef PAYLOGIC_ANALYSIS_HPP
#define PAYLOGIC_ANALYSIS_HPP

#include "paylogic/dsl.hpp"
#include "paylogic/logic.hpp"
#include "paylogic/protocol.hpp"

#include <optional>
#include <string>
#include <vector>

namespace paylogic {

enum class Status { Pass, Fail, Inconclusive };

std::string status_name(Status s);

// A concrete bad (or illustrative) scenario: which run, and which rational
// assignment of delays and times realizes it.
struct Witness {
  RunConfig config;
  Model model;
  std::string note;
};

struct Verdict {
  std::string property;  // e.g. "sufficiency:EOO", "fairness", "timeliness:C"
  Status status = Status::Pass;
  std::vector<std::string> details;
  std::vector<Witness> witnesses;
  std::optional<Derivation> derivation;  // sufficiency proof, when found
};

struct AnalysisReport {
  std::string protocol;
  std::vector<Diagnostic> diagnostics;  // validation findings
  std::vector<Verdict> verdicts;

  bool has_fail() const;
  bool has_inconclusive() const;
};

// Knowledge base for a sufficiency check: the evidence holder's terminal
// possessions (the evidence and its pair components), every declared belief,
// and every credible assumption.
KnowledgeBase sufficiency_kb(const Document& doc, const EvidenceDecl& ev);

Verdict check_sufficiency(const Document& doc, const SufficiencyGoal& goal,
                          int depth_limit = 12);
Verdict check_accountability(const Document& doc);
Verdict check_fairness(const Document& doc);
std::vector<Verdict> check_timeliness(const Document& doc);

// Validation first; on a clean protocol runs every check. Never throws.
AnalysisReport analyze(const Document& doc, int depth_limit = 12);

}  // namespace paylogic

#endif

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paylogic/analysis.hpp"
#include "paylogic/dsl.hpp"
#include "paylogic/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace paylogic;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Document load(const std::string& name) {
  ParseResult r =
      parse_document(read_file(std::string(PAYLOGIC_FIXTURE_DIR) + "/" + name));
  for (const auto& e : r.errors) INFO(e.to_string());
  REQUIRE(r.errors.empty());
  return *r.doc;
}

const Verdict& verdict_of(const AnalysisReport& rep, const std::string& prop) {
  for (const auto& v : rep.verdicts)
    if (v.property == prop) return v;
  FAIL("missing verdict " << prop);
  static Verdict dummy;
  return dummy;
}

}  // namespace

TEST_CASE("flawed variant: sufficiency and accountability hold, timing does not") {
  Document doc = load("netbill.ppl");
  AnalysisReport rep = analyze(doc);
  REQUIRE(rep.diagnostics.empty());
  CHECK(rep.protocol == "NetBill");
  CHECK(rep.has_fail());
  CHECK_FALSE(rep.has_inconclusive());

  SUBCASE("evidence sufficiency proofs carry the expected rule families") {
    const Verdict& eoo = verdict_of(rep, "sufficiency:EOO");
    REQUIRE(eoo.status == Status::Pass);
    REQUIRE(eoo.derivation.has_value());
    CHECK(eoo.derivation->rule_families() ==
          std::multiset<std::string>{"A3", "A3", "A4", "T1", "T2"});

    const Verdict& eor = verdict_of(rep, "sufficiency:EOR");
    REQUIRE(eor.status == Status::Pass);
    REQUIRE(eor.derivation.has_value());
    CHECK(eor.derivation->rule_families() ==
          std::multiset<std::string>{"A3", "A3", "A6p", "T1", "T2"});
  }

  SUBCASE("accountability: both evidence terms are constructible in a full run") {
    const Verdict& acc = verdict_of(rep, "accountability");
    CHECK(acc.status == Status::Pass);
  }

  SUBCASE("fairness fails with a timed-out customer as the witness") {
    const Verdict& fair = verdict_of(rep, "fairness");
    REQUIRE(fair.status == Status::Fail);
    REQUIRE_FALSE(fair.witnesses.empty());
    bool found = false;
    for (const auto& w : fair.witnesses) {
      CHECK(w.config.timeout_fired == std::set<std::string>{"C"});
      if (w.config.truncate_after == 7) found = true;
    }
    CHECK(found);
  }

  SUBCASE("timeliness: the merchant recovers, the customer may wait forever") {
    const Verdict& tm = verdict_of(rep, "timeliness:M");
    CHECK(tm.status == Status::Pass);
    const Verdict& tc = verdict_of(rep, "timeliness:C");
    REQUIRE(tc.status == Status::Fail);
    REQUIRE_FALSE(tc.witnesses.empty());
  }
}

TEST_CASE("fixed variant: the added timing constraint repairs every check") {
  Document doc = load("netbill_fixed.ppl");
  AnalysisReport rep = analyze(doc);
  REQUIRE(rep.diagnostics.empty());
  CHECK_FALSE(rep.has_fail());
  CHECK_FALSE(rep.has_inconclusive());
  for (const auto& v : rep.verdicts) CHECK(v.status == Status::Pass);

  const Verdict& tc = verdict_of(rep, "timeliness:C");
  bool by_timing = std::any_of(tc.details.begin(), tc.details.end(),
                               [](const std::string& d) {
                                 return d.find("timing") != std::string::npos;
                               });
  CHECK(by_timing);
}

TEST_CASE("a too-small proof depth is reported as inconclusive, not failure") {
  Document doc = load("netbill.ppl");
  AnalysisReport rep = analyze(doc, 2);
  const Verdict& eoo = verdict_of(rep, "sufficiency:EOO");
  CHECK(eoo.status == Status::Inconclusive);
  CHECK(rep.has_inconclusive());
}

TEST_CASE("missing declarations degrade to inconclusive fairness") {
  Document doc = load("netbill.ppl");
  doc.protocol.timeouts.clear();
  Verdict fair = check_fairness(doc);
  CHECK(fair.status == Status::Inconclusive);

  Document doc2 = load("netbill.ppl");
  doc2.evidence.clear();
  doc2.goals.clear();
  Verdict fair2 = check_fairness(doc2);
  CHECK(fair2.status == Status::Inconclusive);
}

TEST_CASE("validation findings suppress the property checks") {
  Document doc = load("netbill.ppl");
  doc.protocol.steps[0].to = "Z";
  AnalysisReport rep = analyze(doc);
  REQUIRE_FALSE(rep.diagnostics.empty());
  CHECK(rep.verdicts.empty());
}

TEST_CASE("reports render deterministically") {
  Document doc = load("netbill.ppl");
  AnalysisReport rep = analyze(doc);

  std::string j1 = render_json(rep);
  std::string j2 = render_json(analyze(load("netbill.ppl")));
  CHECK(j1 == j2);
  CHECK(j1.find("\"schema\": \"paylogic-report/1\"") != std::string::npos);
  CHECK(j1.find("\"protocol\": \"NetBill\"") != std::string::npos);

  std::string text = render_text(rep);
  CHECK(text.find("[FAIL] fairness") != std::string::npos);
  CHECK(text.find("[PASS] sufficiency:EOO") != std::string::npos);
}

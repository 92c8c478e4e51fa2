#include "paylogic/analysis.hpp"
#include "paylogic/dsl.hpp"
#include "paylogic/oracle.hpp"
#include "paylogic/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

// Compares the engine's fairness witnesses against the brute-force
// enumeration: every brute-force violation must also be flagged.
bool oracle_agrees(const paylogic::Document& doc,
                   const paylogic::AnalysisReport& report, std::ostream& err) {
  using namespace paylogic;
  if (doc.evidence.size() < 2) return true;
  GridSpec grid;
  grid.lo = Rat(0);
  grid.hi = Rat(4);
  grid.step = Rat(1);
  auto violations = bf_fairness(doc.protocol, doc.evidence[0].msg,
                                doc.evidence[0].holder, doc.evidence[1].msg,
                                doc.evidence[1].holder, grid);
  const Verdict* fairness = nullptr;
  for (const auto& v : report.verdicts)
    if (v.property == "fairness") fairness = &v;
  bool ok = true;
  for (const auto& bf : violations) {
    bool found = false;
    if (fairness)
      for (const auto& w : fairness->witnesses)
        if (w.config.truncate_after == bf.config.truncate_after &&
            w.config.timeout_fired == bf.config.timeout_fired)
          found = true;
    if (!found) {
      err << "oracle disagreement: brute force found unfair terminal state "
          << bf.config.to_string() << " not reported by the analyzer\n";
      ok = false;
    }
  }
  if (violations.empty() && fairness && fairness->status == Status::Pass)
    err << "oracle check: brute force agrees (no timing-reachable violations)\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"timed non-repudiation analyzer for payment protocols"};
  app.require_subcommand(1);

  std::string path, checks, format = "text";
  int depth = 12;
  bool oracle = false;
  CLI::App* an = app.add_subcommand("analyze", "analyze a protocol description");
  an->add_option("file", path, "protocol description (.ppl)")->required();
  an->add_option("--check", checks,
                 "comma-separated list of properties (default: all)");
  an->add_option("--format", format, "output format: text or json")
      ->check(CLI::IsMember({"text", "json"}));
  an->add_option("--depth", depth, "proof search depth limit");
  an->add_flag("--oracle", oracle, "cross-check fairness against brute force");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  auto parsed = paylogic::parse_document(buf.str());
  if (!parsed.doc) {
    for (const auto& e : parsed.errors) std::cerr << e.to_string() << "\n";
    return 2;
  }

  paylogic::AnalysisReport report = paylogic::analyze(*parsed.doc, depth);

  if (!checks.empty()) {
    std::vector<std::string> wanted;
    std::stringstream cs(checks);
    std::string item;
    while (std::getline(cs, item, ',')) wanted.push_back(item);
    std::vector<paylogic::Verdict> kept;
    for (auto& v : report.verdicts) {
      std::string base = v.property.substr(0, v.property.find(':'));
      for (const auto& w : wanted)
        if (w == base || w == v.property) {
          kept.push_back(std::move(v));
          break;
        }
    }
    report.verdicts = std::move(kept);
  }

  bool oracle_ok = true;
  if (oracle) oracle_ok = oracle_agrees(*parsed.doc, report, std::cerr);

  std::cout << (format == "json" ? paylogic::render_json(report)
                                 : paylogic::render_text(report));

  if (!report.diagnostics.empty()) return 1;
  if (report.has_fail() || !oracle_ok) return 1;
  if (report.has_inconclusive()) return 3;
  return 0;
}

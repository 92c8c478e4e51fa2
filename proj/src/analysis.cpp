#include "paylogic/analysis.hpp"

#include <algorithm>
#include <sstream>

namespace paylogic {

std::string status_name(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

bool AnalysisReport::has_fail() const {
  for (const auto& v : verdicts)
    if (v.status == Status::Fail) return true;
  return false;
}
bool AnalysisReport::has_inconclusive() const {
  for (const auto& v : verdicts)
    if (v.status == Status::Inconclusive) return true;
  return false;
}

namespace {

// The evidence itself plus every component reachable by splitting pairs.
void flatten_evidence(const Msg& m, MsgSet& out) {
  out.insert(m);
  if (m.kind() == Msg::Kind::Pair) {
    flatten_evidence(m.left(), out);
    flatten_evidence(m.right(), out);
  }
}

const EvidenceDecl* find_evidence(const Document& doc, const std::string& name) {
  for (const auto& e : doc.evidence)
    if (e.name == name) return &e;
  return nullptr;
}

}  // namespace

KnowledgeBase sufficiency_kb(const Document& doc, const EvidenceDecl& ev) {
  KnowledgeBase kb;
  kb.counterparts = doc.counterparts;
  MsgSet parts;
  flatten_evidence(ev.msg, parts);
  for (const auto& part : parts)
    kb.facts.push_back(
        Formula::possesses(ev.holder, part, TimeExpr::var("Te")));
  for (const auto& b : doc.beliefs)
    kb.facts.push_back(Formula::can_prove(b.believer, b.fact));
  for (const auto& a : doc.assumptions) kb = register_assumption(kb, a);
  return kb;
}

Verdict check_sufficiency(const Document& doc, const SufficiencyGoal& goal,
                          int depth_limit) {
  Verdict v;
  v.property = "sufficiency:" + goal.evidence;
  const EvidenceDecl* ev = find_evidence(doc, goal.evidence);
  if (!ev) {
    v.status = Status::Fail;
    v.details.push_back("E_UNKNOWN_EVIDENCE: " + goal.evidence);
    return v;
  }
  KnowledgeBase kb = sufficiency_kb(doc, *ev);
  ConstraintSystem sys;
  bool exhausted = false;
  auto result = prove(kb, goal.goal, sys, depth_limit, &exhausted);
  if (result) {
    v.status = Status::Pass;
    v.derivation = result->derivation;
    std::string fams;
    for (const auto& f : result->derivation.rule_families())
      fams += (fams.empty() ? "" : ",") + f;
    v.details.push_back("rule families: " + fams);
    v.details.push_back(std::string("replayed: ") +
                        (replay(result->derivation, kb) ? "yes" : "NO"));
    return v;
  }
  v.status = exhausted ? Status::Inconclusive : Status::Fail;
  v.details.push_back(exhausted ? "E_DEPTH: search depth exhausted"
                                : "no derivation exists at this depth");
  return v;
}

Verdict check_accountability(const Document& doc) {
  Verdict v;
  v.property = "accountability";
  const ProtocolSpec& spec = doc.protocol;
  RunConfig full{(int)spec.steps.size(), {}, {}};
  RunResult res = run(spec, full);
  for (const auto& ev : doc.evidence) {
    const PossessionTimeline& tl = res.timelines.at(ev.holder);
    std::string earliest;
    for (const auto& [label, set] : tl.entries) {
      if (can_derive(set, ev.msg)) {
        earliest = label;
        break;
      }
    }
    if (earliest.empty()) {
      v.status = Status::Fail;
      v.details.push_back(ev.name + " not derivable by " + ev.holder +
                          " in the complete run");
    } else {
      v.details.push_back(ev.name + " derivable by " + ev.holder + " from " +
                          earliest);
    }
  }
  return v;
}

namespace {

void collect_subterms(const Msg& m, MsgSet& out) {
  out.insert(m);
  switch (m.kind()) {
    case Msg::Kind::Pair:
      collect_subterms(m.left(), out);
      collect_subterms(m.right(), out);
      return;
    case Msg::Kind::Enc:
    case Msg::Kind::Hash:
      collect_subterms(m.body(), out);
      return;
    default:
      return;
  }
}

// Every message fragment that could ever be asked for on a recovery channel:
// the subterms of the protocol steps and of the declared evidence.
MsgSet recovery_pool(const Document& doc) {
  MsgSet pool;
  for (const auto& s : doc.protocol.steps) collect_subterms(s.msg, pool);
  for (const auto& e : doc.evidence) collect_subterms(e.msg, pool);
  if (doc.item) collect_subterms(doc.item->msg, pool);
  return pool;
}

// What a party can get its hands on in a terminal state: everything it can
// derive from its own records plus, unless it aborted and cleared those
// records, every pool fragment a trusted third party can produce for it over
// the recoverable channel.
bool obtainable(const Document& doc, const RunResult& res, const MsgSet& pool,
                const std::string& party, bool aborted, const Msg& target) {
  MsgSet base = res.timelines.at(party).terminal();
  if (!aborted) {
    for (const auto& p : doc.protocol.parties) {
      if (!p.is_ttp) continue;
      const MsgSet& ttp = res.timelines.at(p.name).terminal();
      for (const auto& frag : pool)
        if (can_derive(ttp, frag)) base.insert(frag);
    }
  }
  return can_derive(base, target);
}

// Delay symbols elapsed while `t` was waiting, truncated to executed steps.
TimeExpr waiting_elapsed(const TimeoutDecl& t, int truncate) {
  std::vector<std::string> delays;
  for (int i = t.after_step; i < std::min(t.reply_step, truncate); ++i)
    delays.push_back("t" + std::to_string(i));
  return TimeExpr::plus(TimeExpr::constant(Rat(0)), std::move(delays));
}

std::optional<Model> timing_model(const ConstraintSystem& sys) {
  for (const auto& branch : eliminate_max(sys))
    if (auto m = is_satisfiable(branch)) return m;
  return std::nullopt;
}

}  // namespace

Verdict check_fairness(const Document& doc) {
  Verdict v;
  v.property = "fairness";
  const ProtocolSpec& spec = doc.protocol;
  if (spec.timeouts.empty()) {
    v.status = Status::Inconclusive;
    v.details.push_back("E_NO_TIMEOUTS: no timeout declarations to analyze");
    return v;
  }
  if (doc.evidence.size() < 2) {
    v.status = Status::Inconclusive;
    v.details.push_back("E_NO_EVIDENCE: fairness needs two evidence terms");
    return v;
  }
  const EvidenceDecl& eoo = doc.evidence[0];
  const EvidenceDecl& eor = doc.evidence[1];
  const MsgSet pool = recovery_pool(doc);

  for (const auto& cfg : terminal_states(spec)) {
    RunResult res = run(spec, cfg);
    ConstraintSystem sys = res.constraints;
    for (const auto& t : spec.timeouts) {
      if (t.after_step > cfg.truncate_after) continue;
      TimeExpr elapsed = waiting_elapsed(t, cfg.truncate_after);
      TimeExpr budget =
          TimeExpr::plus(TimeExpr::constant(Rat(0)), {t.waiting.name});
      if (cfg.timeout_fired.count(t.party))
        sys = sys.with(make_lt(budget, elapsed));  // patience ran out
      else if (t.reply_step > cfg.truncate_after)
        sys = sys.with(make_le(elapsed, budget));  // still within patience
    }
    auto model = timing_model(sys);
    if (!model) continue;  // timing-unreachable terminal state

    auto check_pair = [&](const std::string& a_name, const std::string& a_holder,
                          const Msg& a_msg, const std::string& b_name,
                          const std::string& b_holder, const Msg& b_msg) {
      bool a = obtainable(doc, res, pool, a_holder,
                          cfg.timeout_fired.count(a_holder) > 0, a_msg);
      bool b = obtainable(doc, res, pool, b_holder,
                          cfg.timeout_fired.count(b_holder) > 0, b_msg);
      if (a == b) return;
      v.status = Status::Fail;
      Witness w;
      w.config = cfg;
      w.model = *model;
      w.note = (a ? a_holder + " obtains " + a_name + " but " + b_holder +
                        " cannot obtain " + b_name
                  : b_holder + " obtains " + b_name + " but " + a_holder +
                        " cannot obtain " + a_name);
      v.witnesses.push_back(std::move(w));
    };
    check_pair(eoo.name, eoo.holder, eoo.msg, eor.name, eor.holder, eor.msg);
    if (doc.item)
      check_pair(doc.item->name, doc.item->holder, doc.item->msg, eor.name,
                 eor.holder, eor.msg);
  }
  if (v.status == Status::Pass)
    v.details.push_back("evidence exchange balanced in every reachable terminal state");
  return v;
}

std::vector<Verdict> check_timeliness(const Document& doc) {
  std::vector<Verdict> out;
  const ProtocolSpec& spec = doc.protocol;
  RunConfig full{(int)spec.steps.size(), {}, {}};
  RunResult res = run(spec, full);
  for (const auto& t : spec.timeouts) {
    Verdict v;
    v.property = "timeliness:" + t.party;
    const Step* after = nullptr;
    const Step* reply = nullptr;
    for (const auto& s : spec.steps) {
      if (s.index == t.after_step) after = &s;
      if (s.index == t.reply_step) reply = &s;
    }
    if (!after || !reply) {
      v.status = Status::Fail;
      v.details.push_back("E_BAD_TIMEOUT: missing step");
      out.push_back(std::move(v));
      continue;
    }
    // The waiting condition: the reply arrives within the waiting budget.
    Constraint within = make_le(
        TimeExpr::var(reply->at),
        TimeExpr::plus(TimeExpr::var(after->at), {t.waiting.name}));
    if (entails(res.constraints, within)) {
      v.status = Status::Pass;
      v.details.push_back("guaranteed by timing: " + within.to_string());
      out.push_back(std::move(v));
      continue;
    }
    // Recoverability: if every step the party is waiting through comes from
    // a trusted third party (or itself), the reply can always be recovered.
    bool recoverable = true;
    for (const auto& s : spec.steps) {
      if (s.index <= t.after_step || s.index > t.reply_step) continue;
      const PartyId* sender = spec.find_party(s.from);
      if (!(sender && (sender->is_ttp || s.from == t.party))) recoverable = false;
    }
    if (recoverable) {
      v.status = Status::Pass;
      v.details.push_back("guaranteed by recoverability: steps " +
                          std::to_string(t.after_step + 1) + ".." +
                          std::to_string(t.reply_step) +
                          " originate from a trusted party");
      out.push_back(std::move(v));
      continue;
    }
    v.status = Status::Fail;
    Constraint beyond = make_lt(
        TimeExpr::plus(TimeExpr::var(after->at), {t.waiting.name}),
        TimeExpr::var(reply->at));
    if (entails(res.constraints, beyond)) {
      v.details.push_back("always violated: " + beyond.to_string());
    } else {
      v.details.push_back("contingent: " + within.to_string() +
                          " holds only under additional delay assumptions");
      if (auto model = timing_model(res.constraints.with(beyond))) {
        Witness w;
        w.config = full;
        w.model = *model;
        w.note = "delays violating " + within.to_string();
        v.witnesses.push_back(std::move(w));
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

AnalysisReport analyze(const Document& doc, int depth_limit) {
  AnalysisReport report;
  report.protocol = doc.protocol.name;
  try {
    report.diagnostics = validate(doc.protocol);
    if (!report.diagnostics.empty()) return report;
    for (const auto& g : doc.goals)
      report.verdicts.push_back(check_sufficiency(doc, g, depth_limit));
    if (!doc.evidence.empty())
      report.verdicts.push_back(check_accountability(doc));
    report.verdicts.push_back(check_fairness(doc));
    for (auto& v : check_timeliness(doc)) report.verdicts.push_back(std::move(v));
  } catch (const std::exception& e) {
    report.diagnostics.push_back(Diagnostic{"E_INTERNAL", 0, e.what()});
  }
  return report;
}

}  // namespace paylogic

#include "paylogic/protocol.hpp"

#include <algorithm>
#include <stdexcept>

namespace paylogic {

const PartyId* ProtocolSpec::find_party(const std::string& n) const {
  for (const auto& p : parties)
    if (p.name == n) return &p;
  return nullptr;
}

ChannelKind ProtocolSpec::channel(const std::string& a, const std::string& b) const {
  const PartyId* pa = find_party(a);
  const PartyId* pb = find_party(b);
  if ((pa && pa->is_ttp) || (pb && pb->is_ttp)) return ChannelKind::Recoverable;
  return ChannelKind::Unreliable;
}

const TimeoutDecl* ProtocolSpec::timeout_for(const std::string& party) const {
  for (const auto& t : timeouts)
    if (t.party == party) return &t;
  return nullptr;
}

std::string RunConfig::to_string() const {
  std::string s = "truncate_after=" + std::to_string(truncate_after) + ", timeout_fired={";
  bool first = true;
  for (const auto& p : timeout_fired) {
    if (!first) s += ",";
    s += p;
    first = false;
  }
  s += "}";
  return s;
}

const MsgSet& PossessionTimeline::at(const std::string& label) const {
  for (const auto& [l, s] : entries)
    if (l == label) return s;
  throw std::out_of_range("E_UNKNOWN_TIME: " + label);
}

bool PossessionTimeline::has(const std::string& label) const {
  for (const auto& [l, s] : entries)
    if (l == label) return true;
  return false;
}

const MsgSet& PossessionTimeline::terminal() const {
  return entries.back().second;
}

std::string Diagnostic::to_string() const {
  std::string s = code;
  if (step > 0) s += " at step " + std::to_string(step);
  if (!message.empty()) s += ": " + message;
  return s;
}

namespace {

void collect_keys(const Msg& m, std::vector<KeyTerm>& out) {
  switch (m.kind()) {
    case Msg::Kind::Atom: return;
    case Msg::Kind::Key: out.push_back(m.key_term()); return;
    case Msg::Kind::Hash: collect_keys(m.body(), out); return;
    case Msg::Kind::Enc:
      out.push_back(m.key_term());
      collect_keys(m.body(), out);
      return;
    case Msg::Kind::Pair:
      collect_keys(m.left(), out);
      collect_keys(m.right(), out);
      return;
  }
}

bool key_declared(const ProtocolSpec& spec, const KeyTerm& k) {
  // Asymmetric keys are implied by the owning party's declaration.
  if (k.kind == KeyTerm::Kind::Public || k.kind == KeyTerm::Kind::Private)
    return spec.find_party(k.owner) != nullptr;
  return std::find(spec.keys.begin(), spec.keys.end(), k) != spec.keys.end();
}

}  // namespace

std::vector<Diagnostic> validate(const ProtocolSpec& spec) {
  std::vector<Diagnostic> diags;

  for (const auto& [party, _] : spec.initial_knowledge)
    if (!spec.find_party(party))
      diags.push_back({"E_UNKNOWN_PARTY", 0, "initial knowledge of undeclared " + party});

  std::set<std::string> time_vars;
  int expected = 1;
  for (const auto& st : spec.steps) {
    if (st.index != expected)
      diags.push_back({"E_BAD_INDEX", st.index, "steps must be numbered consecutively"});
    expected = st.index + 1;
    if (!spec.find_party(st.from))
      diags.push_back({"E_UNKNOWN_PARTY", st.index, st.from});
    if (!spec.find_party(st.to))
      diags.push_back({"E_UNKNOWN_PARTY", st.index, st.to});
    if (st.from == st.to)
      diags.push_back({"E_SELF_SEND", st.index, st.from});
    if (!time_vars.insert(st.at).second)
      diags.push_back({"E_TIME_REUSE", st.index, st.at});
    std::vector<KeyTerm> keys;
    collect_keys(st.msg, keys);
    for (const auto& k : keys)
      if (!key_declared(spec, k))
        diags.push_back({"E_UNKNOWN_KEY", st.index, k.to_string()});
  }

  for (const auto& t : spec.timeouts) {
    if (!spec.find_party(t.party))
      diags.push_back({"E_UNKNOWN_PARTY", 0, "timeout of undeclared " + t.party});
    if (t.after_step < 1 || t.after_step > (int)spec.steps.size() ||
        t.reply_step < t.after_step || t.reply_step > (int)spec.steps.size())
      diags.push_back({"E_BAD_TIMEOUT", t.after_step, t.party});
  }

  if (!diags.empty()) return diags;

  // Derivability and freshness along the untruncated run.
  std::map<std::string, MsgSet> held;
  for (const auto& p : spec.parties) {
    auto it = spec.initial_knowledge.find(p.name);
    held[p.name] = it == spec.initial_knowledge.end() ? MsgSet{} : it->second;
  }
  for (const auto& st : spec.steps) {
    MsgSet fresh;
    if (auto it = spec.fresh_decls.find(st.index); it != spec.fresh_decls.end())
      fresh = it->second;
    for (const auto& f : fresh)
      for (const auto& [party, s] : held)
        if (s.count(f))
          diags.push_back({"E_NOT_FRESH", st.index,
                           f.to_string() + " already held by " + party});
    MsgSet sender = held[st.from];
    sender.insert(fresh.begin(), fresh.end());
    if (!can_derive(sender, st.msg))
      diags.push_back({"E_UNDERIVABLE", st.index,
                       st.from + " cannot construct " + st.msg.to_string()});
    held[st.from].insert(fresh.begin(), fresh.end());
    held[st.from].insert(st.msg);
    held[st.to].insert(st.msg);
  }
  return diags;
}

RunResult run(const ProtocolSpec& spec, const RunConfig& config) {
  const int n = (int)spec.steps.size();
  if (config.truncate_after < 0 || config.truncate_after > n)
    throw std::invalid_argument("E_BAD_CONFIG: truncation out of range");
  for (const auto& p : config.timeout_fired) {
    const TimeoutDecl* t = spec.timeout_for(p);
    if (!t || t->after_step > config.truncate_after)
      throw std::invalid_argument("E_BAD_CONFIG: " + p + " cannot time out here");
  }

  RunResult res;
  for (const auto& p : spec.parties) {
    auto it = spec.initial_knowledge.find(p.name);
    PossessionTimeline tl;
    tl.entries.emplace_back(
        "T0", it == spec.initial_knowledge.end() ? MsgSet{} : it->second);
    res.timelines.emplace(p.name, std::move(tl));
  }

  for (int i = 1; i <= config.truncate_after; ++i) {
    const Step& st = spec.steps[i - 1];
    TraceEntry entry{st, false, false};
    MsgSet fresh;
    if (auto it = spec.fresh_decls.find(st.index); it != spec.fresh_decls.end())
      fresh = it->second;
    for (auto& [party, tl] : res.timelines) {
      MsgSet next = tl.entries.back().second;
      if (party == st.from) {
        // Rule 1: the sender gains its freshly generated material and the
        // sent message when new.
        size_t before = next.size();
        next.insert(fresh.begin(), fresh.end());
        next.insert(st.msg);
        entry.sender_fresh = next.size() > before;
      } else if (party == st.to) {
        // Rule 2: the receiver gains the message unless already held.
        entry.receiver_new = next.insert(st.msg).second;
      }
      tl.entries.emplace_back(st.at, std::move(next));
    }
    res.trace.entries.push_back(std::move(entry));
  }

  for (auto& [party, tl] : res.timelines) {
    if (config.timeout_fired.count(party)) {
      // Timeout clearing drops everything received or generated during the
      // run; initial knowledge (long-term keys included) is kept.
      tl.entries.emplace_back("Te", tl.entries.front().second);
    } else {
      tl.entries.emplace_back("Te", tl.entries.back().second);
    }
  }

  // Ordering constraints over executed step times, plus delay equations for
  // the intervals that declared timeouts reference.
  ConstraintSystem& sys = res.constraints;
  for (int i = 1; i < config.truncate_after; ++i)
    sys.atoms.push_back(make_le(TimeExpr::var(spec.steps[i - 1].at),
                                TimeExpr::var(spec.steps[i].at)));
  for (const auto& t : spec.timeouts) {
    sys.delay_syms.insert(t.waiting);
    for (int i = t.after_step; i < t.reply_step && i < config.truncate_after; ++i) {
      DelaySym d{"t" + std::to_string(i), DelaySym::Role::StepDelay};
      if (sys.delay_syms.insert(d).second) {
        sys.atoms.push_back(make_eq(
            TimeExpr::var(spec.steps[i].at),
            TimeExpr::plus(TimeExpr::var(spec.steps[i - 1].at), {d.name})));
      }
    }
  }
  for (const auto& c : spec.declared_constraints) {
    sys.atoms.push_back(c);
    for (const TimeExpr* side : {&c.lhs, &c.rhs}) {
      if (side->kind() == TimeExpr::Kind::Plus)
        for (const auto& d : side->delays())
          sys.delay_syms.insert(DelaySym{d, DelaySym::Role::StepDelay});
    }
  }
  for (const auto& [name, v] : config.delay_pins) sys.fixed[name] = v;
  return res;
}

const MsgSet& possession_at(const RunResult& r, const std::string& party,
                            const std::string& time_label) {
  auto it = r.timelines.find(party);
  if (it == r.timelines.end())
    throw std::out_of_range("E_UNKNOWN_TIME: no timeline for " + party);
  return it->second.at(time_label);
}

std::vector<RunConfig> terminal_states(const ProtocolSpec& spec) {
  std::vector<RunConfig> out;
  const int n = (int)spec.steps.size();
  for (int k = 0; k <= n; ++k) {
    // A party may fire iff its waiting window has opened and the awaited
    // reply was not delivered to it within the executed prefix.
    std::vector<std::string> eligible;
    for (const auto& t : spec.timeouts) {
      if (t.after_step > k) continue;
      bool reply_delivered =
          t.reply_step <= k && spec.steps[t.reply_step - 1].to == t.party;
      if (!reply_delivered) eligible.push_back(t.party);
    }
    for (size_t mask = 0; mask < (size_t{1} << eligible.size()); ++mask) {
      RunConfig cfg;
      cfg.truncate_after = k;
      for (size_t b = 0; b < eligible.size(); ++b)
        if (mask & (size_t{1} << b)) cfg.timeout_fired.insert(eligible[b]);
      out.push_back(std::move(cfg));
    }
  }
  return out;
}

}  // namespace paylogic

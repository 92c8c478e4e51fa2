// Deterministic random generators shared by the unit and acceptance tests:
// small protocol specifications and small linear constraint systems.

#ifndef PAYLOGIC_TESTS_GENERATORS_HPP
#define PAYLOGIC_TESTS_GENERATORS_HPP

#include "paylogic/message.hpp"
#include "paylogic/protocol.hpp"
#include "paylogic/time_algebra.hpp"

#include <random>
#include <string>
#include <vector>

namespace paylogic::testgen {

// A random protocol with <= 4 parties and <= 6 steps that passes validation
// by construction: each step sends a term the sender can derive from its
// holdings plus that step's fresh atom.
inline ProtocolSpec random_protocol(std::mt19937& rng) {
  ProtocolSpec spec;
  spec.name = "Gen";

  int nparties = 2 + static_cast<int>(rng() % 3);
  for (int i = 0; i < nparties; ++i)
    spec.parties.push_back({"P" + std::to_string(i), i == nparties - 1 && (rng() % 2)});

  KeyTerm ks = KeyTerm::session_key("ks");
  KeyTerm kab = KeyTerm::shared_key("kab", "P0", "P1");
  spec.keys = {ks, kab};

  for (const auto& p : spec.parties) {
    MsgSet init{Msg::atom("seed_" + p.name)};
    if (rng() % 2) init.insert(Msg::key(ks));
    if (p.name == "P0" || p.name == "P1") init.insert(Msg::key(kab));
    spec.initial_knowledge[p.name] = init;
  }

  int nsteps = 1 + static_cast<int>(rng() % 6);
  for (int i = 1; i <= nsteps; ++i) {
    Step st;
    st.index = i;
    st.at = "T" + std::to_string(i);
    st.from = spec.parties[rng() % spec.parties.size()].name;
    do {
      st.to = spec.parties[rng() % spec.parties.size()].name;
    } while (st.to == st.from);

    Msg fresh = Msg::atom("f" + std::to_string(i));
    spec.fresh_decls[i] = {fresh};
    Msg known = Msg::atom("seed_" + st.from);
    switch (rng() % 4) {
      case 0:
        st.msg = fresh;
        break;
      case 1:
        st.msg = Msg::pair(fresh, known);
        break;
      case 2:
        st.msg = Msg::hash(Msg::pair(known, fresh));
        break;
      default:
        // Encrypt only under a key the sender actually holds.
        if (spec.initial_knowledge[st.from].count(Msg::key(ks)))
          st.msg = Msg::enc(fresh, ks);
        else if (spec.initial_knowledge[st.from].count(Msg::key(kab)))
          st.msg = Msg::enc(fresh, kab);
        else
          st.msg = fresh;
        break;
    }
    spec.steps.push_back(st);
  }

  // Up to two timeouts on distinct parties, with legal step windows.
  int ntimeouts = static_cast<int>(rng() % 3);
  std::set<std::string> used;
  for (int j = 0; j < ntimeouts; ++j) {
    TimeoutDecl t;
    t.party = spec.parties[rng() % spec.parties.size()].name;
    if (!used.insert(t.party).second) continue;
    t.after_step = 1 + static_cast<int>(rng() % nsteps);
    t.reply_step = t.after_step + static_cast<int>(rng() % (nsteps - t.after_step + 1));
    t.waiting = {"w" + t.party, DelaySym::Role::WaitingTime};
    spec.timeouts.push_back(t);
  }
  return spec;
}

// A random constraint system with <= 5 variables, integer bounds <= 4.
inline ConstraintSystem random_system(std::mt19937& rng) {
  ConstraintSystem sys;
  int nvars = 1 + static_cast<int>(rng() % 5);
  std::vector<std::string> vars;
  for (int i = 0; i < nvars; ++i) vars.push_back("v" + std::to_string(i));
  if (rng() % 3 == 0) {
    sys.delay_syms.insert({vars.back(), DelaySym::Role::StepDelay});
    if (rng() % 4 == 0) sys.fixed[vars.back()] = Rat(static_cast<int>(rng() % 5));
  }

  auto operand = [&]() -> TimeExpr {
    switch (rng() % 3) {
      case 0:
        return TimeExpr::constant(Rat(static_cast<int>(rng() % 5)));
      case 1:
        return TimeExpr::var(vars[rng() % vars.size()]);
      default:
        return TimeExpr::plus(TimeExpr::var(vars[rng() % vars.size()]), {},
                              Rat(static_cast<int>(rng() % 5)) - Rat(2));
    }
  };

  int natoms = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < natoms; ++i) {
    TimeExpr lhs = operand(), rhs = operand();
    switch (rng() % 3) {
      case 0:
        sys.atoms.push_back(make_le(lhs, rhs));
        break;
      case 1:
        sys.atoms.push_back(make_lt(lhs, rhs));
        break;
      default:
        sys.atoms.push_back(make_eq(lhs, rhs));
        break;
    }
  }
  return sys;
}

}  // namespace paylogic::testgen

#endif

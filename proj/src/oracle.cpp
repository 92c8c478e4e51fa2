#include "paylogic/oracle.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace paylogic {

// ---------------------------------------------------------------------------
// Closure and derivability, by naive repeated passes
// ---------------------------------------------------------------------------

MsgSet bf_closure(const MsgSet& s, int depth_bound) {
  MsgSet out = s;
  for (int round = 0; round < depth_bound; ++round) {
    MsgSet add;
    for (const Msg& m : out) {
      if (m.kind() == Msg::Kind::Pair) {
        if (!out.count(m.left())) add.insert(m.left());
        if (!out.count(m.right())) add.insert(m.right());
      } else if (m.kind() == Msg::Kind::Enc) {
        Msg dual = Msg::key(dual_key(m.key_term()));
        if (out.count(dual) && !out.count(m.body())) add.insert(m.body());
      }
    }
    if (add.empty()) break;
    out.insert(add.begin(), add.end());
  }
  return out;
}

bool bf_derivable(const MsgSet& s, const Msg& target, int depth_bound) {
  MsgSet closed = bf_closure(s, depth_bound);
  std::function<bool(const Msg&, int)> build = [&](const Msg& t, int fuel) {
    if (closed.count(t)) return true;
    if (fuel <= 0) return false;
    switch (t.kind()) {
      case Msg::Kind::Pair:
        return build(t.left(), fuel - 1) && build(t.right(), fuel - 1);
      case Msg::Kind::Hash:
        return build(t.body(), fuel - 1);
      case Msg::Kind::Enc:
        return closed.count(Msg::key(t.key_term())) && build(t.body(), fuel - 1);
      default:
        return false;  // atoms and keys only by possession
    }
  };
  return build(target, depth_bound);
}

// ---------------------------------------------------------------------------
// Grid satisfiability
// ---------------------------------------------------------------------------

std::vector<Rat> GridSpec::values() const {
  std::vector<Rat> out;
  for (Rat v = lo; v <= hi; v += step) out.push_back(v);
  return out;
}

namespace {

Rat eval_expr(const TimeExpr& e, const Model& m) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
      return e.value();
    case TimeExpr::Kind::Var: {
      auto it = m.find(e.var_name());
      return it == m.end() ? Rat(0) : it->second;
    }
    case TimeExpr::Kind::Plus: {
      Rat sum = eval_expr(e.base(), m) + e.offset();
      for (const auto& d : e.delays()) {
        auto it = m.find(d);
        if (it != m.end()) sum += it->second;
      }
      return sum;
    }
    case TimeExpr::Kind::Max:
      return std::max(eval_expr(e.max_left(), m), eval_expr(e.max_right(), m));
  }
  return Rat(0);
}

void vars_of(const TimeExpr& e, std::set<std::string>& out) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
      return;
    case TimeExpr::Kind::Var:
      out.insert(e.var_name());
      return;
    case TimeExpr::Kind::Plus:
      vars_of(e.base(), out);
      for (const auto& d : e.delays()) out.insert(d);
      return;
    case TimeExpr::Kind::Max:
      vars_of(e.max_left(), out);
      vars_of(e.max_right(), out);
      return;
  }
}

bool holds(const Constraint& c, const Model& m) {
  Rat l = eval_expr(c.lhs, m), r = eval_expr(c.rhs, m);
  switch (c.rel) {
    case Constraint::Rel::Le: return l <= r;
    case Constraint::Rel::Lt: return l < r;
    case Constraint::Rel::Eq: return l == r;
  }
  return false;
}

}  // namespace

std::optional<Model> bf_sat(const ConstraintSystem& sys, const GridSpec& grid) {
  std::set<std::string> names;
  for (const auto& c : sys.atoms) {
    vars_of(c.lhs, names);
    vars_of(c.rhs, names);
  }
  for (const auto& d : sys.delay_syms) names.insert(d.name);

  std::vector<std::string> free_vars;
  Model base;
  for (const auto& n : names) {
    auto it = sys.fixed.find(n);
    if (it != sys.fixed.end())
      base[n] = it->second;
    else
      free_vars.push_back(n);
  }

  std::set<std::string> delay_names;
  for (const auto& d : sys.delay_syms) delay_names.insert(d.name);
  auto ok = [&](const Model& m) {
    for (const auto& d : delay_names) {
      auto it = m.find(d);
      if (it != m.end() && it->second < Rat(0)) return false;
    }
    for (const auto& c : sys.atoms)
      if (!holds(c, m)) return false;
    return true;
  };

  std::vector<Rat> vals = grid.values();
  std::optional<Model> found;
  std::function<void(size_t, Model&)> rec = [&](size_t i, Model& m) {
    if (found) return;
    if (i == free_vars.size()) {
      if (ok(m)) found = m;
      return;
    }
    for (const Rat& v : vals) {
      m[free_vars[i]] = v;
      rec(i + 1, m);
      if (found) return;
    }
    m.erase(free_vars[i]);
  };
  Model m = base;
  rec(0, m);
  return found;
}

// ---------------------------------------------------------------------------
// Fairness by exhaustive enumeration
// ---------------------------------------------------------------------------

namespace {

// Fresh possession-set simulation, independent of the run semantics code.
std::map<std::string, MsgSet> bf_possessions(const ProtocolSpec& spec,
                                             const RunConfig& cfg) {
  std::map<std::string, MsgSet> sets;
  for (const auto& p : spec.parties) {
    auto it = spec.initial_knowledge.find(p.name);
    sets[p.name] = it == spec.initial_knowledge.end() ? MsgSet{} : it->second;
  }
  for (const auto& step : spec.steps) {
    if (step.index > cfg.truncate_after) break;
    auto fresh = spec.fresh_decls.find(step.index);
    if (fresh != spec.fresh_decls.end())
      sets[step.from].insert(fresh->second.begin(), fresh->second.end());
    sets[step.from].insert(step.msg);
    sets[step.to].insert(step.msg);
  }
  for (const auto& p : cfg.timeout_fired) {
    auto it = spec.initial_knowledge.find(p);
    sets[p] = it == spec.initial_knowledge.end() ? MsgSet{} : it->second;
  }
  return sets;
}

bool bf_config_legal(const ProtocolSpec& spec, int truncate,
                     const std::vector<std::string>& fired) {
  for (const auto& party : fired) {
    const TimeoutDecl* decl = nullptr;
    for (const auto& t : spec.timeouts)
      if (t.party == party) decl = &t;
    if (!decl) return false;
    if (decl->after_step > truncate) return false;
    if (decl->reply_step <= truncate) {
      // The reply arrived; the waiter cannot have timed out on it.
      for (const auto& step : spec.steps)
        if (step.index == decl->reply_step && step.to == party) return false;
    }
  }
  return true;
}

}  // namespace

int bf_terminal_count(const ProtocolSpec& spec) {
  std::vector<std::string> waiters;
  for (const auto& t : spec.timeouts) waiters.push_back(t.party);
  int count = 0;
  for (int truncate = 0; truncate <= (int)spec.steps.size(); ++truncate) {
    for (size_t mask = 0; mask < (size_t(1) << waiters.size()); ++mask) {
      std::vector<std::string> fired;
      for (size_t i = 0; i < waiters.size(); ++i)
        if (mask & (size_t(1) << i)) fired.push_back(waiters[i]);
      if (bf_config_legal(spec, truncate, fired)) ++count;
    }
  }
  return count;
}

std::vector<BfViolation> bf_fairness(const ProtocolSpec& spec, const Msg& eoo,
                                     const std::string& eoo_holder, const Msg& eor,
                                     const std::string& eor_holder,
                                     const GridSpec& grid) {
  std::vector<BfViolation> out;
  std::vector<std::string> waiters;
  for (const auto& t : spec.timeouts) waiters.push_back(t.party);

  for (int truncate = 0; truncate <= (int)spec.steps.size(); ++truncate) {
    for (size_t mask = 1; mask < (size_t(1) << waiters.size()); ++mask) {
      std::vector<std::string> fired;
      for (size_t i = 0; i < waiters.size(); ++i)
        if (mask & (size_t(1) << i)) fired.push_back(waiters[i]);
      if (!bf_config_legal(spec, truncate, fired)) continue;

      // A fired timeout needs a delay assignment making the wait interval
      // overrun the waiting budget; search the grid point by point.
      std::vector<std::string> delay_vars;
      for (const auto& party : fired) {
        for (const auto& t : spec.timeouts) {
          if (t.party != party) continue;
          delay_vars.push_back(t.waiting.name);
          for (int i = t.after_step; i < std::min(t.reply_step, truncate); ++i)
            delay_vars.push_back("t" + std::to_string(i));
        }
      }
      std::sort(delay_vars.begin(), delay_vars.end());
      delay_vars.erase(std::unique(delay_vars.begin(), delay_vars.end()),
                       delay_vars.end());

      auto consistent = [&](const std::map<std::string, Rat>& d) {
        for (const auto& party : fired) {
          for (const auto& t : spec.timeouts) {
            if (t.party != party) continue;
            Rat elapsed(0);
            for (int i = t.after_step; i < std::min(t.reply_step, truncate); ++i) {
              auto it = d.find("t" + std::to_string(i));
              if (it != d.end()) elapsed += it->second;
            }
            auto w = d.find(t.waiting.name);
            Rat budget = w == d.end() ? Rat(0) : w->second;
            if (!(elapsed > budget)) return false;
          }
        }
        // Declared timing constraints must also hold at the grid point.
        for (const auto& c : spec.declared_constraints) {
          Model m(d.begin(), d.end());
          if (!holds(c, m)) return false;
        }
        return true;
      };

      std::vector<Rat> vals = grid.values();
      std::optional<std::map<std::string, Rat>> witness;
      std::function<void(size_t, std::map<std::string, Rat>&)> rec =
          [&](size_t i, std::map<std::string, Rat>& d) {
            if (witness) return;
            if (i == delay_vars.size()) {
              if (consistent(d)) witness = d;
              return;
            }
            for (const Rat& v : vals) {
              d[delay_vars[i]] = v;
              rec(i + 1, d);
              if (witness) return;
            }
            d.erase(delay_vars[i]);
          };
      std::map<std::string, Rat> d;
      rec(0, d);
      if (!witness) continue;

      auto sets = bf_possessions(
          spec, RunConfig{truncate, {fired.begin(), fired.end()}, {}});
      bool has_eoo = bf_derivable(sets[eoo_holder], eoo);
      bool has_eor = bf_derivable(sets[eor_holder], eor);
      if (has_eoo == has_eor) continue;

      BfViolation v;
      v.config.truncate_after = truncate;
      v.config.timeout_fired = {fired.begin(), fired.end()};
      v.delays = *witness;
      v.eoo_derivable = has_eoo;
      v.eor_derivable = has_eor;
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace paylogic

#include "paylogic/time_algebra.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <tuple>

namespace paylogic {

std::string rat_to_string(const Rat& r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << "/" << r.denominator();
  return os.str();
}

struct TimeExpr::Node {
  Kind kind;
  Rat value;                        // Const, Plus offset
  std::string name;                 // Var
  std::shared_ptr<const Node> a, b; // Plus base / Max children
  std::vector<std::string> delays;  // Plus
};

TimeExpr TimeExpr::constant(Rat v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Const;
  n->value = v;
  return TimeExpr(std::move(n));
}
TimeExpr TimeExpr::var(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->name = std::move(name);
  return TimeExpr(std::move(n));
}
TimeExpr TimeExpr::plus(TimeExpr base, std::vector<std::string> delays, Rat offset) {
  if (delays.empty() && offset == Rat(0)) return base;
  auto n = std::make_shared<Node>();
  n->kind = Kind::Plus;
  n->a = std::move(base.node_);
  n->delays = std::move(delays);
  n->value = offset;
  return TimeExpr(std::move(n));
}
TimeExpr TimeExpr::max_of(TimeExpr a, TimeExpr b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Max;
  n->a = std::move(a.node_);
  n->b = std::move(b.node_);
  return TimeExpr(std::move(n));
}

TimeExpr::Kind TimeExpr::kind() const { return node_->kind; }
const Rat& TimeExpr::value() const { return node_->value; }
const std::string& TimeExpr::var_name() const { return node_->name; }
TimeExpr TimeExpr::base() const { return TimeExpr(node_->a); }
const std::vector<std::string>& TimeExpr::delays() const { return node_->delays; }
const Rat& TimeExpr::offset() const { return node_->value; }
TimeExpr TimeExpr::max_left() const { return TimeExpr(node_->a); }
TimeExpr TimeExpr::max_right() const { return TimeExpr(node_->b); }

bool TimeExpr::contains_max() const {
  switch (node_->kind) {
    case Kind::Const:
    case Kind::Var: return false;
    case Kind::Plus: return base().contains_max();
    case Kind::Max: return true;
  }
  return false;
}

std::string TimeExpr::to_string() const {
  switch (node_->kind) {
    case Kind::Const: return rat_to_string(node_->value);
    case Kind::Var: return node_->name;
    case Kind::Plus: {
      std::string s = base().to_string();
      for (const auto& d : node_->delays) s += " + " + d;
      if (node_->value != Rat(0)) s += " + " + rat_to_string(node_->value);
      return s;
    }
    case Kind::Max:
      return "max(" + max_left().to_string() + ", " + max_right().to_string() + ")";
  }
  return "?";
}

namespace {

int compare_time(const TimeExpr& a, const TimeExpr& b) {
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case TimeExpr::Kind::Const:
      if (a.value() < b.value()) return -1;
      if (b.value() < a.value()) return 1;
      return 0;
    case TimeExpr::Kind::Var:
      return a.var_name().compare(b.var_name());
    case TimeExpr::Kind::Plus: {
      if (int c = compare_time(a.base(), b.base())) return c;
      if (a.delays() != b.delays()) return a.delays() < b.delays() ? -1 : 1;
      if (a.offset() < b.offset()) return -1;
      if (b.offset() < a.offset()) return 1;
      return 0;
    }
    case TimeExpr::Kind::Max: {
      if (int c = compare_time(a.max_left(), b.max_left())) return c;
      return compare_time(a.max_right(), b.max_right());
    }
  }
  return 0;
}

}  // namespace

bool operator==(const TimeExpr& a, const TimeExpr& b) {
  return compare_time(a, b) == 0;
}
bool operator<(const TimeExpr& a, const TimeExpr& b) {
  return compare_time(a, b) < 0;
}

std::string ScopedTime::to_string() const {
  switch (scope) {
    case Scope::Full: return "[" + var + "]";
    case Scope::Upper:
      return "[" + var + " | " + var + " <= " + bound->to_string() + "]";
    case Scope::Singleton:
      return "[" + bound->to_string() + "]";
  }
  return "?";
}

std::string Constraint::to_string() const {
  const char* op = rel == Rel::Le ? " <= " : rel == Rel::Lt ? " < " : " = ";
  return lhs.to_string() + op + rhs.to_string();
}

bool operator==(const Constraint& a, const Constraint& b) {
  return a.rel == b.rel && a.lhs == b.lhs && a.rhs == b.rhs;
}

Constraint make_le(TimeExpr a, TimeExpr b) {
  return Constraint{Constraint::Rel::Le, std::move(a), std::move(b)};
}
Constraint make_lt(TimeExpr a, TimeExpr b) {
  return Constraint{Constraint::Rel::Lt, std::move(a), std::move(b)};
}
Constraint make_eq(TimeExpr a, TimeExpr b) {
  return Constraint{Constraint::Rel::Eq, std::move(a), std::move(b)};
}

ConstraintSystem ConstraintSystem::with(Constraint c) const {
  ConstraintSystem out = *this;
  out.atoms.push_back(std::move(c));
  return out;
}

bool ConstraintSystem::contains_max() const {
  for (const auto& a : atoms)
    if (a.lhs.contains_max() || a.rhs.contains_max()) return true;
  return false;
}

std::string ConstraintSystem::to_string() const {
  std::string s;
  for (const auto& a : atoms) {
    if (!s.empty()) s += "; ";
    s += a.to_string();
  }
  for (const auto& [name, v] : fixed) {
    if (!s.empty()) s += "; ";
    s += name + " = " + rat_to_string(v);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation and max elimination
// ---------------------------------------------------------------------------

namespace {

Rat eval_expr(const TimeExpr& e, const Model& m) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const: return e.value();
    case TimeExpr::Kind::Var: {
      auto it = m.find(e.var_name());
      return it == m.end() ? Rat(0) : it->second;
    }
    case TimeExpr::Kind::Plus: {
      Rat v = eval_expr(e.base(), m) + e.offset();
      for (const auto& d : e.delays()) {
        auto it = m.find(d);
        v += it == m.end() ? Rat(0) : it->second;
      }
      return v;
    }
    case TimeExpr::Kind::Max:
      return std::max(eval_expr(e.max_left(), m), eval_expr(e.max_right(), m));
  }
  return Rat(0);
}

std::optional<TimeExpr> find_max(const TimeExpr& e) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
    case TimeExpr::Kind::Var: return std::nullopt;
    case TimeExpr::Kind::Plus: return find_max(e.base());
    case TimeExpr::Kind::Max: return e;
  }
  return std::nullopt;
}

TimeExpr subst_expr(const TimeExpr& e, const TimeExpr& target, const TimeExpr& repl) {
  if (e == target) return repl;
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
    case TimeExpr::Kind::Var: return e;
    case TimeExpr::Kind::Plus:
      return TimeExpr::plus(subst_expr(e.base(), target, repl), e.delays(), e.offset());
    case TimeExpr::Kind::Max:
      return TimeExpr::max_of(subst_expr(e.max_left(), target, repl),
                              subst_expr(e.max_right(), target, repl));
  }
  return e;
}

ConstraintSystem subst_system(const ConstraintSystem& sys, const TimeExpr& target,
                              const TimeExpr& repl) {
  ConstraintSystem out = sys;
  for (auto& a : out.atoms) {
    a.lhs = subst_expr(a.lhs, target, repl);
    a.rhs = subst_expr(a.rhs, target, repl);
  }
  return out;
}

}  // namespace

bool satisfies(const ConstraintSystem& sys, const Model& m) {
  for (const auto& d : sys.delay_syms) {
    auto it = m.find(d.name);
    if (it != m.end() && it->second < Rat(0)) return false;
  }
  for (const auto& [name, v] : sys.fixed) {
    auto it = m.find(name);
    if (it != m.end() && it->second != v) return false;
  }
  for (const auto& a : sys.atoms) {
    Rat l = eval_expr(a.lhs, m), r = eval_expr(a.rhs, m);
    switch (a.rel) {
      case Constraint::Rel::Le: if (!(l <= r)) return false; break;
      case Constraint::Rel::Lt: if (!(l < r)) return false; break;
      case Constraint::Rel::Eq: if (l != r) return false; break;
    }
  }
  return true;
}

std::vector<ConstraintSystem> eliminate_max(const ConstraintSystem& sys) {
  for (const auto& a : sys.atoms) {
    for (const TimeExpr* side : {&a.lhs, &a.rhs}) {
      auto mx = find_max(*side);
      if (!mx) continue;
      TimeExpr l = mx->max_left(), r = mx->max_right();
      // Branch 1: left argument dominates.
      ConstraintSystem b1 = subst_system(sys, *mx, l).with(make_le(r, l));
      // Branch 2: right argument strictly dominates.
      ConstraintSystem b2 = subst_system(sys, *mx, r).with(make_lt(l, r));
      std::vector<ConstraintSystem> out;
      for (const auto& b : {b1, b2})
        for (auto& sub : eliminate_max(b)) out.push_back(std::move(sub));
      return out;
    }
  }
  return {sys};
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin
// ---------------------------------------------------------------------------

namespace {

// Sum of coeffs * var <= rhs.
struct LinIneq {
  std::map<std::string, Rat> coeffs;
  EpsRat rhs;
};

void add_term(std::map<std::string, Rat>& coeffs, const std::string& v, Rat c) {
  auto it = coeffs.find(v);
  if (it == coeffs.end()) {
    if (c != Rat(0)) coeffs.emplace(v, c);
    return;
  }
  it->second += c;
  if (it->second == Rat(0)) coeffs.erase(it);
}

// Linearizes e into coeffs (scaled by sign) and a constant added to konst.
void linearize(const TimeExpr& e, Rat sign, std::map<std::string, Rat>& coeffs,
               Rat& konst) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
      konst += sign * e.value();
      return;
    case TimeExpr::Kind::Var:
      add_term(coeffs, e.var_name(), sign);
      return;
    case TimeExpr::Kind::Plus:
      linearize(e.base(), sign, coeffs, konst);
      konst += sign * e.offset();
      for (const auto& d : e.delays()) add_term(coeffs, d, sign);
      return;
    case TimeExpr::Kind::Max:
      assert(false && "MaxOf must be eliminated before solving");
      return;
  }
}

// lhs - rhs <= bound_eps, where bound_eps is 0 for Le and -eps for Lt.
LinIneq to_ineq(const TimeExpr& lhs, const TimeExpr& rhs, bool strict) {
  LinIneq q;
  Rat konst(0);
  linearize(lhs, Rat(1), q.coeffs, konst);
  linearize(rhs, Rat(-1), q.coeffs, konst);
  q.rhs = EpsRat{-konst, strict ? Rat(-1) : Rat(0)};
  return q;
}

std::vector<LinIneq> collect_ineqs(const ConstraintSystem& sys) {
  std::vector<LinIneq> out;
  for (const auto& a : sys.atoms) {
    switch (a.rel) {
      case Constraint::Rel::Le:
        out.push_back(to_ineq(a.lhs, a.rhs, false));
        break;
      case Constraint::Rel::Lt:
        out.push_back(to_ineq(a.lhs, a.rhs, true));
        break;
      case Constraint::Rel::Eq:
        out.push_back(to_ineq(a.lhs, a.rhs, false));
        out.push_back(to_ineq(a.rhs, a.lhs, false));
        break;
    }
  }
  for (const auto& d : sys.delay_syms) {
    LinIneq q;  // -d <= 0
    q.coeffs[d.name] = Rat(-1);
    q.rhs = EpsRat{Rat(0), Rat(0)};
    out.push_back(q);
  }
  for (const auto& [name, v] : sys.fixed) {
    LinIneq lo, hi;
    hi.coeffs[name] = Rat(1);
    hi.rhs = EpsRat{v, Rat(0)};
    lo.coeffs[name] = Rat(-1);
    lo.rhs = EpsRat{-v, Rat(0)};
    out.push_back(hi);
    out.push_back(lo);
  }
  return out;
}

struct EliminationStep {
  std::string var;
  std::vector<LinIneq> bounds;  // every ineq that mentions var
};

}  // namespace

std::optional<Model> is_satisfiable(const ConstraintSystem& sys) {
  assert(!sys.contains_max());
  std::vector<LinIneq> ineqs = collect_ineqs(sys);

  std::set<std::string> vars;
  for (const auto& q : ineqs)
    for (const auto& [v, c] : q.coeffs) vars.insert(v);

  std::vector<EliminationStep> steps;
  for (const auto& v : vars) {
    EliminationStep step{v, {}};
    std::vector<LinIneq> keep, uppers, lowers;
    for (const auto& q : ineqs) {
      auto it = q.coeffs.find(v);
      if (it == q.coeffs.end()) {
        keep.push_back(q);
      } else {
        step.bounds.push_back(q);
        (it->second > Rat(0) ? uppers : lowers).push_back(q);
      }
    }
    for (const auto& up : uppers) {
      for (const auto& lo : lowers) {
        Rat a = up.coeffs.at(v);       // > 0
        Rat b = lo.coeffs.at(v);       // < 0
        LinIneq comb;                  // (-b)*up + a*lo, v cancels
        for (const auto& [u, c] : up.coeffs) add_term(comb.coeffs, u, -b * c);
        for (const auto& [u, c] : lo.coeffs) add_term(comb.coeffs, u, a * c);
        comb.coeffs.erase(v);
        comb.rhs = (-b) * up.rhs + a * lo.rhs;
        keep.push_back(std::move(comb));
      }
    }
    ineqs = std::move(keep);
    steps.push_back(std::move(step));
  }

  for (const auto& q : ineqs) {
    assert(q.coeffs.empty());
    if (!(EpsRat{Rat(0), Rat(0)} <= q.rhs)) return std::nullopt;
  }

  // Back-substitute in reverse elimination order.
  Model model;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    bool has_lo = false, has_hi = false, lo_strict = false, hi_strict = false;
    Rat lo(0), hi(0);
    for (const auto& q : it->bounds) {
      Rat a = q.coeffs.at(it->var);
      EpsRat rest{Rat(0), Rat(0)};
      for (const auto& [u, c] : q.coeffs) {
        if (u == it->var) continue;
        rest = rest + EpsRat{c * model.at(u), Rat(0)};
      }
      EpsRat bound = Rat(1) / a * (q.rhs - rest);
      if (a > Rat(0)) {
        // var <= bound; negative eps means strict over the rationals.
        bool strict = bound.eps < Rat(0);
        if (!has_hi || bound.r < hi || (bound.r == hi && strict)) {
          hi = bound.r;
          hi_strict = strict;
          has_hi = true;
        }
      } else {
        // var >= bound; positive eps means strict.
        bool strict = bound.eps > Rat(0);
        if (!has_lo || bound.r > lo || (bound.r == lo && strict)) {
          lo = bound.r;
          lo_strict = strict;
          has_lo = true;
        }
      }
    }
    Rat v(0);
    if (has_lo && has_hi) {
      if (lo == hi) {
        v = lo;  // consistency guaranteed by elimination
      } else {
        v = (lo + hi) / 2;
      }
    } else if (has_lo) {
      v = lo_strict ? lo + 1 : lo;
    } else if (has_hi) {
      v = hi_strict ? hi - 1 : hi;
    }
    model[it->var] = v;
  }
  return model;
}

bool entails(const ConstraintSystem& sys, const Constraint& atom) {
  assert(!sys.contains_max());
  switch (atom.rel) {
    case Constraint::Rel::Le:
      return !is_satisfiable(sys.with(make_lt(atom.rhs, atom.lhs)));
    case Constraint::Rel::Lt:
      return !is_satisfiable(sys.with(make_le(atom.rhs, atom.lhs)));
    case Constraint::Rel::Eq:
      return !is_satisfiable(sys.with(make_lt(atom.lhs, atom.rhs))) &&
             !is_satisfiable(sys.with(make_lt(atom.rhs, atom.lhs)));
  }
  return false;
}

BindResult bind_first_occurrence(const std::vector<ScopedTime>& times) {
  BindResult res;
  for (const auto& st : times) {
    if (st.scope != ScopedTime::Scope::Singleton || st.var.empty()) continue;
    auto it = res.subst.find(st.var);
    if (it == res.subst.end()) {
      res.subst.emplace(st.var, *st.bound);
    } else if (!(it->second == *st.bound)) {
      res.error = "E_CONFLICT: " + st.var + " bound to " +
                  it->second.to_string() + " and " + st.bound->to_string();
      return res;
    }
  }
  return res;
}

}  // namespace paylogic

// Symbolic event times and delay symbols, time binding expressions, and a
// small exact linear-inequality store decided by Fourier-Motzkin elimination
// over the rationals. Strict bounds are carried by an epsilon-extended
// rational so that the negation of a non-strict atom stays expressible.

#ifndef PAYLOGIC_TIME_ALGEBRA_HPP
#define PAYLOGIC_TIME_ALGEBRA_HPP

#include <boost/rational.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace paylogic {

using Rat = boost::rational<long long>;

std::string rat_to_string(const Rat& r);

// Rational plus an infinitesimal component, ordered lexicographically.
// a < b over the rationals is encoded as a + eps <= b.
struct EpsRat {
  Rat r;
  Rat eps;

  friend bool operator==(const EpsRat&, const EpsRat&) = default;
  friend bool operator<(const EpsRat& x, const EpsRat& y) {
    return x.r < y.r || (x.r == y.r && x.eps < y.eps);
  }
  friend bool operator<=(const EpsRat& x, const EpsRat& y) {
    return x < y || x == y;
  }
  friend EpsRat operator+(const EpsRat& x, const EpsRat& y) {
    return {x.r + y.r, x.eps + y.eps};
  }
  friend EpsRat operator-(const EpsRat& x, const EpsRat& y) {
    return {x.r - y.r, x.eps - y.eps};
  }
  friend EpsRat operator*(const Rat& c, const EpsRat& x) {
    return {c * x.r, c * x.eps};
  }
};

struct DelaySym {
  enum class Role { StepDelay, WaitingTime };
  std::string name;
  Role role = Role::StepDelay;

  friend bool operator==(const DelaySym&, const DelaySym&) = default;
  friend bool operator<(const DelaySym& a, const DelaySym& b) {
    return a.name < b.name;
  }
};

// A symbolic time expression. Plus adds nonnegative delay symbols and a
// rational offset to a base; MaxOf survives only until max elimination.
class TimeExpr {
 public:
  enum class Kind { Const, Var, Plus, Max };

  static TimeExpr constant(Rat value);
  static TimeExpr var(std::string name);
  static TimeExpr plus(TimeExpr base, std::vector<std::string> delays,
                       Rat offset = Rat(0));
  static TimeExpr max_of(TimeExpr a, TimeExpr b);

  Kind kind() const;
  const Rat& value() const;                       // Const
  const std::string& var_name() const;            // Var
  TimeExpr base() const;                          // Plus
  const std::vector<std::string>& delays() const; // Plus
  const Rat& offset() const;                      // Plus
  TimeExpr max_left() const;                      // Max
  TimeExpr max_right() const;                     // Max

  bool contains_max() const;
  std::string to_string() const;

  friend bool operator==(const TimeExpr& a, const TimeExpr& b);
  friend bool operator!=(const TimeExpr& a, const TimeExpr& b) {
    return !(a == b);
  }
  friend bool operator<(const TimeExpr& a, const TimeExpr& b);

 private:
  struct Node;
  explicit TimeExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// A time binding expression [X|TS]. Supported scopes: full domain ([X]),
// upper bound ([X | X <= T]) and singleton ([x]).
struct ScopedTime {
  enum class Scope { Full, Upper, Singleton };
  std::string var;
  Scope scope = Scope::Full;
  std::optional<TimeExpr> bound;  // Upper: the bound; Singleton: the value

  std::string to_string() const;
};

struct Constraint {
  enum class Rel { Le, Lt, Eq };
  Rel rel;
  TimeExpr lhs, rhs;

  std::string to_string() const;
  friend bool operator==(const Constraint&, const Constraint&);
};

Constraint make_le(TimeExpr a, TimeExpr b);
Constraint make_lt(TimeExpr a, TimeExpr b);
Constraint make_eq(TimeExpr a, TimeExpr b);

struct ConstraintSystem {
  std::vector<Constraint> atoms;
  std::set<DelaySym> delay_syms;        // every member carries >= 0
  std::map<std::string, Rat> fixed;     // optional pinning of delay symbols

  ConstraintSystem with(Constraint c) const;
  bool contains_max() const;
  std::string to_string() const;
};

using Model = std::map<std::string, Rat>;

// Exact substitution check of a rational assignment against every atom.
// Variables absent from the model default to 0.
bool satisfies(const ConstraintSystem& sys, const Model& m);

// Case-splits every MaxOf occurrence: branch one keeps the left argument
// under b <= a, branch two keeps the right under a < b. The union of branch
// model sets equals the original's.
std::vector<ConstraintSystem> eliminate_max(const ConstraintSystem& sys);

// Satisfiability over the rationals with all delay symbols >= 0, by
// Fourier-Motzkin elimination. Requires a MaxOf-free system.
std::optional<Model> is_satisfiable(const ConstraintSystem& sys);

// sys entails atom iff sys together with the negation of atom is
// unsatisfiable. Requires MaxOf-free input.
bool entails(const ConstraintSystem& sys, const Constraint& atom);

// First-occurrence binding of time variables in a formula's ordered list of
// scoped times: a singleton occurrence binds its variable; later bindings
// must agree.
struct BindResult {
  std::map<std::string, TimeExpr> subst;
  std::optional<std::string> error;  // E_CONFLICT diagnostics
};
BindResult bind_first_occurrence(const std::vector<ScopedTime>& times);

}  // namespace paylogic

#endif

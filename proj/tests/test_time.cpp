#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paylogic/oracle.hpp"
#include "paylogic/time_algebra.hpp"

using namespace paylogic;

TEST_CASE("rationals are exact") {
  Rat third(1, 3);
  CHECK(third + third + third == Rat(1));
  CHECK(rat_to_string(Rat(3)) == "3");
  CHECK(rat_to_string(Rat(-7, 2)) == "-7/2");
}

TEST_CASE("epsilon-extended rationals order lexicographically") {
  EpsRat one{Rat(1), Rat(0)};
  EpsRat one_plus{Rat(1), Rat(1)};
  EpsRat two{Rat(2), Rat(0)};
  EpsRat two_minus{Rat(2), Rat(-1)};

  CHECK(one < one_plus);      // 1 < 1 + eps
  CHECK(one_plus < two);      // any finite eps count stays below the next rational
  CHECK(two_minus < two);
  CHECK(one <= one);
  CHECK(one + one_plus == EpsRat{Rat(2), Rat(1)});
  CHECK(Rat(3) * one_plus == EpsRat{Rat(3), Rat(3)});
}

TEST_CASE("time expressions: structure and rendering") {
  TimeExpr t5 = TimeExpr::var("T5");
  TimeExpr sum = TimeExpr::plus(t5, {"t5", "t6"});
  TimeExpr m = TimeExpr::max_of(t5, TimeExpr::var("T7"));

  CHECK(t5.kind() == TimeExpr::Kind::Var);
  CHECK(sum.kind() == TimeExpr::Kind::Plus);
  CHECK(sum.base() == t5);
  CHECK(sum.delays() == std::vector<std::string>{"t5", "t6"});
  CHECK_FALSE(sum.contains_max());
  CHECK(m.contains_max());
  CHECK(sum.to_string() == "T5 + t5 + t6");
  CHECK(TimeExpr::constant(Rat(3, 2)).to_string() == "3/2");
  CHECK(m.to_string() == "max(T5, T7)");
  CHECK(sum == TimeExpr::plus(TimeExpr::var("T5"), {"t5", "t6"}));
}

TEST_CASE("model substitution check") {
  ConstraintSystem sys;
  sys.atoms.push_back(make_le(TimeExpr::var("x"), TimeExpr::var("y")));
  sys.atoms.push_back(make_lt(TimeExpr::constant(Rat(0)), TimeExpr::var("y")));

  CHECK(satisfies(sys, {{"x", Rat(1)}, {"y", Rat(2)}}));
  CHECK_FALSE(satisfies(sys, {{"x", Rat(3)}, {"y", Rat(2)}}));
  // Strictness matters: y = 0 fails 0 < y.
  CHECK_FALSE(satisfies(sys, {{"x", Rat(0)}, {"y", Rat(0)}}));
  // Absent variables default to 0.
  CHECK_FALSE(satisfies(sys, {}));
}

TEST_CASE("max elimination case-splits and preserves the model set") {
  ConstraintSystem sys;
  TimeExpr a = TimeExpr::var("a"), b = TimeExpr::var("b"), c = TimeExpr::var("c");
  sys.atoms.push_back(make_le(TimeExpr::max_of(a, b), c));

  auto branches = eliminate_max(sys);
  REQUIRE(branches.size() == 2);
  for (const auto& br : branches) CHECK_FALSE(br.contains_max());

  Model a_wins{{"a", Rat(5)}, {"b", Rat(2)}, {"c", Rat(5)}};
  Model b_wins{{"a", Rat(1)}, {"b", Rat(4)}, {"c", Rat(4)}};
  Model neither{{"a", Rat(9)}, {"b", Rat(9)}, {"c", Rat(0)}};

  // Each model of the original lands in exactly one branch; non-models in none.
  auto hits = [&](const Model& m) {
    int n = 0;
    for (const auto& br : branches) n += satisfies(br, m) ? 1 : 0;
    return n;
  };
  CHECK(hits(a_wins) == 1);
  CHECK(hits(b_wins) == 1);
  CHECK(hits(neither) == 0);

  // Nested occurrences all get eliminated.
  ConstraintSystem nested;
  nested.atoms.push_back(
      make_le(TimeExpr::max_of(TimeExpr::max_of(a, b), c), TimeExpr::var("d")));
  auto nb = eliminate_max(nested);
  REQUIRE(nb.size() >= 3);
  for (const auto& br : nb) CHECK_FALSE(br.contains_max());
}

TEST_CASE("satisfiability: basic feasible and infeasible systems") {
  TimeExpr x = TimeExpr::var("x"), y = TimeExpr::var("y");

  SUBCASE("feasible chain returns a model that substitution-checks") {
    ConstraintSystem sys;
    sys.atoms.push_back(make_lt(x, y));
    sys.atoms.push_back(make_le(y, TimeExpr::constant(Rat(2))));
    auto m = is_satisfiable(sys);
    REQUIRE(m.has_value());
    CHECK(satisfies(sys, *m));
  }

  SUBCASE("strict cycle is infeasible") {
    ConstraintSystem sys;
    sys.atoms.push_back(make_lt(x, y));
    sys.atoms.push_back(make_lt(y, x));
    CHECK_FALSE(is_satisfiable(sys).has_value());
  }

  SUBCASE("non-strict cycle forces equality and stays feasible") {
    ConstraintSystem sys;
    sys.atoms.push_back(make_le(x, y));
    sys.atoms.push_back(make_le(y, x));
    auto m = is_satisfiable(sys);
    REQUIRE(m.has_value());
    CHECK(satisfies(sys, *m));
  }

  SUBCASE("equalities propagate") {
    ConstraintSystem sys;
    sys.atoms.push_back(make_eq(x, TimeExpr::plus(y, {}, Rat(3))));
    sys.atoms.push_back(make_le(x, TimeExpr::constant(Rat(2))));
    sys.atoms.push_back(make_le(TimeExpr::constant(Rat(0)), y));
    // x = y + 3, y >= 0 forces x >= 3, contradicting x <= 2.
    CHECK_FALSE(is_satisfiable(sys).has_value());
  }

  SUBCASE("delay symbols are nonnegative") {
    ConstraintSystem sys;
    sys.delay_syms.insert({"t5", DelaySym::Role::StepDelay});
    sys.atoms.push_back(
        make_lt(TimeExpr::plus(TimeExpr::constant(Rat(0)), {"t5"}),
                TimeExpr::constant(Rat(0))));
    CHECK_FALSE(is_satisfiable(sys).has_value());
  }

  SUBCASE("pinned delays are honored") {
    ConstraintSystem sys;
    sys.delay_syms.insert({"tC", DelaySym::Role::WaitingTime});
    sys.fixed["tC"] = Rat(5);
    sys.atoms.push_back(
        make_lt(TimeExpr::plus(TimeExpr::constant(Rat(0)), {"tC"}),
                TimeExpr::constant(Rat(4))));
    CHECK_FALSE(is_satisfiable(sys).has_value());
    sys.fixed["tC"] = Rat(3);
    auto m = is_satisfiable(sys);
    REQUIRE(m.has_value());
    CHECK(m->at("tC") == Rat(3));
  }
}

TEST_CASE("entailment via negation") {
  // The timing core of the fixed protocol: T7 = T5 + t5 + t6 and
  // t5 + t6 <= tC entail T7 <= T5 + tC.
  ConstraintSystem sys;
  sys.delay_syms.insert({"t5", DelaySym::Role::StepDelay});
  sys.delay_syms.insert({"t6", DelaySym::Role::StepDelay});
  sys.delay_syms.insert({"tC", DelaySym::Role::WaitingTime});
  TimeExpr t5v = TimeExpr::var("T5");
  sys.atoms.push_back(make_eq(TimeExpr::var("T7"), TimeExpr::plus(t5v, {"t5", "t6"})));
  Constraint goal = make_le(TimeExpr::var("T7"), TimeExpr::plus(t5v, {"tC"}));

  CHECK_FALSE(entails(sys, goal));  // delays unconstrained: not entailed
  sys.atoms.push_back(make_le(TimeExpr::plus(TimeExpr::constant(Rat(0)), {"t5", "t6"}),
                              TimeExpr::plus(TimeExpr::constant(Rat(0)), {"tC"})));
  CHECK(entails(sys, goal));

  // Entailed atoms are consistent with the system, not vacuous.
  CHECK(is_satisfiable(sys).has_value());
}

TEST_CASE("satisfiability matches grid search on hand-picked systems") {
  GridSpec grid{Rat(0), Rat(4), Rat(1, 2)};
  TimeExpr x = TimeExpr::var("x"), y = TimeExpr::var("y");

  ConstraintSystem feasible;
  feasible.atoms.push_back(make_le(x, y));
  feasible.atoms.push_back(make_le(y, TimeExpr::constant(Rat(3))));
  auto bf = bf_sat(feasible, grid);
  auto fm = is_satisfiable(feasible);
  REQUIRE(bf.has_value());
  REQUIRE(fm.has_value());
  CHECK(satisfies(feasible, *bf));
  CHECK(satisfies(feasible, *fm));

  ConstraintSystem infeasible;
  infeasible.atoms.push_back(make_lt(y, x));
  infeasible.atoms.push_back(make_lt(x, y));
  CHECK_FALSE(bf_sat(infeasible, grid).has_value());
  CHECK_FALSE(is_satisfiable(infeasible).has_value());
}

TEST_CASE("first-occurrence binding of scoped times") {
  SUBCASE("singleton binds, later mention must agree") {
    std::vector<ScopedTime> times(2);
    times[0].var = "T4";
    times[0].scope = ScopedTime::Scope::Singleton;
    times[0].bound = TimeExpr::constant(Rat(4));
    times[1] = times[0];
    auto r = bind_first_occurrence(times);
    CHECK_FALSE(r.error.has_value());
    REQUIRE(r.subst.count("T4") == 1);
    CHECK(r.subst.at("T4") == TimeExpr::constant(Rat(4)));
  }

  SUBCASE("conflicting rebind reports E_CONFLICT") {
    std::vector<ScopedTime> times(2);
    times[0].var = "T4";
    times[0].scope = ScopedTime::Scope::Singleton;
    times[0].bound = TimeExpr::constant(Rat(4));
    times[1].var = "T4";
    times[1].scope = ScopedTime::Scope::Singleton;
    times[1].bound = TimeExpr::constant(Rat(5));
    auto r = bind_first_occurrence(times);
    REQUIRE(r.error.has_value());
    CHECK(r.error->find("E_CONFLICT") != std::string::npos);
  }

  SUBCASE("full-scope occurrence binds nothing") {
    std::vector<ScopedTime> times(1);
    times[0].var = "X";
    times[0].scope = ScopedTime::Scope::Full;
    auto r = bind_first_occurrence(times);
    CHECK_FALSE(r.error.has_value());
    CHECK(r.subst.empty());
  }
}

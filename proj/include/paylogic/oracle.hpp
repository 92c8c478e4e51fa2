// Brute-force reference implementations used to cross-check the optimized
// algorithms. Everything here is written independently: no calls into the
// closure, satisfiability, or analysis code paths.

#ifndef PAYLOGIC_ORACLE_HPP
#define PAYLOGIC_ORACLE_HPP

#include "paylogic/message.hpp"
#include "paylogic/protocol.hpp"
#include "paylogic/time_algebra.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace paylogic {

// Fixpoint of pair splitting and decryption computed by naive repeated
// passes, capped at depth_bound rounds.
MsgSet bf_closure(const MsgSet& s, int depth_bound = 64);

// Naive derivability: target is in the closure or is built from derivable
// parts (pairing, hashing, encryption under a possessed key).
bool bf_derivable(const MsgSet& s, const Msg& target, int depth_bound = 64);

// A uniform grid of candidate values lo, lo+step, ..., <= hi.
struct GridSpec {
  Rat lo = Rat(0);
  Rat hi = Rat(10);
  Rat step = Rat(1);

  std::vector<Rat> values() const;
};

// Exhaustive search for a satisfying assignment over the grid. Pinned
// variables keep their pinned value; all other variables (including delay
// symbols) range over the grid. Returns the first satisfying assignment in
// lexicographic variable order, if any grid point works.
std::optional<Model> bf_sat(const ConstraintSystem& sys, const GridSpec& grid);

// A fairness violation found by exhaustive enumeration: a terminal state in
// which exactly one side can derive its evidence, together with a concrete
// delay assignment that makes the fired timeouts consistent.
struct BfViolation {
  RunConfig config;
  std::map<std::string, Rat> delays;
  bool eoo_derivable = false;
  bool eor_derivable = false;
};

// Enumerates truncations and timeout subsets naively, simulates possession
// sets from scratch, and reports every timing-consistent terminal state with
// a fired timeout where evidence derivability is asymmetric.
std::vector<BfViolation> bf_fairness(const ProtocolSpec& spec, const Msg& eoo,
                                     const std::string& eoo_holder, const Msg& eor,
                                     const std::string& eor_holder,
                                     const GridSpec& grid);

// Naive count of legal terminal states (truncation point x timeout subset).
int bf_terminal_count(const ProtocolSpec& spec);

}  // namespace paylogic

#endif

// The formula language, the axiom system, registered credible assumptions,
// and a depth-limited backward-chaining prover that produces replayable
// derivations together with their accumulated time constraints.

#ifndef PAYLOGIC_LOGIC_HPP
#define PAYLOGIC_LOGIC_HPP

#include "paylogic/message.hpp"
#include "paylogic/time_algebra.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace paylogic {

// ---------------------------------------------------------------------------
// Ground formulas
// ---------------------------------------------------------------------------

class Formula {
 public:
  enum class Kind { CanProve, Sent, Possesses, Received, PubKeyOf, SharedKeyOf, Conj };

  static Formula can_prove(std::string agent, Formula body);
  static Formula sent(std::string agent, Msg m, TimeExpr at);
  static Formula possesses(std::string agent, Msg m,
                           std::optional<TimeExpr> at = std::nullopt);
  static Formula received(std::string agent, Msg m, TimeExpr at);
  static Formula pubkey_of(KeyTerm key, std::string owner);
  static Formula shared_key_of(KeyTerm key, std::string a, std::string b);
  static Formula conj(std::vector<Formula> parts);

  Kind kind() const;
  const std::string& agent() const;           // CanProve/Sent/Possesses/Received
  Formula body() const;                       // CanProve
  const Msg& msg() const;                     // Sent/Possesses/Received
  const std::optional<TimeExpr>& at() const;  // Sent/Possesses/Received
  const KeyTerm& key() const;                 // PubKeyOf/SharedKeyOf
  const std::string& owner() const;           // PubKeyOf
  const std::string& endpoint_a() const;      // SharedKeyOf
  const std::string& endpoint_b() const;      // SharedKeyOf
  const std::vector<Formula>& parts() const;  // Conj

  // Compact notation with unicode connectives.
  std::string to_string() const;

  friend bool operator==(const Formula& a, const Formula& b);
  friend bool operator!=(const Formula& a, const Formula& b) { return !(a == b); }
  friend bool operator<(const Formula& a, const Formula& b);

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Patterns with metavariables (written ?name in the DSL)
// ---------------------------------------------------------------------------

struct PartyPat {
  enum class Kind { Concrete, Meta, Counterpart };
  Kind kind = Kind::Concrete;
  std::string name;  // party name, metavariable, or counterpart argument meta

  static PartyPat concrete(std::string n) { return {Kind::Concrete, std::move(n)}; }
  static PartyPat meta(std::string n) { return {Kind::Meta, std::move(n)}; }
  static PartyPat counterpart(std::string meta) { return {Kind::Counterpart, std::move(meta)}; }
};

struct KeyPat {
  enum class Kind { Concrete, Meta, Dual, Public, Private };
  Kind kind = Kind::Concrete;
  KeyTerm concrete = KeyTerm::session_key("");
  std::string meta;  // Meta / Dual argument
  PartyPat party;    // Public / Private owner

  static KeyPat of(KeyTerm k) { return {Kind::Concrete, std::move(k), "", {}}; }
  static KeyPat metavar(std::string n) { return {Kind::Meta, KeyTerm::session_key(""), std::move(n), {}}; }
  static KeyPat dual_of(std::string n) { return {Kind::Dual, KeyTerm::session_key(""), std::move(n), {}}; }
  static KeyPat public_of(PartyPat p) { return {Kind::Public, KeyTerm::session_key(""), "", std::move(p)}; }
  static KeyPat private_of(PartyPat p) { return {Kind::Private, KeyTerm::session_key(""), "", std::move(p)}; }
};

class MsgPat {
 public:
  enum class Kind { Meta, Atom, Pair, Enc, Hash, Key };

  static MsgPat metavar(std::string name);
  static MsgPat of(const Msg& ground);
  static MsgPat atom(std::string name);
  static MsgPat pair(MsgPat l, MsgPat r);
  static MsgPat enc(MsgPat body, KeyPat key);
  static MsgPat hash(MsgPat body);
  static MsgPat key(KeyPat k);

  Kind kind() const;
  const std::string& name() const;  // Meta / Atom
  MsgPat left() const;
  MsgPat right() const;
  MsgPat body() const;
  const KeyPat& key_pat() const;

 private:
  struct Node;
  explicit MsgPat(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct TimePat {
  enum class Kind { Any, Meta, Concrete, Max, FreshUpper };
  Kind kind = Kind::Any;
  std::string meta;                    // Meta / FreshUpper variable hint
  std::optional<TimeExpr> concrete;    // Concrete
  std::shared_ptr<TimePat> a, b;       // Max children / FreshUpper bound in a

  static TimePat any() { return {}; }
  static TimePat metavar(std::string n);
  static TimePat of(TimeExpr e);
  static TimePat max_of(TimePat x, TimePat y);
  // A conclusion-side scoped time [Y | Y <= bound]: a fresh variable is
  // minted at application time and the upper-bound atom is emitted.
  static TimePat fresh_upper(std::string hint, TimePat bound);
};

struct FormulaPat {
  Formula::Kind kind = Formula::Kind::Conj;
  PartyPat agent;
  std::shared_ptr<FormulaPat> body;   // CanProve
  std::optional<MsgPat> msg;
  std::optional<TimePat> at;          // nullopt: time irrelevant
  std::optional<KeyPat> key;
  PartyPat owner;                     // PubKeyOf
  PartyPat a, b;                      // SharedKeyOf
  std::vector<FormulaPat> conj;

  static FormulaPat can_prove(PartyPat agent, FormulaPat body);
  static FormulaPat sent(PartyPat agent, MsgPat m, TimePat at);
  static FormulaPat possesses(PartyPat agent, MsgPat m,
                              std::optional<TimePat> at = std::nullopt);
  static FormulaPat received(PartyPat agent, MsgPat m, TimePat at);
  static FormulaPat pubkey_of(KeyPat key, PartyPat owner);
  static FormulaPat shared_key_of(KeyPat key, PartyPat a, PartyPat b);
  static FormulaPat of(const Formula& ground);

  std::string to_string() const;
};

struct Rule {
  std::string name;
  std::string family;  // axiom family for report grouping (A3s -> A3)
  std::vector<FormulaPat> premises;
  FormulaPat conclusion;
};

// The axioms plus the pair-decomposition rules; the inference rule itself is
// the backward-chaining step.
std::vector<Rule> builtin_rules();

struct KnowledgeBase {
  std::vector<Formula> facts;
  std::vector<Rule> rules = builtin_rules();
  // Counterpart map used by assumption conclusions (e.g. C <-> M).
  std::map<std::string, std::string> counterparts;

  KnowledgeBase with_fact(Formula f) const;
};

// Validates the rule (every conclusion metavariable must be reachable from
// the premises or the counterpart map) and appends it; throws
// std::invalid_argument with E_UNBOUND_METAVAR on violation.
KnowledgeBase register_assumption(const KnowledgeBase& kb, const Rule& rule);

struct Derivation {
  Formula goal = Formula::conj({});
  std::string rule;    // rule name; "fact" for leaves
  std::string family;  // rule family; "fact" for leaves
  std::vector<Derivation> children;
  std::vector<Constraint> emitted;

  // Multiset of rule families used in the tree, leaves excluded.
  std::multiset<std::string> rule_families() const;
  std::string to_string(int indent = 0) const;
};

struct ProveResult {
  Derivation derivation;
  ConstraintSystem system;  // input system plus all emitted atoms
};

// Depth-limited deterministic backward chaining. Returns the first proof in
// rule order whose accumulated constraint system is satisfiable after max
// elimination. Absence of a proof is not an error; *depth_exhausted reports
// whether the depth limit pruned any branch.
std::optional<ProveResult> prove(const KnowledgeBase& kb, const FormulaPat& goal,
                                 const ConstraintSystem& sys, int depth_limit = 12,
                                 bool* depth_exhausted = nullptr);

// Independent soundness audit: every node's conclusion must follow from its
// children by its named rule, leaves must be facts, and the union of emitted
// constraints must be satisfiable.
bool replay(const Derivation& d, const KnowledgeBase& kb);

}  // namespace paylogic

#endif

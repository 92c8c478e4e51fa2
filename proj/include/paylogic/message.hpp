// Message term algebra: atoms, pairs, encryptions (signatures as
// private-key encryptions), hashes, and key terms, plus the derivability
// closure used for possession and evidence queries.

#ifndef PAYLOGIC_MESSAGE_HPP
#define PAYLOGIC_MESSAGE_HPP

#include <compare>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace paylogic {

struct PartyId {
  std::string name;
  bool is_ttp = false;

  friend bool operator==(const PartyId& a, const PartyId& b) {
    return a.name == b.name && a.is_ttp == b.is_ttp;
  }
  friend bool operator<(const PartyId& a, const PartyId& b) {
    return a.name < b.name;
  }
};

// A key term. Asymmetric keys are identified by their owner; shared keys by
// name plus an unordered endpoint pair; session keys by name alone.
struct KeyTerm {
  enum class Kind { Public, Private, Shared, Session };

  Kind kind;
  std::string name;   // shared/session keys
  std::string owner;  // public/private keys
  std::pair<std::string, std::string> endpoints;  // shared keys, sorted

  static KeyTerm public_key(std::string owner);
  static KeyTerm private_key(std::string owner);
  static KeyTerm shared_key(std::string name, std::string a, std::string b);
  static KeyTerm session_key(std::string name);

  std::string to_string() const;

  friend bool operator==(const KeyTerm&, const KeyTerm&) = default;
  friend std::strong_ordering operator<=>(const KeyTerm&, const KeyTerm&) = default;
};

// Dual (decryption counterpart) of a key; involutive. Symmetric keys are
// self-dual, public/private swap.
KeyTerm dual_key(const KeyTerm& k);

// An immutable message term. Value semantics over a shared node.
class Msg {
 public:
  enum class Kind { Atom, Pair, Enc, Hash, Key };

  static Msg atom(std::string name);
  static Msg pair(Msg left, Msg right);
  static Msg enc(Msg body, KeyTerm key);
  static Msg hash(Msg body);
  static Msg key(KeyTerm k);

  Kind kind() const;
  const std::string& atom_name() const;  // Atom
  Msg left() const;                      // Pair
  Msg right() const;                     // Pair
  Msg body() const;                      // Enc, Hash
  const KeyTerm& key_term() const;       // Enc (encryption key), Key

  // Number of constructor nodes in the term tree.
  int size() const;
  // Maximum constructor nesting depth.
  int depth() const;

  // Canonical rendering: atoms bare, pair(a,b), enc(m,K), sign(m,P) for
  // enc(m, priv(P)), hash(m), key(K).
  std::string to_string() const;

  friend bool operator==(const Msg& a, const Msg& b);
  friend bool operator!=(const Msg& a, const Msg& b) { return !(a == b); }
  friend bool operator<(const Msg& a, const Msg& b);

 private:
  struct Node;
  explicit Msg(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

using MsgSet = std::set<Msg>;

// Direct parts obtained without keys: a pair yields its two components,
// everything else is opaque.
MsgSet immediate_parts(const Msg& m);

// Smallest superset of s closed under pair splitting and decryption of
// enc(m,K) when key(dual(K)) is in the closure.
MsgSet analyze_closure(const MsgSet& s);

// True iff goal can be built from analyze_closure(s) by pairing, hashing,
// and encrypting with keys present in the closure.
bool can_derive(const MsgSet& s, const Msg& goal);

}  // namespace paylogic

#endif

#include "paylogic/message.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <functional>
#include <sstream>
#include <tuple>

namespace paylogic {

KeyTerm KeyTerm::public_key(std::string owner) {
  return KeyTerm{Kind::Public, "", std::move(owner), {}};
}
KeyTerm KeyTerm::private_key(std::string owner) {
  return KeyTerm{Kind::Private, "", std::move(owner), {}};
}
KeyTerm KeyTerm::shared_key(std::string name, std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return KeyTerm{Kind::Shared, std::move(name), "", {std::move(a), std::move(b)}};
}
KeyTerm KeyTerm::session_key(std::string name) {
  return KeyTerm{Kind::Session, std::move(name), "", {}};
}

std::string KeyTerm::to_string() const {
  switch (kind) {
    case Kind::Public: return "pub(" + owner + ")";
    case Kind::Private: return "priv(" + owner + ")";
    case Kind::Shared: return name;
    case Kind::Session: return name;
  }
  return "?";
}

KeyTerm dual_key(const KeyTerm& k) {
  switch (k.kind) {
    case KeyTerm::Kind::Public: return KeyTerm::private_key(k.owner);
    case KeyTerm::Kind::Private: return KeyTerm::public_key(k.owner);
    case KeyTerm::Kind::Shared:
    case KeyTerm::Kind::Session: return k;
  }
  return k;
}

struct Msg::Node {
  Kind kind;
  std::string name;             // Atom
  std::shared_ptr<const Node> a, b;  // Pair children / Enc,Hash body
  std::optional<KeyTerm> key;   // Enc, Key
};

Msg Msg::atom(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Atom;
  n->name = std::move(name);
  return Msg(std::move(n));
}
Msg Msg::pair(Msg l, Msg r) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pair;
  n->a = std::move(l.node_);
  n->b = std::move(r.node_);
  return Msg(std::move(n));
}
Msg Msg::enc(Msg body, KeyTerm key) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Enc;
  n->a = std::move(body.node_);
  n->key = std::move(key);
  return Msg(std::move(n));
}
Msg Msg::hash(Msg body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Hash;
  n->a = std::move(body.node_);
  return Msg(std::move(n));
}
Msg Msg::key(KeyTerm k) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Key;
  n->key = std::move(k);
  return Msg(std::move(n));
}

Msg::Kind Msg::kind() const { return node_->kind; }
const std::string& Msg::atom_name() const { return node_->name; }
Msg Msg::left() const { return Msg(node_->a); }
Msg Msg::right() const { return Msg(node_->b); }
Msg Msg::body() const { return Msg(node_->a); }
const KeyTerm& Msg::key_term() const { return *node_->key; }

int Msg::size() const {
  switch (node_->kind) {
    case Kind::Atom:
    case Kind::Key: return 1;
    case Kind::Hash:
    case Kind::Enc: return 1 + Msg(node_->a).size();
    case Kind::Pair: return 1 + Msg(node_->a).size() + Msg(node_->b).size();
  }
  return 1;
}

int Msg::depth() const {
  switch (node_->kind) {
    case Kind::Atom:
    case Kind::Key: return 1;
    case Kind::Hash:
    case Kind::Enc: return 1 + Msg(node_->a).depth();
    case Kind::Pair:
      return 1 + std::max(Msg(node_->a).depth(), Msg(node_->b).depth());
  }
  return 1;
}

std::string Msg::to_string() const {
  switch (node_->kind) {
    case Kind::Atom: return node_->name;
    case Kind::Pair:
      return "pair(" + Msg(node_->a).to_string() + ", " + Msg(node_->b).to_string() + ")";
    case Kind::Enc:
      if (node_->key->kind == KeyTerm::Kind::Private)
        return "sign(" + Msg(node_->a).to_string() + ", " + node_->key->owner + ")";
      return "enc(" + Msg(node_->a).to_string() + ", " + node_->key->to_string() + ")";
    case Kind::Hash: return "hash(" + Msg(node_->a).to_string() + ")";
    case Kind::Key: return "key(" + node_->key->to_string() + ")";
  }
  return "?";
}

namespace {

int compare_key(const KeyTerm& x, const KeyTerm& y) {
  auto tx = std::tie(x.kind, x.name, x.owner, x.endpoints);
  auto ty = std::tie(y.kind, y.name, y.owner, y.endpoints);
  if (tx < ty) return -1;
  if (ty < tx) return 1;
  return 0;
}

int compare_msg(const Msg& x, const Msg& y) {
  if (x.kind() != y.kind()) return x.kind() < y.kind() ? -1 : 1;
  switch (x.kind()) {
    case Msg::Kind::Atom:
      return x.atom_name().compare(y.atom_name());
    case Msg::Kind::Key:
      return compare_key(x.key_term(), y.key_term());
    case Msg::Kind::Hash: {
      Msg xb = x.body(), yb = y.body();
      return compare_msg(xb, yb);
    }
    case Msg::Kind::Enc: {
      Msg xb = x.body(), yb = y.body();
      if (int c = compare_msg(xb, yb)) return c;
      return compare_key(x.key_term(), y.key_term());
    }
    case Msg::Kind::Pair: {
      Msg xl = x.left(), yl = y.left();
      if (int c = compare_msg(xl, yl)) return c;
      Msg xr = x.right(), yr = y.right();
      return compare_msg(xr, yr);
    }
  }
  return 0;
}

}  // namespace

bool operator==(const Msg& a, const Msg& b) {
  if (a.node_ == b.node_) return true;
  return compare_msg(a, b) == 0;
}
bool operator<(const Msg& a, const Msg& b) { return compare_msg(a, b) < 0; }

MsgSet immediate_parts(const Msg& m) {
  if (m.kind() == Msg::Kind::Pair) return {m.left(), m.right()};
  return {};
}

MsgSet analyze_closure(const MsgSet& s) {
  MsgSet out = s;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Msg> add;
    for (const Msg& m : out) {
      switch (m.kind()) {
        case Msg::Kind::Pair: {
          Msg l = m.left(), r = m.right();
          if (!out.count(l)) add.push_back(l);
          if (!out.count(r)) add.push_back(r);
          break;
        }
        case Msg::Kind::Enc: {
          if (out.count(Msg::key(dual_key(m.key_term())))) {
            Msg b = m.body();
            if (!out.count(b)) add.push_back(b);
          }
          break;
        }
        default: break;
      }
    }
    for (Msg& m : add) {
      out.insert(std::move(m));
      changed = true;
    }
  }
  return out;
}

namespace {

bool synthesize(const MsgSet& closure, const Msg& goal) {
  if (closure.count(goal)) return true;
  switch (goal.kind()) {
    case Msg::Kind::Pair: {
      Msg l = goal.left(), r = goal.right();
      return synthesize(closure, l) && synthesize(closure, r);
    }
    case Msg::Kind::Hash: {
      Msg b = goal.body();
      return synthesize(closure, b);
    }
    case Msg::Kind::Enc: {
      // The encryption key itself must be possessed; keys are never
      // synthesized, so a private key enters only if explicitly present.
      if (!closure.count(Msg::key(goal.key_term()))) return false;
      Msg b = goal.body();
      return synthesize(closure, b);
    }
    case Msg::Kind::Atom:
    case Msg::Kind::Key:
      return false;
  }
  return false;
}

}  // namespace

bool can_derive(const MsgSet& s, const Msg& goal) {
  return synthesize(analyze_closure(s), goal);
}

}  // namespace paylogic

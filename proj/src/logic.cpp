#include "paylogic/logic.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace paylogic {

// ---------------------------------------------------------------------------
// Formula
// ---------------------------------------------------------------------------

struct Formula::Node {
  Kind kind;
  std::string agent;
  std::shared_ptr<const Node> body;
  std::optional<Msg> msg;
  std::optional<TimeExpr> at;
  std::optional<KeyTerm> key;
  std::string owner;
  std::string a, b;
  std::vector<Formula> conj;
};

Formula Formula::can_prove(std::string agent, Formula body) {
  // A ~> (A ~> x) collapses to A ~> x.
  if (body.kind() == Kind::CanProve && body.agent() == agent) return body;
  auto n = std::make_shared<Node>();
  n->kind = Kind::CanProve;
  n->agent = std::move(agent);
  n->body = body.node_;
  return Formula(std::move(n));
}
Formula Formula::sent(std::string agent, Msg m, TimeExpr at) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Sent;
  n->agent = std::move(agent);
  n->msg = std::move(m);
  n->at = std::move(at);
  return Formula(std::move(n));
}
Formula Formula::possesses(std::string agent, Msg m, std::optional<TimeExpr> at) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Possesses;
  n->agent = std::move(agent);
  n->msg = std::move(m);
  n->at = std::move(at);
  return Formula(std::move(n));
}
Formula Formula::received(std::string agent, Msg m, TimeExpr at) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Received;
  n->agent = std::move(agent);
  n->msg = std::move(m);
  n->at = std::move(at);
  return Formula(std::move(n));
}
Formula Formula::pubkey_of(KeyTerm key, std::string owner) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::PubKeyOf;
  n->key = std::move(key);
  n->owner = std::move(owner);
  return Formula(std::move(n));
}
Formula Formula::shared_key_of(KeyTerm key, std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  auto n = std::make_shared<Node>();
  n->kind = Kind::SharedKeyOf;
  n->key = std::move(key);
  n->a = std::move(a);
  n->b = std::move(b);
  return Formula(std::move(n));
}
Formula Formula::conj(std::vector<Formula> parts) {
  std::vector<Formula> flat;
  for (auto& p : parts) {
    if (p.kind() == Kind::Conj)
      flat.insert(flat.end(), p.parts().begin(), p.parts().end());
    else
      flat.push_back(std::move(p));
  }
  std::sort(flat.begin(), flat.end());
  auto n = std::make_shared<Node>();
  n->kind = Kind::Conj;
  n->conj = std::move(flat);
  return Formula(std::move(n));
}

Formula::Kind Formula::kind() const { return node_->kind; }
const std::string& Formula::agent() const { return node_->agent; }
Formula Formula::body() const { return Formula(node_->body); }
const Msg& Formula::msg() const { return *node_->msg; }
const std::optional<TimeExpr>& Formula::at() const { return node_->at; }
const KeyTerm& Formula::key() const { return *node_->key; }
const std::string& Formula::owner() const { return node_->owner; }
const std::string& Formula::endpoint_a() const { return node_->a; }
const std::string& Formula::endpoint_b() const { return node_->b; }
const std::vector<Formula>& Formula::parts() const { return node_->conj; }

std::string Formula::to_string() const {
  switch (kind()) {
    case Kind::CanProve:
      return agent() + " ≻ (" + body().to_string() + ")";
    case Kind::Sent: {
      std::string s = agent() + " → " + msg().to_string();
      if (at()) s += " at " + at()->to_string();
      return s;
    }
    case Kind::Possesses: {
      std::string s = agent() + " ∋ " + msg().to_string();
      if (at()) s += " at " + at()->to_string();
      return s;
    }
    case Kind::Received: {
      std::string s = agent() + " ← " + msg().to_string();
      if (at()) s += " at " + at()->to_string();
      return s;
    }
    case Kind::PubKeyOf:
      return "pubkey " + key().to_string() + " of " + owner();
    case Kind::SharedKeyOf:
      return endpoint_a() + " ↔" + key().to_string() + "↔ " + endpoint_b();
    case Kind::Conj: {
      std::string s = "(";
      for (size_t i = 0; i < parts().size(); ++i) {
        if (i) s += " ∧ ";
        s += parts()[i].to_string();
      }
      return s + ")";
    }
  }
  return "?";
}

namespace {

int cmp3(int c) { return c < 0 ? -1 : c > 0 ? 1 : 0; }

int compare_formula(const Formula& x, const Formula& y) {
  if (x.kind() != y.kind()) return x.kind() < y.kind() ? -1 : 1;
  auto cmp_time = [](const std::optional<TimeExpr>& a,
                     const std::optional<TimeExpr>& b) {
    if (a.has_value() != b.has_value()) return a.has_value() ? 1 : -1;
    if (!a) return 0;
    if (*a < *b) return -1;
    if (*b < *a) return 1;
    return 0;
  };
  switch (x.kind()) {
    case Formula::Kind::CanProve:
      if (int c = cmp3(x.agent().compare(y.agent()))) return c;
      return compare_formula(x.body(), y.body());
    case Formula::Kind::Sent:
    case Formula::Kind::Possesses:
    case Formula::Kind::Received: {
      if (int c = cmp3(x.agent().compare(y.agent()))) return c;
      if (x.msg() < y.msg()) return -1;
      if (y.msg() < x.msg()) return 1;
      return cmp_time(x.at(), y.at());
    }
    case Formula::Kind::PubKeyOf: {
      if (int c = cmp3(x.owner().compare(y.owner()))) return c;
      if (x.key() < y.key()) return -1;
      if (y.key() < x.key()) return 1;
      return 0;
    }
    case Formula::Kind::SharedKeyOf: {
      if (int c = cmp3(x.endpoint_a().compare(y.endpoint_a()))) return c;
      if (int c = cmp3(x.endpoint_b().compare(y.endpoint_b()))) return c;
      if (x.key() < y.key()) return -1;
      if (y.key() < x.key()) return 1;
      return 0;
    }
    case Formula::Kind::Conj: {
      if (x.parts().size() != y.parts().size())
        return x.parts().size() < y.parts().size() ? -1 : 1;
      for (size_t i = 0; i < x.parts().size(); ++i)
        if (int c = compare_formula(x.parts()[i], y.parts()[i])) return c;
      return 0;
    }
  }
  return 0;
}

}  // namespace

bool operator==(const Formula& a, const Formula& b) {
  return compare_formula(a, b) == 0;
}
bool operator<(const Formula& a, const Formula& b) {
  return compare_formula(a, b) < 0;
}

// ---------------------------------------------------------------------------
// Patterns
// ---------------------------------------------------------------------------

struct MsgPat::Node {
  Kind kind;
  std::string name;
  std::shared_ptr<const Node> a, b;
  std::optional<KeyPat> key;
};

MsgPat MsgPat::metavar(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Meta;
  n->name = std::move(name);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::atom(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Atom;
  n->name = std::move(name);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::pair(MsgPat l, MsgPat r) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pair;
  n->a = std::move(l.node_);
  n->b = std::move(r.node_);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::enc(MsgPat body, KeyPat key) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Enc;
  n->a = std::move(body.node_);
  n->key = std::move(key);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::hash(MsgPat body) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Hash;
  n->a = std::move(body.node_);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::key(KeyPat k) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Key;
  n->key = std::move(k);
  return MsgPat(std::move(n));
}
MsgPat MsgPat::of(const Msg& g) {
  switch (g.kind()) {
    case Msg::Kind::Atom: return atom(g.atom_name());
    case Msg::Kind::Pair: return pair(of(g.left()), of(g.right()));
    case Msg::Kind::Enc: return enc(of(g.body()), KeyPat::of(g.key_term()));
    case Msg::Kind::Hash: return hash(of(g.body()));
    case Msg::Kind::Key: return key(KeyPat::of(g.key_term()));
  }
  return atom("?");
}

MsgPat::Kind MsgPat::kind() const { return node_->kind; }
const std::string& MsgPat::name() const { return node_->name; }
MsgPat MsgPat::left() const { return MsgPat(node_->a); }
MsgPat MsgPat::right() const { return MsgPat(node_->b); }
MsgPat MsgPat::body() const { return MsgPat(node_->a); }
const KeyPat& MsgPat::key_pat() const { return *node_->key; }

TimePat TimePat::metavar(std::string n) {
  TimePat t;
  t.kind = Kind::Meta;
  t.meta = std::move(n);
  return t;
}
TimePat TimePat::of(TimeExpr e) {
  TimePat t;
  t.kind = Kind::Concrete;
  t.concrete = std::move(e);
  return t;
}
TimePat TimePat::max_of(TimePat x, TimePat y) {
  TimePat t;
  t.kind = Kind::Max;
  t.a = std::make_shared<TimePat>(std::move(x));
  t.b = std::make_shared<TimePat>(std::move(y));
  return t;
}
TimePat TimePat::fresh_upper(std::string hint, TimePat bound) {
  TimePat t;
  t.kind = Kind::FreshUpper;
  t.meta = std::move(hint);
  t.a = std::make_shared<TimePat>(std::move(bound));
  return t;
}

FormulaPat FormulaPat::can_prove(PartyPat agent, FormulaPat body) {
  FormulaPat f;
  f.kind = Formula::Kind::CanProve;
  f.agent = std::move(agent);
  f.body = std::make_shared<FormulaPat>(std::move(body));
  return f;
}
FormulaPat FormulaPat::sent(PartyPat agent, MsgPat m, TimePat at) {
  FormulaPat f;
  f.kind = Formula::Kind::Sent;
  f.agent = std::move(agent);
  f.msg = std::move(m);
  f.at = std::move(at);
  return f;
}
FormulaPat FormulaPat::possesses(PartyPat agent, MsgPat m, std::optional<TimePat> at) {
  FormulaPat f;
  f.kind = Formula::Kind::Possesses;
  f.agent = std::move(agent);
  f.msg = std::move(m);
  f.at = std::move(at);
  return f;
}
FormulaPat FormulaPat::received(PartyPat agent, MsgPat m, TimePat at) {
  FormulaPat f;
  f.kind = Formula::Kind::Received;
  f.agent = std::move(agent);
  f.msg = std::move(m);
  f.at = std::move(at);
  return f;
}
FormulaPat FormulaPat::pubkey_of(KeyPat key, PartyPat owner) {
  FormulaPat f;
  f.kind = Formula::Kind::PubKeyOf;
  f.key = std::move(key);
  f.owner = std::move(owner);
  return f;
}
FormulaPat FormulaPat::shared_key_of(KeyPat key, PartyPat a, PartyPat b) {
  FormulaPat f;
  f.kind = Formula::Kind::SharedKeyOf;
  f.key = std::move(key);
  f.a = std::move(a);
  f.b = std::move(b);
  return f;
}
FormulaPat FormulaPat::of(const Formula& g) {
  switch (g.kind()) {
    case Formula::Kind::CanProve:
      return can_prove(PartyPat::concrete(g.agent()), of(g.body()));
    case Formula::Kind::Sent:
      return sent(PartyPat::concrete(g.agent()), MsgPat::of(g.msg()),
                  TimePat::of(*g.at()));
    case Formula::Kind::Possesses:
      return possesses(PartyPat::concrete(g.agent()), MsgPat::of(g.msg()),
                       g.at() ? std::optional<TimePat>(TimePat::of(*g.at()))
                              : std::nullopt);
    case Formula::Kind::Received:
      return received(PartyPat::concrete(g.agent()), MsgPat::of(g.msg()),
                      TimePat::of(*g.at()));
    case Formula::Kind::PubKeyOf:
      return pubkey_of(KeyPat::of(g.key()), PartyPat::concrete(g.owner()));
    case Formula::Kind::SharedKeyOf:
      return shared_key_of(KeyPat::of(g.key()), PartyPat::concrete(g.endpoint_a()),
                           PartyPat::concrete(g.endpoint_b()));
    case Formula::Kind::Conj: {
      FormulaPat f;
      f.kind = Formula::Kind::Conj;
      for (const auto& p : g.parts()) f.conj.push_back(of(p));
      return f;
    }
  }
  return FormulaPat{};
}

// ---------------------------------------------------------------------------
// Bindings and unification
// ---------------------------------------------------------------------------

namespace {

struct Bindings {
  std::map<std::string, std::string> parties;  // value may itself be a meta
  std::map<std::string, KeyPat> keys;
  std::map<std::string, MsgPat> msgs;
  std::map<std::string, TimePat> times;
  const std::map<std::string, std::string>* counterparts = nullptr;
};

bool is_meta(const std::string& s) { return !s.empty() && s[0] == '?'; }

// Resolves a party pattern to either a concrete name or an unbound meta.
// Returns false if a Counterpart cannot be resolved yet.
bool resolve_party(const PartyPat& p, const Bindings& b, bool& concrete,
                   std::string& out) {
  switch (p.kind) {
    case PartyPat::Kind::Concrete:
      concrete = true;
      out = p.name;
      return true;
    case PartyPat::Kind::Meta: {
      std::string cur = p.name;
      while (true) {
        auto it = b.parties.find(cur);
        if (it == b.parties.end()) {
          concrete = false;
          out = cur;
          return true;
        }
        cur = it->second;
        if (!is_meta(cur)) {
          concrete = true;
          out = cur;
          return true;
        }
      }
    }
    case PartyPat::Kind::Counterpart: {
      bool c;
      std::string arg;
      if (!resolve_party(PartyPat::meta(p.name), b, c, arg) || !c) return false;
      if (!b.counterparts) return false;
      auto it = b.counterparts->find(arg);
      if (it == b.counterparts->end()) return false;
      concrete = true;
      out = it->second;
      return true;
    }
  }
  return false;
}

bool unify_party(const PartyPat& x, const PartyPat& y, Bindings& b) {
  bool xc, yc;
  std::string xv, yv;
  if (!resolve_party(x, b, xc, xv)) return false;
  if (!resolve_party(y, b, yc, yv)) return false;
  if (xc && yc) return xv == yv;
  if (!xc) {
    if (!yc && xv == yv) return true;
    b.parties[xv] = yv;
    return true;
  }
  b.parties[yv] = xv;
  return true;
}

bool unify_key(const KeyPat& x, const KeyPat& y, Bindings& b);

// Resolves meta and dual indirections as far as bindings allow.
KeyPat resolve_key(const KeyPat& k, const Bindings& b) {
  switch (k.kind) {
    case KeyPat::Kind::Meta: {
      auto it = b.keys.find(k.meta);
      if (it == b.keys.end()) return k;
      return resolve_key(it->second, b);
    }
    case KeyPat::Kind::Dual: {
      KeyPat inner = resolve_key(KeyPat::metavar(k.meta), b);
      if (inner.kind == KeyPat::Kind::Concrete)
        return KeyPat::of(dual_key(inner.concrete));
      return k;
    }
    case KeyPat::Kind::Public:
    case KeyPat::Kind::Private: {
      bool c;
      std::string owner;
      if (resolve_party(k.party, b, c, owner) && c)
        return KeyPat::of(k.kind == KeyPat::Kind::Public
                              ? KeyTerm::public_key(owner)
                              : KeyTerm::private_key(owner));
      return k;
    }
    case KeyPat::Kind::Concrete:
      return k;
  }
  return k;
}

bool unify_key(const KeyPat& xr, const KeyPat& yr, Bindings& b) {
  KeyPat x = resolve_key(xr, b);
  KeyPat y = resolve_key(yr, b);
  if (x.kind == KeyPat::Kind::Concrete && y.kind == KeyPat::Kind::Concrete)
    return x.concrete == y.concrete;
  if (x.kind == KeyPat::Kind::Meta) {
    if (y.kind == KeyPat::Kind::Meta && x.meta == y.meta) return true;
    b.keys[x.meta] = y;
    return true;
  }
  if (y.kind == KeyPat::Kind::Meta) {
    b.keys[y.meta] = x;
    return true;
  }
  if (x.kind == KeyPat::Kind::Dual) {
    // dual(?K) = concrete k binds ?K to dual(k); duality is involutive.
    if (y.kind == KeyPat::Kind::Concrete)
      return unify_key(KeyPat::metavar(x.meta), KeyPat::of(dual_key(y.concrete)), b);
    return false;
  }
  if (y.kind == KeyPat::Kind::Dual) return unify_key(y, x, b);
  if ((x.kind == KeyPat::Kind::Public && y.kind == KeyPat::Kind::Public) ||
      (x.kind == KeyPat::Kind::Private && y.kind == KeyPat::Kind::Private))
    return unify_party(x.party, y.party, b);
  if (x.kind == KeyPat::Kind::Public && y.kind == KeyPat::Kind::Concrete)
    return y.concrete.kind == KeyTerm::Kind::Public &&
           unify_party(x.party, PartyPat::concrete(y.concrete.owner), b);
  if (x.kind == KeyPat::Kind::Private && y.kind == KeyPat::Kind::Concrete)
    return y.concrete.kind == KeyTerm::Kind::Private &&
           unify_party(x.party, PartyPat::concrete(y.concrete.owner), b);
  if (y.kind == KeyPat::Kind::Public || y.kind == KeyPat::Kind::Private)
    return unify_key(y, x, b);
  return false;
}

MsgPat resolve_msg(const MsgPat& m, const Bindings& b) {
  if (m.kind() != MsgPat::Kind::Meta) return m;
  auto it = b.msgs.find(m.name());
  if (it == b.msgs.end()) return m;
  return resolve_msg(it->second, b);
}

bool unify_msg(const MsgPat& xr, const MsgPat& yr, Bindings& b) {
  MsgPat x = resolve_msg(xr, b);
  MsgPat y = resolve_msg(yr, b);
  if (x.kind() == MsgPat::Kind::Meta) {
    if (y.kind() == MsgPat::Kind::Meta && x.name() == y.name()) return true;
    b.msgs.insert_or_assign(x.name(), y);
    return true;
  }
  if (y.kind() == MsgPat::Kind::Meta) {
    b.msgs.insert_or_assign(y.name(), x);
    return true;
  }
  if (x.kind() != y.kind()) return false;
  switch (x.kind()) {
    case MsgPat::Kind::Atom: return x.name() == y.name();
    case MsgPat::Kind::Pair:
      return unify_msg(x.left(), y.left(), b) && unify_msg(x.right(), y.right(), b);
    case MsgPat::Kind::Enc:
      return unify_msg(x.body(), y.body(), b) && unify_key(x.key_pat(), y.key_pat(), b);
    case MsgPat::Kind::Hash: return unify_msg(x.body(), y.body(), b);
    case MsgPat::Kind::Key: return unify_key(x.key_pat(), y.key_pat(), b);
    case MsgPat::Kind::Meta: return false;  // unreachable
  }
  return false;
}

TimePat resolve_time(const TimePat& t, const Bindings& b) {
  if (t.kind != TimePat::Kind::Meta) return t;
  auto it = b.times.find(t.meta);
  if (it == b.times.end()) return t;
  return resolve_time(it->second, b);
}

bool unify_time(const TimePat& xr, const TimePat& yr, Bindings& b) {
  TimePat x = resolve_time(xr, b);
  TimePat y = resolve_time(yr, b);
  if (x.kind == TimePat::Kind::Any || y.kind == TimePat::Kind::Any) return true;
  if (x.kind == TimePat::Kind::Meta) {
    if (y.kind == TimePat::Kind::Meta && x.meta == y.meta) return true;
    b.times[x.meta] = y;
    return true;
  }
  if (y.kind == TimePat::Kind::Meta) {
    b.times[y.meta] = x;
    return true;
  }
  if (x.kind == TimePat::Kind::Concrete && y.kind == TimePat::Kind::Concrete)
    return *x.concrete == *y.concrete;
  auto as_max_children = [](const TimePat& t, TimePat& l, TimePat& r) {
    if (t.kind == TimePat::Kind::Max) {
      l = *t.a;
      r = *t.b;
      return true;
    }
    if (t.kind == TimePat::Kind::Concrete &&
        t.concrete->kind() == TimeExpr::Kind::Max) {
      l = TimePat::of(t.concrete->max_left());
      r = TimePat::of(t.concrete->max_right());
      return true;
    }
    return false;
  };
  TimePat xl, xrr, yl, yrr;
  if (as_max_children(x, xl, xrr) && as_max_children(y, yl, yrr))
    return unify_time(xl, yl, b) && unify_time(xrr, yrr, b);
  return false;
}

bool unify_formula(const FormulaPat& x, const FormulaPat& y, Bindings& b) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Formula::Kind::CanProve:
      return unify_party(x.agent, y.agent, b) && unify_formula(*x.body, *y.body, b);
    case Formula::Kind::Sent:
    case Formula::Kind::Possesses:
    case Formula::Kind::Received: {
      if (!unify_party(x.agent, y.agent, b)) return false;
      if (!unify_msg(*x.msg, *y.msg, b)) return false;
      if (x.at && y.at) return unify_time(*x.at, *y.at, b);
      return true;  // an absent time matches any time
    }
    case Formula::Kind::PubKeyOf:
      return unify_key(*x.key, *y.key, b) && unify_party(x.owner, y.owner, b);
    case Formula::Kind::SharedKeyOf: {
      if (!unify_key(*x.key, *y.key, b)) return false;
      Bindings saved = b;
      if (unify_party(x.a, y.a, b) && unify_party(x.b, y.b, b)) return true;
      b = saved;
      return unify_party(x.a, y.b, b) && unify_party(x.b, y.a, b);
    }
    case Formula::Kind::Conj: {
      if (x.conj.size() != y.conj.size()) return false;
      for (size_t i = 0; i < x.conj.size(); ++i)
        if (!unify_formula(x.conj[i], y.conj[i], b)) return false;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

std::optional<std::string> ground_party(const PartyPat& p, const Bindings& b) {
  bool c;
  std::string out;
  if (!resolve_party(p, b, c, out) || !c) return std::nullopt;
  return out;
}

std::optional<KeyTerm> ground_key(const KeyPat& k, const Bindings& b) {
  KeyPat r = resolve_key(k, b);
  if (r.kind == KeyPat::Kind::Concrete) return r.concrete;
  return std::nullopt;
}

std::optional<Msg> ground_msg(const MsgPat& m, const Bindings& b) {
  MsgPat r = resolve_msg(m, b);
  switch (r.kind()) {
    case MsgPat::Kind::Meta: return std::nullopt;
    case MsgPat::Kind::Atom: return Msg::atom(r.name());
    case MsgPat::Kind::Pair: {
      auto l = ground_msg(r.left(), b), rr = ground_msg(r.right(), b);
      if (!l || !rr) return std::nullopt;
      return Msg::pair(*l, *rr);
    }
    case MsgPat::Kind::Enc: {
      auto body = ground_msg(r.body(), b);
      auto key = ground_key(r.key_pat(), b);
      if (!body || !key) return std::nullopt;
      return Msg::enc(*body, *key);
    }
    case MsgPat::Kind::Hash: {
      auto body = ground_msg(r.body(), b);
      if (!body) return std::nullopt;
      return Msg::hash(*body);
    }
    case MsgPat::Kind::Key: {
      auto key = ground_key(r.key_pat(), b);
      if (!key) return std::nullopt;
      return Msg::key(*key);
    }
  }
  return std::nullopt;
}

std::optional<TimeExpr> ground_time(const TimePat& t, const Bindings& b) {
  TimePat r = resolve_time(t, b);
  switch (r.kind) {
    case TimePat::Kind::Concrete: return r.concrete;
    case TimePat::Kind::Max: {
      auto l = ground_time(*r.a, b), rr = ground_time(*r.b, b);
      if (!l || !rr) return std::nullopt;
      return TimeExpr::max_of(*l, *rr);
    }
    default: return std::nullopt;
  }
}

std::optional<Formula> ground_formula(const FormulaPat& f, const Bindings& b) {
  switch (f.kind) {
    case Formula::Kind::CanProve: {
      auto agent = ground_party(f.agent, b);
      auto body = ground_formula(*f.body, b);
      if (!agent || !body) return std::nullopt;
      return Formula::can_prove(*agent, *body);
    }
    case Formula::Kind::Sent:
    case Formula::Kind::Received: {
      auto agent = ground_party(f.agent, b);
      auto msg = f.msg ? ground_msg(*f.msg, b) : std::nullopt;
      auto at = f.at ? ground_time(*f.at, b) : std::nullopt;
      if (!agent || !msg || !at) return std::nullopt;
      return f.kind == Formula::Kind::Sent ? Formula::sent(*agent, *msg, *at)
                                           : Formula::received(*agent, *msg, *at);
    }
    case Formula::Kind::Possesses: {
      auto agent = ground_party(f.agent, b);
      auto msg = f.msg ? ground_msg(*f.msg, b) : std::nullopt;
      if (!agent || !msg) return std::nullopt;
      std::optional<TimeExpr> at;
      if (f.at) at = ground_time(*f.at, b);  // may stay absent
      return Formula::possesses(*agent, *msg, at);
    }
    case Formula::Kind::PubKeyOf: {
      auto key = ground_key(*f.key, b);
      auto owner = ground_party(f.owner, b);
      if (!key || !owner) return std::nullopt;
      return Formula::pubkey_of(*key, *owner);
    }
    case Formula::Kind::SharedKeyOf: {
      auto key = ground_key(*f.key, b);
      auto a = ground_party(f.a, b);
      auto bb = ground_party(f.b, b);
      if (!key || !a || !bb) return std::nullopt;
      return Formula::shared_key_of(*key, *a, *bb);
    }
    case Formula::Kind::Conj: {
      std::vector<Formula> parts;
      for (const auto& p : f.conj) {
        auto g = ground_formula(p, b);
        if (!g) return std::nullopt;
        parts.push_back(std::move(*g));
      }
      return Formula::conj(std::move(parts));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Canonical rendering for memoization and loop checks: bindings applied,
// unbound metavariables numbered by first occurrence.
// ---------------------------------------------------------------------------

struct Canon {
  const Bindings& b;
  std::map<std::string, int> seen;
  std::string norm(const std::string& meta) {
    auto [it, fresh] = seen.emplace(meta, (int)seen.size());
    (void)fresh;
    return "?" + std::to_string(it->second);
  }
  std::string party(const PartyPat& p) {
    bool c;
    std::string out;
    if (!resolve_party(p, b, c, out)) return "<cp:" + norm(p.name) + ">";
    return c ? out : norm(out);
  }
  std::string key(const KeyPat& k) {
    KeyPat r = resolve_key(k, b);
    switch (r.kind) {
      case KeyPat::Kind::Concrete: return r.concrete.to_string();
      case KeyPat::Kind::Meta: return norm(r.meta);
      case KeyPat::Kind::Dual: return "dual(" + norm(r.meta) + ")";
      case KeyPat::Kind::Public: return "pub(" + party(r.party) + ")";
      case KeyPat::Kind::Private: return "priv(" + party(r.party) + ")";
    }
    return "?";
  }
  std::string msg(const MsgPat& m) {
    MsgPat r = resolve_msg(m, b);
    switch (r.kind()) {
      case MsgPat::Kind::Meta: return norm(r.name());
      case MsgPat::Kind::Atom: return r.name();
      case MsgPat::Kind::Pair: return "pair(" + msg(r.left()) + "," + msg(r.right()) + ")";
      case MsgPat::Kind::Enc: return "enc(" + msg(r.body()) + "," + key(r.key_pat()) + ")";
      case MsgPat::Kind::Hash: return "hash(" + msg(r.body()) + ")";
      case MsgPat::Kind::Key: return "key(" + key(r.key_pat()) + ")";
    }
    return "?";
  }
  std::string time(const TimePat& t) {
    TimePat r = resolve_time(t, b);
    switch (r.kind) {
      case TimePat::Kind::Any: return "_";
      case TimePat::Kind::Meta: return norm(r.meta);
      case TimePat::Kind::Concrete: return r.concrete->to_string();
      case TimePat::Kind::Max: return "max(" + time(*r.a) + "," + time(*r.b) + ")";
      case TimePat::Kind::FreshUpper: return "[fresh<=" + time(*r.a) + "]";
    }
    return "?";
  }
  std::string formula(const FormulaPat& f) {
    switch (f.kind) {
      case Formula::Kind::CanProve:
        return party(f.agent) + ">(" + formula(*f.body) + ")";
      case Formula::Kind::Sent:
        return party(f.agent) + "->" + msg(*f.msg) + "@" + (f.at ? time(*f.at) : "_");
      case Formula::Kind::Possesses:
        return party(f.agent) + "ni" + msg(*f.msg) + "@" + (f.at ? time(*f.at) : "_");
      case Formula::Kind::Received:
        return party(f.agent) + "<-" + msg(*f.msg) + "@" + (f.at ? time(*f.at) : "_");
      case Formula::Kind::PubKeyOf:
        return "pk(" + key(*f.key) + "," + party(f.owner) + ")";
      case Formula::Kind::SharedKeyOf:
        return "sk(" + key(*f.key) + "," + party(f.a) + "," + party(f.b) + ")";
      case Formula::Kind::Conj: {
        std::string s = "and(";
        for (const auto& p : f.conj) s += formula(p) + ";";
        return s + ")";
      }
    }
    return "?";
  }
};

std::string canon_of(const FormulaPat& f, const Bindings& b) {
  Canon c{b, {}};
  return c.formula(f);
}

// ---------------------------------------------------------------------------
// Rule renaming and fresh-scope instantiation
// ---------------------------------------------------------------------------

std::string suffixed(const std::string& meta, int id) {
  return meta + "#" + std::to_string(id);
}

PartyPat rename_party(const PartyPat& p, int id) {
  if (p.kind == PartyPat::Kind::Concrete) return p;
  PartyPat out = p;
  out.name = suffixed(p.name, id);
  return out;
}
KeyPat rename_key(const KeyPat& k, int id) {
  KeyPat out = k;
  if (k.kind == KeyPat::Kind::Meta || k.kind == KeyPat::Kind::Dual)
    out.meta = suffixed(k.meta, id);
  if (k.kind == KeyPat::Kind::Public || k.kind == KeyPat::Kind::Private)
    out.party = rename_party(k.party, id);
  return out;
}
MsgPat rename_msg(const MsgPat& m, int id) {
  switch (m.kind()) {
    case MsgPat::Kind::Meta: return MsgPat::metavar(suffixed(m.name(), id));
    case MsgPat::Kind::Atom: return m;
    case MsgPat::Kind::Pair:
      return MsgPat::pair(rename_msg(m.left(), id), rename_msg(m.right(), id));
    case MsgPat::Kind::Enc:
      return MsgPat::enc(rename_msg(m.body(), id), rename_key(m.key_pat(), id));
    case MsgPat::Kind::Hash: return MsgPat::hash(rename_msg(m.body(), id));
    case MsgPat::Kind::Key: return MsgPat::key(rename_key(m.key_pat(), id));
  }
  return m;
}
TimePat rename_time(const TimePat& t, int id) {
  switch (t.kind) {
    case TimePat::Kind::Any:
    case TimePat::Kind::Concrete: return t;
    case TimePat::Kind::Meta: return TimePat::metavar(suffixed(t.meta, id));
    case TimePat::Kind::Max:
      return TimePat::max_of(rename_time(*t.a, id), rename_time(*t.b, id));
    case TimePat::Kind::FreshUpper:
      return TimePat::fresh_upper(t.meta, rename_time(*t.a, id));
  }
  return t;
}
FormulaPat rename_formula(const FormulaPat& f, int id) {
  FormulaPat out = f;
  out.agent = rename_party(f.agent, id);
  if (f.body) out.body = std::make_shared<FormulaPat>(rename_formula(*f.body, id));
  if (f.msg) out.msg = rename_msg(*f.msg, id);
  if (f.at) out.at = rename_time(*f.at, id);
  if (f.key) out.key = rename_key(*f.key, id);
  out.owner = rename_party(f.owner, id);
  out.a = rename_party(f.a, id);
  out.b = rename_party(f.b, id);
  out.conj.clear();
  for (const auto& p : f.conj) out.conj.push_back(rename_formula(p, id));
  return out;
}

// Replaces FreshUpper conclusion times with freshly named variables and
// records the pending upper-bound atoms.
FormulaPat mint_fresh(const FormulaPat& f, std::vector<std::pair<std::string, TimePat>>& pending,
                      int& fresh_counter) {
  FormulaPat out = f;
  if (f.body) out.body = std::make_shared<FormulaPat>(mint_fresh(*f.body, pending, fresh_counter));
  if (f.at && f.at->kind == TimePat::Kind::FreshUpper) {
    // Internal name, impossible to collide with source-level variables;
    // renamed to a readable letter once a proof is found.
    std::string name = "%T" + std::to_string(fresh_counter++);
    pending.emplace_back(name, *f.at->a);
    out.at = TimePat::of(TimeExpr::var(name));
  }
  out.conj.clear();
  for (const auto& p : f.conj) out.conj.push_back(mint_fresh(p, pending, fresh_counter));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Builtin rules
// ---------------------------------------------------------------------------

std::vector<Rule> builtin_rules() {
  auto P = [](const char* n) { return PartyPat::meta(n); };
  auto M = [](const char* n) { return MsgPat::metavar(n); };
  auto T = [](const char* n) { return TimePat::metavar(n); };
  using FP = FormulaPat;

  std::vector<Rule> rules;

  // A3: possession of B's signature plus belief in B's public key proves
  // that B sent the body at some earlier time.
  rules.push_back(Rule{
      "A3", "A3",
      {FP::possesses(P("?A"), MsgPat::enc(M("?m"), KeyPat::private_of(P("?B"))), T("?Tx")),
       FP::can_prove(P("?A"), FP::pubkey_of(KeyPat::public_of(P("?B")), P("?B")))},
      FP::can_prove(P("?A"),
                    FP::sent(P("?B"), M("?m"),
                             TimePat::fresh_upper("Ty", T("?Tx"))))});

  // A3s: shared-key variant; possession of a ciphertext under a key shared
  // with B proves B sent the body.
  rules.push_back(Rule{
      "A3s", "A3",
      {FP::possesses(P("?A"), MsgPat::enc(M("?m"), KeyPat::metavar("?K")), T("?Tx")),
       FP::can_prove(P("?A"), FP::shared_key_of(KeyPat::metavar("?K"), P("?A"), P("?B")))},
      FP::can_prove(P("?A"),
                    FP::sent(P("?B"), M("?m"),
                             TimePat::fresh_upper("Ty", T("?Tx"))))});

  // A4: provable sending of a ciphertext and of its key proves sending of
  // the plaintext at the later of the two times.
  rules.push_back(Rule{
      "A4", "A4",
      {FP::can_prove(P("?A"), FP::sent(P("?B"), MsgPat::enc(M("?m"), KeyPat::metavar("?K")), T("?Tx"))),
       FP::can_prove(P("?A"), FP::sent(P("?B"), MsgPat::key(KeyPat::dual_of("?K")), T("?Ty")))},
      FP::can_prove(P("?A"),
                    FP::sent(P("?B"), M("?m"),
                             TimePat::max_of(T("?Tx"), T("?Ty"))))});

  // A5: reception implies possession at the same time.
  rules.push_back(Rule{"A5", "A5",
                       {FP::received(P("?A"), M("?m"), T("?T"))},
                       FP::possesses(P("?A"), M("?m"), T("?T"))});

  // A6: a received ciphertext whose dual key is possessed counts as a
  // reception of the body.
  rules.push_back(Rule{
      "A6", "A6",
      {FP::received(P("?A"), MsgPat::enc(M("?m"), KeyPat::metavar("?K")), T("?T")),
       FP::possesses(P("?A"), MsgPat::key(KeyPat::dual_of("?K")))},
      FP::received(P("?A"), M("?m"), T("?T"))});

  // A6p: A6 lifted under another party's provable possession.
  rules.push_back(Rule{
      "A6p", "A6p",
      {FP::can_prove(P("?A"), FP::possesses(P("?B"), MsgPat::enc(M("?m"), KeyPat::metavar("?K")), T("?Tx"))),
       FP::can_prove(P("?A"), FP::possesses(P("?B"), MsgPat::key(KeyPat::dual_of("?K")), T("?Ty")))},
      FP::can_prove(P("?A"),
                    FP::possesses(P("?B"), M("?m"),
                                  TimePat::max_of(T("?Tx"), T("?Ty"))))});

  // Implication (1) under CanProve: sending a pair sends each component.
  rules.push_back(Rule{
      "PairSentL", "PairSent",
      {FP::can_prove(P("?A"), FP::sent(P("?B"), MsgPat::pair(M("?m"), M("?n")), T("?T")))},
      FP::can_prove(P("?A"), FP::sent(P("?B"), M("?m"), T("?T")))});
  rules.push_back(Rule{
      "PairSentR", "PairSent",
      {FP::can_prove(P("?A"), FP::sent(P("?B"), MsgPat::pair(M("?m"), M("?n")), T("?T")))},
      FP::can_prove(P("?A"), FP::sent(P("?B"), M("?n"), T("?T")))});

  // Implication (2) under CanProve.
  rules.push_back(Rule{
      "PairRecvL", "PairRecv",
      {FP::can_prove(P("?A"), FP::received(P("?B"), MsgPat::pair(M("?m"), M("?n")), T("?T")))},
      FP::can_prove(P("?A"), FP::received(P("?B"), M("?m"), T("?T")))});
  rules.push_back(Rule{
      "PairRecvR", "PairRecv",
      {FP::can_prove(P("?A"), FP::received(P("?B"), MsgPat::pair(M("?m"), M("?n")), T("?T")))},
      FP::can_prove(P("?A"), FP::received(P("?B"), M("?n"), T("?T")))});

  // Plain-fact forms of implications (1) and (2).
  rules.push_back(Rule{
      "SentPartL", "PairSent",
      {FP::sent(P("?A"), MsgPat::pair(M("?m"), M("?n")), T("?T"))},
      FP::sent(P("?A"), M("?m"), T("?T"))});
  rules.push_back(Rule{
      "SentPartR", "PairSent",
      {FP::sent(P("?A"), MsgPat::pair(M("?m"), M("?n")), T("?T"))},
      FP::sent(P("?A"), M("?n"), T("?T"))});
  rules.push_back(Rule{
      "RecvPartL", "PairRecv",
      {FP::received(P("?A"), MsgPat::pair(M("?m"), M("?n")), T("?T"))},
      FP::received(P("?A"), M("?m"), T("?T"))});
  rules.push_back(Rule{
      "RecvPartR", "PairRecv",
      {FP::received(P("?A"), MsgPat::pair(M("?m"), M("?n")), T("?T"))},
      FP::received(P("?A"), M("?n"), T("?T"))});

  return rules;
}

KnowledgeBase KnowledgeBase::with_fact(Formula f) const {
  KnowledgeBase out = *this;
  out.facts.push_back(std::move(f));
  return out;
}

namespace {

void collect_metas(const PartyPat& p, std::set<std::string>& out, bool conclusion,
                   std::set<std::string>* counterpart_args) {
  if (p.kind == PartyPat::Kind::Meta) out.insert(p.name);
  if (p.kind == PartyPat::Kind::Counterpart) {
    if (conclusion && counterpart_args) counterpart_args->insert(p.name);
    else out.insert(p.name);
  }
}
void collect_metas(const KeyPat& k, std::set<std::string>& out, bool conclusion,
                   std::set<std::string>* cp) {
  if (k.kind == KeyPat::Kind::Meta || k.kind == KeyPat::Kind::Dual) out.insert(k.meta);
  if (k.kind == KeyPat::Kind::Public || k.kind == KeyPat::Kind::Private)
    collect_metas(k.party, out, conclusion, cp);
}
void collect_metas(const MsgPat& m, std::set<std::string>& out, bool conclusion,
                   std::set<std::string>* cp) {
  switch (m.kind()) {
    case MsgPat::Kind::Meta: out.insert(m.name()); return;
    case MsgPat::Kind::Atom: return;
    case MsgPat::Kind::Pair:
      collect_metas(m.left(), out, conclusion, cp);
      collect_metas(m.right(), out, conclusion, cp);
      return;
    case MsgPat::Kind::Enc:
      collect_metas(m.body(), out, conclusion, cp);
      collect_metas(m.key_pat(), out, conclusion, cp);
      return;
    case MsgPat::Kind::Hash: collect_metas(m.body(), out, conclusion, cp); return;
    case MsgPat::Kind::Key: collect_metas(m.key_pat(), out, conclusion, cp); return;
  }
}
void collect_metas(const TimePat& t, std::set<std::string>& out, bool conclusion,
                   std::set<std::string>* cp) {
  switch (t.kind) {
    case TimePat::Kind::Meta: out.insert(t.meta); return;
    case TimePat::Kind::Max:
      collect_metas(*t.a, out, conclusion, cp);
      collect_metas(*t.b, out, conclusion, cp);
      return;
    case TimePat::Kind::FreshUpper:
      // The fresh variable is explicitly scoped; only its bound must be
      // reachable.
      collect_metas(*t.a, out, conclusion, cp);
      return;
    default: return;
  }
}
void collect_metas(const FormulaPat& f, std::set<std::string>& out, bool conclusion,
                   std::set<std::string>* cp) {
  collect_metas(f.agent, out, conclusion, cp);
  if (f.body) collect_metas(*f.body, out, conclusion, cp);
  if (f.msg) collect_metas(*f.msg, out, conclusion, cp);
  if (f.at) collect_metas(*f.at, out, conclusion, cp);
  if (f.key) collect_metas(*f.key, out, conclusion, cp);
  collect_metas(f.owner, out, conclusion, cp);
  collect_metas(f.a, out, conclusion, cp);
  collect_metas(f.b, out, conclusion, cp);
  for (const auto& p : f.conj) collect_metas(p, out, conclusion, cp);
}

}  // namespace

KnowledgeBase register_assumption(const KnowledgeBase& kb, const Rule& rule) {
  std::set<std::string> premise_metas, conclusion_metas, counterpart_args;
  for (const auto& p : rule.premises) collect_metas(p, premise_metas, false, nullptr);
  collect_metas(rule.conclusion, conclusion_metas, true, &counterpart_args);
  for (const auto& m : conclusion_metas)
    if (!premise_metas.count(m))
      throw std::invalid_argument("E_UNBOUND_METAVAR: " + m + " in conclusion of " +
                                  rule.name);
  for (const auto& m : counterpart_args)
    if (!premise_metas.count(m))
      throw std::invalid_argument("E_UNBOUND_METAVAR: counterpart argument " + m +
                                  " in conclusion of " + rule.name);
  KnowledgeBase out = kb;
  out.rules.push_back(rule);
  return out;
}

// ---------------------------------------------------------------------------
// Prover
// ---------------------------------------------------------------------------

std::multiset<std::string> Derivation::rule_families() const {
  std::multiset<std::string> out;
  if (rule != "fact") out.insert(family);
  for (const auto& c : children)
    for (const auto& f : c.rule_families()) out.insert(f);
  return out;
}

std::string Derivation::to_string(int indent) const {
  std::string pad(indent * 2, ' ');
  std::string s = pad + "[" + rule + "] " + goal.to_string();
  for (const auto& c : emitted) s += "  {" + c.to_string() + "}";
  s += "\n";
  for (const auto& c : children) s += c.to_string(indent + 1);
  return s;
}

namespace {

void collect_atoms(const Derivation& d, std::vector<Constraint>& out) {
  for (const auto& c : d.emitted) out.push_back(c);
  for (const auto& c : d.children) collect_atoms(c, out);
}

bool system_satisfiable(const ConstraintSystem& sys) {
  for (const auto& branch : eliminate_max(sys))
    if (is_satisfiable(branch)) return true;
  return false;
}

// Size of the smallest ground instance of a message pattern (metas count 1).
size_t pat_min_size(const MsgPat& m0, const Bindings* b) {
  MsgPat m = b ? resolve_msg(m0, *b) : m0;
  switch (m.kind()) {
    case MsgPat::Kind::Meta:
    case MsgPat::Kind::Atom:
    case MsgPat::Kind::Key:
      return 1;
    case MsgPat::Kind::Pair:
      return 1 + pat_min_size(m.left(), b) + pat_min_size(m.right(), b);
    case MsgPat::Kind::Enc:
    case MsgPat::Kind::Hash:
      return 1 + pat_min_size(m.body(), b);
  }
  return 1;
}

// The message pattern of a goal, looking through CanProve wrappers.
const MsgPat* msg_of(const FormulaPat& f) {
  if (f.kind == Formula::Kind::CanProve) return msg_of(*f.body);
  return f.msg ? &*f.msg : nullptr;
}

size_t msg_size_of(const Formula& f) {
  if (f.kind() == Formula::Kind::CanProve) return msg_size_of(f.body());
  switch (f.kind()) {
    case Formula::Kind::Sent:
    case Formula::Kind::Possesses:
    case Formula::Kind::Received:
      return f.msg().size();
    default:
      return 0;
  }
}

struct Searcher {
  const KnowledgeBase& kb;
  std::vector<FormulaPat> fact_pats;
  int fresh_counter = 0;
  int rename_counter = 0;
  bool depth_exhausted = false;
  std::set<std::string> open;
  std::map<std::string, int> failed;
  size_t max_fact_msg = 0;
  bool prune_ok = true;

  using Cont = std::function<bool(const Derivation&, Bindings&)>;

  explicit Searcher(const KnowledgeBase& kb_) : kb(kb_) {
    for (const auto& f : kb.facts) {
      fact_pats.push_back(FormulaPat::of(f));
      max_fact_msg = std::max(max_fact_msg, msg_size_of(f));
    }
    // Goal sizes only grow along backward chaining when every rule whose
    // conclusion mentions a message has a premise at least as large; then a
    // goal bigger than every fact can never close and may be cut early.
    for (const auto& r : kb.rules) {
      const MsgPat* cm = msg_of(r.conclusion);
      if (!cm) continue;
      size_t cs = pat_min_size(*cm, nullptr);
      bool has_msg_premise = false;
      for (const auto& p : r.premises) {
        const MsgPat* pm = msg_of(p);
        if (!pm) continue;
        has_msg_premise = true;
        if (pat_min_size(*pm, nullptr) < cs) prune_ok = false;
      }
      if (!has_msg_premise) prune_ok = false;
    }
  }

  bool solve(const FormulaPat& goal, const Bindings& b0, int depth, const Cont& k) {
    std::string canon = canon_of(goal, b0);
    if (open.count(canon)) return false;
    if (auto it = failed.find(canon); it != failed.end() && it->second >= depth)
      return false;

    open.insert(canon);
    bool success = false;
    bool produced = false;

    // Facts first: leaves cost no depth.
    for (size_t i = 0; i < fact_pats.size() && !success; ++i) {
      Bindings b = b0;
      if (!unify_formula(goal, fact_pats[i], b)) continue;
      produced = true;
      Derivation leaf;
      leaf.goal = kb.facts[i];
      leaf.rule = "fact";
      leaf.family = "fact";
      if (k(leaf, b)) success = true;
    }

    if (!success && depth <= 0) {
      depth_exhausted = true;
      open.erase(canon);
      return false;
    }

    // Dead-end cut: no fact is large enough to ever close this goal.
    if (!success && prune_ok) {
      if (const MsgPat* gm = msg_of(goal); gm && pat_min_size(*gm, &b0) > max_fact_msg) {
        open.erase(canon);
        if (!produced) {
          auto [it, inserted] = failed.emplace(canon, depth);
          if (!inserted && it->second < depth) it->second = depth;
        }
        return false;
      }
    }

    // A1: conjunction introduction under CanProve.
    if (!success && goal.kind == Formula::Kind::CanProve &&
        goal.body->kind == Formula::Kind::Conj) {
      produced = true;  // conservative for memoization
      std::vector<Derivation> kids;
      std::function<bool(size_t, Bindings)> step = [&](size_t idx, Bindings b) {
        if (idx == goal.body->conj.size()) {
          Bindings bf = b;
          auto g = ground_formula(goal, bf);
          if (!g) return false;
          Derivation node;
          node.goal = *g;
          node.rule = "A1";
          node.family = "A1";
          node.children = kids;
          return k(node, bf);
        }
        FormulaPat sub = FormulaPat::can_prove(goal.agent, goal.body->conj[idx]);
        return solve(sub, b, depth - 1, [&](const Derivation& d, Bindings& b2) {
          kids.push_back(d);
          bool r = step(idx + 1, b2);
          if (!r) kids.pop_back();
          return r;
        });
      };
      if (step(0, b0)) success = true;
    }

    // Rule applications.
    if (!success) {
      for (const auto& rule : kb.rules) {
        if (success) break;
        int id = rename_counter++;
        std::vector<std::pair<std::string, TimePat>> pending;
        int fresh_save = fresh_counter;
        FormulaPat concl =
            mint_fresh(rename_formula(rule.conclusion, id), pending, fresh_counter);
        Bindings b = b0;
        if (!unify_formula(goal, concl, b)) {
          fresh_counter = fresh_save;
          continue;
        }
        produced = true;
        std::vector<Derivation> kids;
        std::function<bool(size_t, Bindings)> step = [&](size_t idx, Bindings bb) {
          if (idx == rule.premises.size()) {
            Bindings bf = bb;
            std::vector<Constraint> emitted;
            for (const auto& [var, boundpat] : pending) {
              auto bound = ground_time(boundpat, bf);
              if (!bound) return false;
              emitted.push_back(make_le(TimeExpr::var(var), *bound));
            }
            auto g = ground_formula(concl, bf);
            if (!g) return false;
            Derivation node;
            node.goal = *g;
            node.rule = rule.name;
            node.family = rule.family;
            node.children = kids;
            node.emitted = std::move(emitted);
            return k(node, bf);
          }
          FormulaPat prem = rename_formula(rule.premises[idx], id);
          return solve(prem, bb, depth - 1, [&](const Derivation& d, Bindings& b2) {
            kids.push_back(d);
            bool r = step(idx + 1, b2);
            if (!r) kids.pop_back();
            return r;
          });
        };
        if (step(0, b)) success = true;
      }
    }

    // Sent subsumes Possesses inside CanProve: a sender possesses what it
    // sends (rule 1 of the possession semantics).
    if (!success && goal.kind == Formula::Kind::CanProve &&
        goal.body->kind == Formula::Kind::Possesses) {
      FormulaPat sent_body = *goal.body;
      sent_body.kind = Formula::Kind::Sent;
      FormulaPat sent_goal = FormulaPat::can_prove(goal.agent, sent_body);
      produced = true;
      if (solve(sent_goal, b0, depth, k)) success = true;
    }

    open.erase(canon);
    if (!success && !produced) {
      auto [it, inserted] = failed.emplace(canon, depth);
      if (!inserted && it->second < depth) it->second = depth;
    }
    return success;
  }
};

}  // namespace

namespace {

TimeExpr rename_times(const TimeExpr& e, const std::map<std::string, std::string>& m) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const:
      return e;
    case TimeExpr::Kind::Var: {
      auto it = m.find(e.var_name());
      return it == m.end() ? e : TimeExpr::var(it->second);
    }
    case TimeExpr::Kind::Plus:
      return TimeExpr::plus(rename_times(e.base(), m), e.delays(), e.offset());
    case TimeExpr::Kind::Max:
      return TimeExpr::max_of(rename_times(e.max_left(), m),
                              rename_times(e.max_right(), m));
  }
  return e;
}

Formula rename_times(const Formula& f, const std::map<std::string, std::string>& m) {
  switch (f.kind()) {
    case Formula::Kind::CanProve:
      return Formula::can_prove(f.agent(), rename_times(f.body(), m));
    case Formula::Kind::Sent:
      return Formula::sent(f.agent(), f.msg(), rename_times(*f.at(), m));
    case Formula::Kind::Received:
      return Formula::received(f.agent(), f.msg(), rename_times(*f.at(), m));
    case Formula::Kind::Possesses:
      return Formula::possesses(f.agent(), f.msg(),
                                f.at() ? std::optional<TimeExpr>(
                                             rename_times(*f.at(), m))
                                       : std::nullopt);
    case Formula::Kind::Conj: {
      std::vector<Formula> parts;
      for (const auto& p : f.parts()) parts.push_back(rename_times(p, m));
      return Formula::conj(std::move(parts));
    }
    default:
      return f;
  }
}

bool is_minted(const std::string& n) { return n.rfind("%T", 0) == 0; }

void appearance_order(const TimeExpr& e,
                      std::vector<std::string>& order, std::set<std::string>& seen) {
  switch (e.kind()) {
    case TimeExpr::Kind::Var:
      if (is_minted(e.var_name()) && seen.insert(e.var_name()).second)
        order.push_back(e.var_name());
      return;
    case TimeExpr::Kind::Plus:
      appearance_order(e.base(), order, seen);
      return;
    case TimeExpr::Kind::Max:
      appearance_order(e.max_left(), order, seen);
      appearance_order(e.max_right(), order, seen);
      return;
    default:
      return;
  }
}

void appearance_order(const Derivation& d,
                      std::vector<std::string>& order, std::set<std::string>& seen) {
  std::function<void(const Formula&)> walk_formula = [&](const Formula& f) {
    if (f.kind() == Formula::Kind::CanProve) return walk_formula(f.body());
    if (f.kind() == Formula::Kind::Conj)
      for (const auto& p : f.parts()) walk_formula(p);
    if ((f.kind() == Formula::Kind::Sent || f.kind() == Formula::Kind::Possesses ||
         f.kind() == Formula::Kind::Received) &&
        f.at())
      appearance_order(*f.at(), order, seen);
  };
  walk_formula(d.goal);
  for (const auto& c : d.emitted) {
    appearance_order(c.lhs, order, seen);
    appearance_order(c.rhs, order, seen);
  }
  for (const auto& c : d.children) appearance_order(c, order, seen);
}

Derivation rename_times(const Derivation& d, const std::map<std::string, std::string>& m) {
  Derivation out = d;
  out.goal = rename_times(d.goal, m);
  for (auto& c : out.emitted)
    c = Constraint{c.rel, rename_times(c.lhs, m), rename_times(c.rhs, m)};
  for (auto& c : out.children) c = rename_times(c, m);
  return out;
}

}  // namespace

std::optional<ProveResult> prove(const KnowledgeBase& kb, const FormulaPat& goal,
                                 const ConstraintSystem& sys, int depth_limit,
                                 bool* depth_exhausted) {
  Searcher s(kb);
  Bindings b0;
  b0.counterparts = &kb.counterparts;
  std::optional<ProveResult> result;
  s.solve(goal, b0, depth_limit, [&](const Derivation& d, Bindings&) {
    ConstraintSystem whole = sys;
    collect_atoms(d, whole.atoms);
    if (!system_satisfiable(whole)) return false;
    result = ProveResult{d, whole};
    return true;
  });
  if (depth_exhausted) *depth_exhausted = s.depth_exhausted;
  if (result) {
    // Pretty names by order of appearance in the finished proof.
    std::vector<std::string> order;
    std::set<std::string> seen;
    appearance_order(result->derivation, order, seen);
    if (!order.empty()) {
      std::map<std::string, std::string> ren;
      static const char* letters = "abcdfghijklmnopqrsuvwxyz";
      for (size_t i = 0; i < order.size(); ++i) {
        std::string name = "T";
        name += letters[i % 24];
        if (i >= 24) name += std::to_string(i / 24);
        ren[order[i]] = name;
      }
      result->derivation = rename_times(result->derivation, ren);
      ConstraintSystem whole = sys;
      collect_atoms(result->derivation, whole.atoms);
      result->system = whole;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

// Rewrites FreshUpper conclusion times into plain metavariables so replay can
// bind them from the node's recorded goal.
FormulaPat defrost(const FormulaPat& f, std::vector<std::pair<std::string, TimePat>>& scoped) {
  FormulaPat out = f;
  if (f.body) out.body = std::make_shared<FormulaPat>(defrost(*f.body, scoped));
  if (f.at && f.at->kind == TimePat::Kind::FreshUpper) {
    std::string meta = "?fresh" + std::to_string(scoped.size());
    scoped.emplace_back(meta, *f.at->a);
    out.at = TimePat::metavar(meta);
  }
  out.conj.clear();
  for (const auto& p : f.conj) out.conj.push_back(defrost(p, scoped));
  return out;
}

bool replay_node(const Derivation& d, const KnowledgeBase& kb) {
  if (d.rule == "fact") {
    if (!d.children.empty() || !d.emitted.empty()) return false;
    for (const auto& f : kb.facts)
      if (f == d.goal) return true;
    return false;
  }

  if (d.rule == "A1") {
    if (d.goal.kind() != Formula::Kind::CanProve ||
        d.goal.body().kind() != Formula::Kind::Conj)
      return false;
    const auto& parts = d.goal.body().parts();
    if (parts.size() != d.children.size()) return false;
    for (size_t i = 0; i < parts.size(); ++i)
      if (!(d.children[i].goal == Formula::can_prove(d.goal.agent(), parts[i])))
        return false;
    return d.emitted.empty();
  }

  const Rule* rule = nullptr;
  for (const auto& r : kb.rules)
    if (r.name == d.rule) rule = &r;
  if (!rule) return false;
  if (rule->premises.size() != d.children.size()) return false;

  Bindings b;
  b.counterparts = &kb.counterparts;
  std::vector<std::pair<std::string, TimePat>> scoped;
  FormulaPat concl = defrost(rule->conclusion, scoped);
  if (!unify_formula(concl, FormulaPat::of(d.goal), b)) return false;

  for (size_t i = 0; i < rule->premises.size(); ++i) {
    FormulaPat prem = rule->premises[i];
    FormulaPat child = FormulaPat::of(d.children[i].goal);
    Bindings saved = b;
    if (unify_formula(prem, child, b)) continue;
    b = saved;
    // Subsumption: a proven Sent satisfies a Possesses premise.
    if (prem.kind == Formula::Kind::CanProve &&
        prem.body->kind == Formula::Kind::Possesses &&
        child.kind == Formula::Kind::CanProve &&
        child.body->kind == Formula::Kind::Sent) {
      FormulaPat relaxed = prem;
      auto body = *prem.body;
      body.kind = Formula::Kind::Sent;
      relaxed.body = std::make_shared<FormulaPat>(body);
      if (unify_formula(relaxed, child, b)) continue;
    }
    return false;
  }

  // Emitted atoms must be exactly the scoped upper bounds of the conclusion.
  if (d.emitted.size() != scoped.size()) return false;
  for (size_t i = 0; i < scoped.size(); ++i) {
    auto var = ground_time(TimePat::metavar(scoped[i].first), b);
    auto bound = ground_time(scoped[i].second, b);
    if (!var || !bound) return false;
    if (!(d.emitted[i] == make_le(*var, *bound))) return false;
  }

  // The recorded goal must be exactly the instantiated conclusion.
  auto g = ground_formula(concl, b);
  return g && *g == d.goal;
}

bool replay_tree(const Derivation& d, const KnowledgeBase& kb) {
  if (!replay_node(d, kb)) return false;
  for (const auto& c : d.children)
    if (!replay_tree(c, kb)) return false;
  return true;
}

}  // namespace

bool replay(const Derivation& d, const KnowledgeBase& kb) {
  if (!replay_tree(d, kb)) return false;
  ConstraintSystem sys;
  collect_atoms(d, sys.atoms);
  return system_satisfiable(sys);
}

std::string FormulaPat::to_string() const {
  Bindings b;
  Canon c{b, {}};
  return c.formula(*this);
}

}  // namespace paylogic

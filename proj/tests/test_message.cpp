#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paylogic/message.hpp"
#include "paylogic/oracle.hpp"

#include <random>
#include <vector>

using namespace paylogic;

TEST_CASE("key terms: construction, ordering, duals") {
  KeyTerm pub = KeyTerm::public_key("C");
  KeyTerm priv = KeyTerm::private_key("C");
  KeyTerm shared = KeyTerm::shared_key("Kcm", "C", "M");
  KeyTerm shared_swapped = KeyTerm::shared_key("Kcm", "M", "C");
  KeyTerm sess = KeyTerm::session_key("k");

  CHECK(shared == shared_swapped);  // endpoints are unordered
  CHECK(pub != priv);

  CHECK(dual_key(pub) == priv);
  CHECK(dual_key(priv) == pub);
  CHECK(dual_key(shared) == shared);
  CHECK(dual_key(sess) == sess);

  // Involution on every kind.
  for (const KeyTerm& k : {pub, priv, shared, sess}) {
    CHECK(dual_key(dual_key(k)) == k);
  }
}

TEST_CASE("message terms: structure, equality, rendering") {
  Msg a = Msg::atom("Goods");
  Msg b = Msg::atom("EPOID");
  Msg p = Msg::pair(a, b);
  Msg e = Msg::enc(a, KeyTerm::session_key("k"));
  Msg h = Msg::hash(e);
  Msg sig = Msg::enc(h, KeyTerm::private_key("C"));

  CHECK(p.kind() == Msg::Kind::Pair);
  CHECK(p.left() == a);
  CHECK(p.right() == b);
  CHECK(e.body() == a);
  CHECK(e.key_term() == KeyTerm::session_key("k"));
  CHECK(h.body() == e);

  CHECK(p == Msg::pair(Msg::atom("Goods"), Msg::atom("EPOID")));
  CHECK(p != Msg::pair(b, a));

  CHECK(a.to_string() == "Goods");
  CHECK(p.to_string() == "pair(Goods, EPOID)");
  CHECK(e.to_string() == "enc(Goods, k)");
  CHECK(h.to_string() == "hash(enc(Goods, k))");
  // Private-key encryption renders as a signature.
  CHECK(sig.to_string() == "sign(hash(enc(Goods, k)), C)");

  CHECK(a.size() == 1);
  CHECK(p.size() == 3);
  CHECK(sig.size() == 4);
  CHECK(a.depth() == 1);
  CHECK(sig.depth() == 4);
}

TEST_CASE("immediate parts: pairs split, everything else opaque") {
  Msg a = Msg::atom("a");
  Msg b = Msg::atom("b");
  Msg p = Msg::pair(a, Msg::pair(b, a));

  MsgSet parts = immediate_parts(p);
  CHECK(parts.count(a) == 1);
  CHECK(parts.count(Msg::pair(b, a)) == 1);
  CHECK(parts.size() == 2);

  CHECK(immediate_parts(Msg::enc(a, KeyTerm::session_key("k"))).empty());
  CHECK(immediate_parts(Msg::hash(a)).empty());
  CHECK(immediate_parts(a).empty());
}

TEST_CASE("closure: decryption requires the dual key") {
  KeyTerm k = KeyTerm::session_key("k");
  KeyTerm kcm = KeyTerm::shared_key("Kcm", "C", "M");
  Msg goods = Msg::atom("Goods");
  Msg inner = Msg::enc(goods, k);

  SUBCASE("no key, no decryption") {
    MsgSet s{inner};
    MsgSet c = analyze_closure(s);
    CHECK(c.count(goods) == 0);
    CHECK(c == s);
  }

  SUBCASE("symmetric key opens its own encryptions") {
    MsgSet s{inner, Msg::key(k)};
    MsgSet c = analyze_closure(s);
    CHECK(c.count(goods) == 1);
  }

  SUBCASE("key delivered inside the same message still opens it") {
    // pair(enc(Goods,k), enc(key(k), Kcm)) with Kcm possessed: the closure
    // must split the pair, recover k, then decrypt the goods.
    MsgSet s{Msg::pair(inner, Msg::enc(Msg::key(k), kcm)), Msg::key(kcm)};
    MsgSet c = analyze_closure(s);
    CHECK(c.count(goods) == 1);
    CHECK(c.count(Msg::key(k)) == 1);
  }

  SUBCASE("public key opens signatures, private key opens public encryptions") {
    Msg sig = Msg::enc(goods, KeyTerm::private_key("N"));
    MsgSet c = analyze_closure({sig, Msg::key(KeyTerm::public_key("N"))});
    CHECK(c.count(goods) == 1);

    Msg sealed = Msg::enc(goods, KeyTerm::public_key("C"));
    MsgSet c2 = analyze_closure({sealed, Msg::key(KeyTerm::private_key("C"))});
    CHECK(c2.count(goods) == 1);
    // The wrong half does nothing.
    MsgSet c3 = analyze_closure({sealed, Msg::key(KeyTerm::public_key("C"))});
    CHECK(c3.count(goods) == 0);
  }

  SUBCASE("hashes are opaque") {
    MsgSet c = analyze_closure({Msg::hash(goods), Msg::key(k)});
    CHECK(c.count(goods) == 0);
  }
}

TEST_CASE("derivability: synthesis and unforgeability") {
  KeyTerm k = KeyTerm::session_key("k");
  KeyTerm priv_c = KeyTerm::private_key("C");
  Msg goods = Msg::atom("Goods");
  Msg epoid = Msg::atom("EPOID");

  MsgSet s{goods, epoid, Msg::key(k)};

  CHECK(can_derive(s, goods));
  CHECK(can_derive(s, Msg::pair(goods, epoid)));
  CHECK(can_derive(s, Msg::hash(goods)));
  CHECK(can_derive(s, Msg::enc(Msg::pair(goods, epoid), k)));
  CHECK(can_derive(s, Msg::enc(Msg::hash(goods), k)));

  // Atoms and keys are never synthesized out of thin air.
  CHECK_FALSE(can_derive(s, Msg::atom("Receipt")));
  CHECK_FALSE(can_derive(s, Msg::key(priv_c)));
  // Signatures are unforgeable without the private key...
  CHECK_FALSE(can_derive(s, Msg::enc(goods, priv_c)));
  // ...but constructible with it.
  MsgSet s2 = s;
  s2.insert(Msg::key(priv_c));
  CHECK(can_derive(s2, Msg::enc(goods, priv_c)));

  // Derivable through analysis first: recover the body, re-encrypt.
  KeyTerm kcm = KeyTerm::shared_key("Kcm", "C", "M");
  MsgSet s3{Msg::enc(goods, k), Msg::key(k), Msg::key(kcm)};
  CHECK(can_derive(s3, Msg::enc(goods, kcm)));
}

namespace {

// Random message over a small vocabulary; used for the oracle cross-check.
Msg random_msg(std::mt19937& rng, int depth) {
  static const std::vector<KeyTerm> keys = {
      KeyTerm::session_key("k1"), KeyTerm::session_key("k2"),
      KeyTerm::shared_key("ks", "A", "B"), KeyTerm::public_key("A"),
      KeyTerm::private_key("A"),
  };
  std::uniform_int_distribution<int> pick(0, depth <= 1 ? 1 : 5);
  switch (pick(rng)) {
    case 0:
      return Msg::atom("a" + std::to_string(rng() % 3));
    case 1:
      return Msg::key(keys[rng() % keys.size()]);
    case 2:
      return Msg::pair(random_msg(rng, depth - 1), random_msg(rng, depth - 1));
    case 3:
    case 4:
      return Msg::enc(random_msg(rng, depth - 1), keys[rng() % keys.size()]);
    default:
      return Msg::hash(random_msg(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("closure and derivability agree with the brute-force oracle") {
  std::mt19937 rng(20260826);
  for (int trial = 0; trial < 200; ++trial) {
    MsgSet s;
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) s.insert(random_msg(rng, 1 + rng() % 4));

    MsgSet fast = analyze_closure(s);
    MsgSet slow = bf_closure(s);
    REQUIRE(fast == slow);

    // Idempotence of the closure.
    CHECK(analyze_closure(fast) == fast);

    // Derivability must agree too, probed with both members and fresh terms.
    for (const Msg& m : fast) {
      CHECK(can_derive(s, m) == bf_derivable(s, m));
      CHECK(can_derive(s, m));
    }
    for (int probe = 0; probe < 4; ++probe) {
      Msg target = random_msg(rng, 1 + rng() % 3);
      CHECK(can_derive(s, target) == bf_derivable(s, target));
    }
  }
}

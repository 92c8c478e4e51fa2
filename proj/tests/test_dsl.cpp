#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paylogic/dsl.hpp"

#include "generators.hpp"

#include <fstream>
#include <random>
#include <sstream>

using namespace paylogic;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fixture(const std::string& name) {
  return std::string(PAYLOGIC_FIXTURE_DIR) + "/" + name;
}

ParseResult parse_ok(const std::string& text) {
  ParseResult r = parse_document(text);
  for (const auto& e : r.errors) INFO(e.to_string());
  REQUIRE(r.errors.empty());
  REQUIRE(r.doc.has_value());
  return r;
}

const char* kMinimal =
    "protocol P;\n"
    "party A;\n"
    "party B;\n"
    "sessionkey k;\n"
    "knows A: key(k);\n"
    "knows B: key(k);\n"
    "1. A -> B : enc(Na, k) @ T1;\n"
    "fresh Na at step 1;\n";

}  // namespace

TEST_CASE("minimal document parses into the expected structure") {
  auto r = parse_ok(kMinimal);
  const Document& d = *r.doc;
  CHECK(d.protocol.name == "P");
  REQUIRE(d.protocol.parties.size() == 2);
  CHECK_FALSE(d.protocol.parties[0].is_ttp);
  REQUIRE(d.protocol.steps.size() == 1);
  CHECK(d.protocol.steps[0].from == "A");
  CHECK(d.protocol.steps[0].to == "B");
  CHECK(d.protocol.steps[0].at == "T1");
  CHECK(d.protocol.steps[0].msg ==
        Msg::enc(Msg::atom("Na"), KeyTerm::session_key("k")));
  REQUIRE(d.protocol.fresh_decls.count(1) == 1);
  CHECK(d.protocol.fresh_decls.at(1).count(Msg::atom("Na")) == 1);
  CHECK(d.key_aliases.at("k") == KeyTerm::session_key("k"));
}

TEST_CASE("statement forms: keys, ttp, timeout, constraint, counterpart") {
  auto r = parse_ok(
      "protocol Q;\n"
      "party A;\nparty B;\nttp N;\n"
      "pubkey Kn of N;\n"
      "sharedkey Kab between A and B;\n"
      "knows A: key(Kab);\nknows N: priv(N);\n"
      "1. A -> B : Na @ T1;\n"
      "fresh Na at step 1;\n"
      "2. B -> A : hash(Na) @ T2;\n"
      "timeout A waits tA after step 1 expecting step 2;\n"
      "constraint t1 <= tA;\n"
      "counterpart A B;\n"
      "believes A: pubkey Kn of N;\n");
  const Document& d = *r.doc;
  CHECK(d.protocol.parties[2].is_ttp);
  CHECK(d.key_aliases.at("Kn") == KeyTerm::public_key("N"));
  CHECK(d.key_aliases.at("Kab") == KeyTerm::shared_key("Kab", "A", "B"));
  REQUIRE(d.protocol.timeouts.size() == 1);
  CHECK(d.protocol.timeouts[0].party == "A");
  CHECK(d.protocol.timeouts[0].after_step == 1);
  CHECK(d.protocol.timeouts[0].reply_step == 2);
  CHECK(d.protocol.timeouts[0].waiting.name == "tA");
  REQUIRE(d.protocol.declared_constraints.size() == 1);
  CHECK(d.counterparts.at("A") == "B");
  CHECK(d.counterparts.at("B") == "A");
  REQUIRE(d.beliefs.size() == 1);
  CHECK(d.beliefs[0].fact.kind() == Formula::Kind::PubKeyOf);
}

TEST_CASE("term sugar: sign, pub, priv") {
  auto r = parse_ok(
      "protocol S;\nparty A;\nparty B;\n"
      "pubkey Ka of A;\n"
      "knows A: priv(A), Doc;\n"
      "1. A -> B : sign(Doc, A) @ T1;\n");
  CHECK(r.doc->protocol.steps[0].msg ==
        Msg::enc(Msg::atom("Doc"), KeyTerm::private_key("A")));
}

TEST_CASE("parse errors carry positions and do not abort recovery") {
  SUBCASE("empty input") {
    ParseResult r = parse_document("   \n  # only a comment\n");
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].code == "E_EMPTY");
  }
  SUBCASE("unknown statement") {
    ParseResult r = parse_document("wibble A;\n");
    REQUIRE_FALSE(r.errors.empty());
    CHECK(r.errors[0].code == "E_PARSE");
    CHECK(r.errors[0].line == 1);
  }
  SUBCASE("malformed step") {
    ParseResult r = parse_document("party A;\n1. A -> : x @ T1;\n");
    REQUIRE_FALSE(r.errors.empty());
    CHECK(r.errors[0].code == "E_PARSE");
    CHECK(r.errors[0].line == 2);
  }
  SUBCASE("recovery continues past a bad statement") {
    ParseResult r = parse_document(
        "party A;\nwibble;\nparty B;\nbroken -> statement;\nparty C;\n");
    // Several independent diagnostics, one per bad statement.
    CHECK(r.errors.size() == 2);
    CHECK_FALSE(r.doc.has_value());
  }
  SUBCASE("assumption with an unbound conclusion variable") {
    ParseResult r = parse_document(
        "party A;\nparty B;\n"
        "assume Bad: ?A proves B sent ?m at ?T => ?A proves B sent ?z at ?T;\n");
    REQUIRE_FALSE(r.errors.empty());
    CHECK(r.errors[0].code == "E_SCOPE");
  }
}

TEST_CASE("bundled fixtures parse with the expected shape") {
  auto r = parse_ok(read_file(fixture("netbill.ppl")));
  const Document& d = *r.doc;
  CHECK(d.protocol.name == "NetBill");
  CHECK(d.protocol.parties.size() == 3);
  CHECK(d.protocol.steps.size() == 8);
  CHECK(d.protocol.timeouts.size() == 2);
  CHECK(d.assumptions.size() == 2);
  CHECK(d.beliefs.size() == 8);
  CHECK(d.evidence.size() == 2);
  CHECK(d.goals.size() == 2);
  REQUIRE(d.item.has_value());
  CHECK(d.item->name == "Goods");
  CHECK(d.protocol.declared_constraints.empty());

  auto rf = parse_ok(read_file(fixture("netbill_fixed.ppl")));
  CHECK(rf.doc->protocol.name == "NetBillFixed");
  CHECK(rf.doc->protocol.declared_constraints.size() == 1);
}

TEST_CASE("printing parses back to the identical text") {
  for (const char* name : {"netbill.ppl", "netbill_fixed.ppl"}) {
    auto r = parse_ok(read_file(fixture(name)));
    std::string once = print_document(*r.doc);
    auto r2 = parse_ok(once);
    CHECK(print_document(*r2.doc) == once);
  }
  auto r = parse_ok(kMinimal);
  std::string once = print_document(*r.doc);
  CHECK(print_document(*parse_ok(once).doc) == once);
}

TEST_CASE("round trip holds on 100 generated documents") {
  std::mt19937 rng(987654);
  for (int trial = 0; trial < 100; ++trial) {
    Document doc;
    doc.protocol = testgen::random_protocol(rng);
    doc.key_aliases["ks"] = KeyTerm::session_key("ks");
    doc.key_aliases["kab"] = KeyTerm::shared_key("kab", "P0", "P1");

    std::string once = print_document(doc);
    ParseResult r = parse_document(once);
    for (const auto& e : r.errors) INFO(e.to_string());
    REQUIRE(r.errors.empty());
    REQUIRE(r.doc.has_value());
    CHECK(print_document(*r.doc) == once);
  }
}

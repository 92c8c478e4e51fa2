// The protocol description language: a line-oriented declarative syntax for
// parties, steps, timeouts, credible assumptions, beliefs, evidence terms,
// and analysis goals, with a printer that round-trips parsed documents.

#ifndef PAYLOGIC_DSL_HPP
#define PAYLOGIC_DSL_HPP

#include "paylogic/logic.hpp"
#include "paylogic/protocol.hpp"

#include <optional>
#include <string>
#include <vector>

namespace paylogic {

// A party's prior belief, e.g. that a key really is M's public key.
struct Belief {
  std::string believer;
  Formula fact = Formula::conj({});  // PubKeyOf or SharedKeyOf
};

struct EvidenceDecl {
  std::string name;    // e.g. EOO, EOR
  std::string holder;  // party holding the evidence at the end of the run
  Msg msg = Msg::atom("");
};

struct SufficiencyGoal {
  std::string evidence;  // name of the evidence this goal is about
  FormulaPat goal;       // e.g. C proves M sent Goods (time left open)
  std::string to_string() const;
};

// The exchanged item whose possession fairness is measured against.
struct ItemDecl {
  std::string name;
  std::string holder;
  Msg msg = Msg::atom("");
};

struct Document {
  ProtocolSpec protocol;
  std::vector<Rule> assumptions;
  std::map<std::string, std::string> counterparts;
  std::vector<Belief> beliefs;
  std::vector<EvidenceDecl> evidence;
  std::vector<SufficiencyGoal> goals;
  std::optional<ItemDecl> item;
  // Key-name aliases declared in the source, kept for printing.
  std::map<std::string, KeyTerm> key_aliases;
};

struct ParseError {
  int line = 0, col = 0;
  std::string code;  // E_PARSE, E_EMPTY, E_SCOPE, ...
  std::string message;

  std::string to_string() const;
};

struct ParseResult {
  std::optional<Document> doc;  // present only when errors is empty
  std::vector<ParseError> errors;
};

ParseResult parse_document(const std::string& text);

// Canonical source form; parse_document(print_document(d)) succeeds and
// prints back to the same text.
std::string print_document(const Document& doc);

}  // namespace paylogic

#endif

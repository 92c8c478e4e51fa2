#include "paylogic/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace paylogic {

std::string ParseError::to_string() const {
  std::ostringstream os;
  os << "line " << line << ":" << col << ": " << code << ": " << message;
  return os.str();
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { Ident, Meta, Num, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1, col = 1;
};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto push = [&](Token::Kind k, std::string t, int l, int c) {
    out.push_back({k, std::move(t), l, c});
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace((unsigned char)c)) {
      ++col;
      ++i;
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    int l = line, cl = col;
    if (std::isalpha((unsigned char)c) || c == '_') {
      size_t j = i;
      while (j < src.size() && (std::isalnum((unsigned char)src[j]) || src[j] == '_'))
        ++j;
      push(Token::Kind::Ident, src.substr(i, j - i), l, cl);
      col += int(j - i);
      i = j;
      continue;
    }
    if (c == '?') {
      size_t j = i + 1;
      while (j < src.size() && (std::isalnum((unsigned char)src[j]) || src[j] == '_'))
        ++j;
      push(Token::Kind::Meta, src.substr(i, j - i), l, cl);
      col += int(j - i);
      i = j;
      continue;
    }
    if (std::isdigit((unsigned char)c)) {
      size_t j = i;
      while (j < src.size() && (std::isdigit((unsigned char)src[j]) || src[j] == '/'))
        ++j;
      push(Token::Kind::Num, src.substr(i, j - i), l, cl);
      col += int(j - i);
      i = j;
      continue;
    }
    // Multi-character punctuation first.
    auto two = src.substr(i, 2);
    if (two == "->" || two == "=>" || two == "<=") {
      push(Token::Kind::Punct, two, l, cl);
      i += 2;
      col += 2;
      continue;
    }
    push(Token::Kind::Punct, std::string(1, c), l, cl);
    ++i;
    ++col;
  }
  out.push_back({Token::Kind::End, "", line, col});
  return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;
  Document doc;
  std::vector<ParseError> errors;

  const Token& cur() const { return toks[pos]; }
  const Token& next() { return toks[pos++]; }
  bool at(const std::string& t) const {
    return cur().text == t && cur().kind != Token::Kind::End;
  }
  bool at_ident(const std::string& t) const {
    return cur().kind == Token::Kind::Ident && cur().text == t;
  }

  [[noreturn]] void fail(const std::string& code, const std::string& msg) {
    throw ParseError{cur().line, cur().col, code, msg};
  }

  void expect(const std::string& t) {
    if (!at(t)) fail("E_PARSE", "expected '" + t + "', found '" + cur().text + "'");
    ++pos;
  }
  std::string expect_ident() {
    if (cur().kind != Token::Kind::Ident)
      fail("E_PARSE", "expected identifier, found '" + cur().text + "'");
    return next().text;
  }
  int expect_int() {
    if (cur().kind != Token::Kind::Num)
      fail("E_PARSE", "expected number, found '" + cur().text + "'");
    return std::stoi(next().text);
  }
  Rat expect_rat() {
    if (cur().kind != Token::Kind::Num)
      fail("E_PARSE", "expected number, found '" + cur().text + "'");
    std::string t = next().text;
    auto slash = t.find('/');
    if (slash == std::string::npos) return Rat(std::stoll(t));
    return Rat(std::stoll(t.substr(0, slash)), std::stoll(t.substr(slash + 1)));
  }

  bool is_party(const std::string& n) const {
    return doc.protocol.find_party(n) != nullptr;
  }
  bool is_delay_name(const std::string& n) const {
    for (const auto& t : doc.protocol.timeouts)
      if (t.waiting.name == n) return true;
    return n.size() >= 2 && n[0] == 't' &&
           std::all_of(n.begin() + 1, n.end(),
                       [](char c) { return std::isdigit((unsigned char)c); });
  }

  // ---- ground terms --------------------------------------------------------

  KeyTerm parse_keyref() {
    std::string name = expect_ident();
    if (name == "pub" || name == "priv") {
      expect("(");
      std::string p = expect_ident();
      expect(")");
      return name == "pub" ? KeyTerm::public_key(p) : KeyTerm::private_key(p);
    }
    auto it = doc.key_aliases.find(name);
    if (it == doc.key_aliases.end()) fail("E_PARSE", "unknown key '" + name + "'");
    return it->second;
  }

  Msg parse_term() {
    if (cur().kind != Token::Kind::Ident)
      fail("E_PARSE", "expected term, found '" + cur().text + "'");
    std::string head = cur().text;
    if (head == "pair") {
      next();
      expect("(");
      Msg l = parse_term();
      expect(",");
      Msg r = parse_term();
      expect(")");
      return Msg::pair(l, r);
    }
    if (head == "enc") {
      next();
      expect("(");
      Msg body = parse_term();
      expect(",");
      KeyTerm k = parse_keyref();
      expect(")");
      return Msg::enc(body, k);
    }
    if (head == "sign") {
      next();
      expect("(");
      Msg body = parse_term();
      expect(",");
      std::string signer = expect_ident();
      expect(")");
      return Msg::enc(body, KeyTerm::private_key(signer));
    }
    if (head == "hash") {
      next();
      expect("(");
      Msg body = parse_term();
      expect(")");
      return Msg::hash(body);
    }
    if (head == "key" || head == "pub" || head == "priv") {
      if (head == "key") {
        next();
        expect("(");
        KeyTerm k = parse_keyref();
        expect(")");
        return Msg::key(k);
      }
      return Msg::key(parse_keyref());
    }
    next();
    auto it = doc.key_aliases.find(head);
    if (it != doc.key_aliases.end()) return Msg::key(it->second);
    return Msg::atom(head);
  }

  // ---- pattern terms (assumptions) -----------------------------------------

  PartyPat parse_pagent() {
    if (cur().kind == Token::Kind::Meta) return PartyPat::meta(next().text);
    std::string name = expect_ident();
    if (name == "counterpart") {
      expect("(");
      if (cur().kind != Token::Kind::Meta)
        fail("E_PARSE", "counterpart expects a metavariable");
      std::string m = next().text;
      expect(")");
      return PartyPat::counterpart(m);
    }
    return PartyPat::concrete(name);
  }

  KeyPat parse_pkey() {
    if (cur().kind == Token::Kind::Meta) return KeyPat::metavar(next().text);
    std::string name = cur().text;
    if (name == "pub" || name == "priv") {
      next();
      expect("(");
      PartyPat p = parse_pagent();
      expect(")");
      return name == "pub" ? KeyPat::public_of(p) : KeyPat::private_of(p);
    }
    return KeyPat::of(parse_keyref());
  }

  MsgPat parse_pterm() {
    if (cur().kind == Token::Kind::Meta) return MsgPat::metavar(next().text);
    if (cur().kind != Token::Kind::Ident)
      fail("E_PARSE", "expected term, found '" + cur().text + "'");
    std::string head = cur().text;
    if (head == "pair") {
      next();
      expect("(");
      MsgPat l = parse_pterm();
      expect(",");
      MsgPat r = parse_pterm();
      expect(")");
      return MsgPat::pair(l, r);
    }
    if (head == "enc") {
      next();
      expect("(");
      MsgPat body = parse_pterm();
      expect(",");
      KeyPat k = parse_pkey();
      expect(")");
      return MsgPat::enc(body, k);
    }
    if (head == "sign") {
      next();
      expect("(");
      MsgPat body = parse_pterm();
      expect(",");
      PartyPat p = parse_pagent();
      expect(")");
      return MsgPat::enc(body, KeyPat::private_of(p));
    }
    if (head == "hash") {
      next();
      expect("(");
      MsgPat body = parse_pterm();
      expect(")");
      return MsgPat::hash(body);
    }
    if (head == "key") {
      next();
      expect("(");
      KeyPat k = parse_pkey();
      expect(")");
      return MsgPat::key(k);
    }
    return MsgPat::of(parse_term());
  }

  TimePat parse_ptime() {
    if (cur().kind == Token::Kind::Meta) return TimePat::metavar(next().text);
    return TimePat::of(TimeExpr::var(expect_ident()));
  }

  FormulaPat parse_pformula() {
    if (at_ident("pubkey")) {
      next();
      KeyPat k = parse_pkey();
      expect("of");
      PartyPat p = parse_pagent();
      return FormulaPat::pubkey_of(k, p);
    }
    if (at_ident("sharedkey")) {
      next();
      KeyPat k = parse_pkey();
      expect("between");
      PartyPat a = parse_pagent();
      expect("and");
      PartyPat b = parse_pagent();
      return FormulaPat::shared_key_of(k, a, b);
    }
    PartyPat agent = parse_pagent();
    if (at_ident("proves")) {
      next();
      return FormulaPat::can_prove(agent, parse_pformula());
    }
    if (at_ident("sent") || at_ident("received")) {
      bool sent = cur().text == "sent";
      next();
      MsgPat m = parse_pterm();
      expect("at");
      TimePat t = parse_ptime();
      return sent ? FormulaPat::sent(agent, m, t)
                  : FormulaPat::received(agent, m, t);
    }
    if (at_ident("possesses")) {
      next();
      MsgPat m = parse_pterm();
      std::optional<TimePat> t;
      if (at_ident("at")) {
        next();
        t = parse_ptime();
      }
      return FormulaPat::possesses(agent, m, t);
    }
    fail("E_PARSE", "expected 'proves', 'sent', 'possesses' or 'received'");
  }

  // ---- time sums -----------------------------------------------------------

  TimeExpr parse_time_sum() {
    std::vector<std::string> delays;
    std::optional<std::string> base_var;
    Rat offset(0);
    while (true) {
      if (cur().kind == Token::Kind::Num) {
        offset += expect_rat();
      } else {
        std::string n = expect_ident();
        if (is_delay_name(n))
          delays.push_back(n);
        else if (!base_var)
          base_var = n;
        else
          fail("E_PARSE", "at most one non-delay variable per sum");
      }
      if (at("+"))
        next();
      else
        break;
    }
    TimeExpr base = base_var ? TimeExpr::var(*base_var) : TimeExpr::constant(Rat(0));
    if (delays.empty() && offset == Rat(0)) return base;
    return TimeExpr::plus(base, std::move(delays), offset);
  }

  // ---- statements ----------------------------------------------------------

  void parse_statement() {
    if (cur().kind == Token::Kind::Num) {
      parse_step();
      return;
    }
    std::string kw = expect_ident();
    if (kw == "protocol") {
      doc.protocol.name = expect_ident();
    } else if (kw == "party" || kw == "ttp") {
      std::string n = expect_ident();
      doc.protocol.parties.push_back(PartyId{n, kw == "ttp"});
    } else if (kw == "pubkey") {
      std::string alias = expect_ident();
      expect("of");
      std::string owner = expect_ident();
      doc.key_aliases.emplace(alias, KeyTerm::public_key(owner));
      doc.protocol.keys.push_back(KeyTerm::public_key(owner));
    } else if (kw == "sharedkey") {
      std::string alias = expect_ident();
      expect("between");
      std::string a = expect_ident();
      expect("and");
      std::string b = expect_ident();
      KeyTerm k = KeyTerm::shared_key(alias, a, b);
      doc.key_aliases.emplace(alias, k);
      doc.protocol.keys.push_back(k);
    } else if (kw == "sessionkey") {
      std::string alias = expect_ident();
      KeyTerm k = KeyTerm::session_key(alias);
      doc.key_aliases.emplace(alias, k);
      doc.protocol.keys.push_back(k);
    } else if (kw == "knows") {
      std::string p = expect_ident();
      expect(":");
      MsgSet& set = doc.protocol.initial_knowledge[p];
      set.insert(parse_term());
      while (at(",")) {
        next();
        set.insert(parse_term());
      }
    } else if (kw == "fresh") {
      std::vector<std::string> names{expect_ident()};
      while (at(",")) {
        next();
        names.push_back(expect_ident());
      }
      expect("at");
      expect("step");
      int idx = expect_int();
      for (const auto& n : names) {
        auto it = doc.key_aliases.find(n);
        doc.protocol.fresh_decls[idx].insert(
            it == doc.key_aliases.end() ? Msg::atom(n) : Msg::key(it->second));
      }
    } else if (kw == "timeout") {
      TimeoutDecl t;
      t.party = expect_ident();
      expect("waits");
      t.waiting = DelaySym{expect_ident(), DelaySym::Role::WaitingTime};
      expect("after");
      expect("step");
      t.after_step = expect_int();
      expect("expecting");
      expect("step");
      t.reply_step = expect_int();
      doc.protocol.timeouts.push_back(t);
    } else if (kw == "counterpart") {
      std::string a = expect_ident();
      std::string b = expect_ident();
      doc.counterparts[a] = b;
      doc.counterparts[b] = a;
    } else if (kw == "assume") {
      Rule r;
      r.name = expect_ident();
      r.family = r.name;
      expect(":");
      r.premises.push_back(parse_pformula());
      while (at_ident("and")) {
        next();
        r.premises.push_back(parse_pformula());
      }
      expect("=>");
      r.conclusion = parse_pformula();
      // Scope check: every conclusion metavariable must be bound by a
      // premise; reuse the registration validator.
      try {
        register_assumption(KnowledgeBase{}, r);
      } catch (const std::invalid_argument& e) {
        fail("E_SCOPE", e.what());
      }
      doc.assumptions.push_back(std::move(r));
    } else if (kw == "believes") {
      std::string believer = expect_ident();
      expect(":");
      std::string what = expect_ident();
      if (what == "pubkey") {
        KeyTerm k = parse_keyref();
        expect("of");
        std::string owner = expect_ident();
        doc.beliefs.push_back({believer, Formula::pubkey_of(k, owner)});
      } else if (what == "sharedkey") {
        KeyTerm k = parse_keyref();
        expect("between");
        std::string a = expect_ident();
        expect("and");
        std::string b = expect_ident();
        doc.beliefs.push_back({believer, Formula::shared_key_of(k, a, b)});
      } else {
        fail("E_PARSE", "expected 'pubkey' or 'sharedkey'");
      }
    } else if (kw == "evidence") {
      EvidenceDecl e;
      e.name = expect_ident();
      expect("held_by");
      e.holder = expect_ident();
      expect("=");
      e.msg = parse_term();
      doc.evidence.push_back(std::move(e));
    } else if (kw == "goal") {
      expect("sufficiency");
      SufficiencyGoal g;
      g.evidence = expect_ident();
      expect(":");
      std::string prover = expect_ident();
      expect("proves");
      std::string subject = expect_ident();
      std::string verb = expect_ident();
      Msg m = parse_term();
      TimePat t = TimePat::metavar("?Tgoal");
      if (verb == "sent")
        g.goal = FormulaPat::can_prove(
            PartyPat::concrete(prover),
            FormulaPat::sent(PartyPat::concrete(subject), MsgPat::of(m), t));
      else if (verb == "possesses")
        g.goal = FormulaPat::can_prove(
            PartyPat::concrete(prover),
            FormulaPat::possesses(PartyPat::concrete(subject), MsgPat::of(m), t));
      else
        fail("E_PARSE", "expected 'sent' or 'possesses'");
      doc.goals.push_back(std::move(g));
    } else if (kw == "item") {
      ItemDecl it;
      it.name = expect_ident();
      expect("held_by");
      it.holder = expect_ident();
      it.msg = Msg::atom(it.name);
      doc.item = it;
    } else if (kw == "constraint") {
      TimeExpr lhs = parse_time_sum();
      Constraint::Rel rel;
      if (at("<=")) rel = Constraint::Rel::Le;
      else if (at("<")) rel = Constraint::Rel::Lt;
      else if (at("=")) rel = Constraint::Rel::Eq;
      else fail("E_PARSE", "expected '<=', '<' or '='");
      next();
      TimeExpr rhs = parse_time_sum();
      doc.protocol.declared_constraints.push_back(Constraint{rel, lhs, rhs});
    } else {
      fail("E_PARSE", "unknown statement '" + kw + "'");
    }
    expect(";");
  }

  void parse_step() {
    Step s;
    s.index = expect_int();
    expect(".");
    s.from = expect_ident();
    expect("->");
    s.to = expect_ident();
    expect(":");
    s.msg = parse_term();
    if (at("@")) {
      next();
      s.at = expect_ident();
    } else {
      s.at = "T" + std::to_string(s.index);
    }
    doc.protocol.steps.push_back(std::move(s));
    expect(";");
  }

  ParseResult run() {
    if (cur().kind == Token::Kind::End) {
      errors.push_back({cur().line, cur().col, "E_EMPTY", "empty document"});
      return {std::nullopt, errors};
    }
    while (cur().kind != Token::Kind::End) {
      try {
        parse_statement();
      } catch (const ParseError& e) {
        errors.push_back(e);
        while (cur().kind != Token::Kind::End && !at(";")) ++pos;
        if (at(";")) ++pos;
      }
    }
    if (!errors.empty()) return {std::nullopt, errors};
    return {std::move(doc), {}};
  }
};

}  // namespace

ParseResult parse_document(const std::string& text) {
  Parser p;
  p.toks = lex(text);
  return p.run();
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

std::string key_to_dsl(const KeyTerm& k, const Document& doc) {
  for (const auto& [alias, kt] : doc.key_aliases)
    if (kt == k) return alias;
  if (k.kind == KeyTerm::Kind::Public) return "pub(" + k.owner + ")";
  if (k.kind == KeyTerm::Kind::Private) return "priv(" + k.owner + ")";
  return k.to_string();
}

std::string msg_to_dsl(const Msg& m, const Document& doc) {
  switch (m.kind()) {
    case Msg::Kind::Atom:
      return m.atom_name();
    case Msg::Kind::Pair:
      return "pair(" + msg_to_dsl(m.left(), doc) + ", " + msg_to_dsl(m.right(), doc) + ")";
    case Msg::Kind::Enc:
      if (m.key_term().kind == KeyTerm::Kind::Private)
        return "sign(" + msg_to_dsl(m.body(), doc) + ", " + m.key_term().owner + ")";
      return "enc(" + msg_to_dsl(m.body(), doc) + ", " + key_to_dsl(m.key_term(), doc) + ")";
    case Msg::Kind::Hash:
      return "hash(" + msg_to_dsl(m.body(), doc) + ")";
    case Msg::Kind::Key:
      return "key(" + key_to_dsl(m.key_term(), doc) + ")";
  }
  return "?";
}

std::string pagent_to_dsl(const PartyPat& p) {
  switch (p.kind) {
    case PartyPat::Kind::Concrete: return p.name;
    case PartyPat::Kind::Meta: return p.name;
    case PartyPat::Kind::Counterpart: return "counterpart(" + p.name + ")";
  }
  return "?";
}

std::string pkey_to_dsl(const KeyPat& k, const Document& doc) {
  switch (k.kind) {
    case KeyPat::Kind::Concrete: return key_to_dsl(k.concrete, doc);
    case KeyPat::Kind::Meta: return k.meta;
    case KeyPat::Kind::Dual: return "dual(" + k.meta + ")";
    case KeyPat::Kind::Public: return "pub(" + pagent_to_dsl(k.party) + ")";
    case KeyPat::Kind::Private: return "priv(" + pagent_to_dsl(k.party) + ")";
  }
  return "?";
}

std::string pterm_to_dsl(const MsgPat& m, const Document& doc) {
  switch (m.kind()) {
    case MsgPat::Kind::Meta: return m.name();
    case MsgPat::Kind::Atom: return m.name();
    case MsgPat::Kind::Pair:
      return "pair(" + pterm_to_dsl(m.left(), doc) + ", " + pterm_to_dsl(m.right(), doc) + ")";
    case MsgPat::Kind::Enc:
      if (m.key_pat().kind == KeyPat::Kind::Private)
        return "sign(" + pterm_to_dsl(m.body(), doc) + ", " +
               pagent_to_dsl(m.key_pat().party) + ")";
      return "enc(" + pterm_to_dsl(m.body(), doc) + ", " + pkey_to_dsl(m.key_pat(), doc) + ")";
    case MsgPat::Kind::Hash: return "hash(" + pterm_to_dsl(m.body(), doc) + ")";
    case MsgPat::Kind::Key: return "key(" + pkey_to_dsl(m.key_pat(), doc) + ")";
  }
  return "?";
}

std::string ptime_to_dsl(const TimePat& t) {
  switch (t.kind) {
    case TimePat::Kind::Meta: return t.meta;
    case TimePat::Kind::Concrete: return t.concrete->to_string();
    default: return "?";
  }
}

std::string pformula_to_dsl(const FormulaPat& f, const Document& doc) {
  switch (f.kind) {
    case Formula::Kind::CanProve:
      return pagent_to_dsl(f.agent) + " proves " + pformula_to_dsl(*f.body, doc);
    case Formula::Kind::Sent:
      return pagent_to_dsl(f.agent) + " sent " + pterm_to_dsl(*f.msg, doc) +
             " at " + ptime_to_dsl(*f.at);
    case Formula::Kind::Received:
      return pagent_to_dsl(f.agent) + " received " + pterm_to_dsl(*f.msg, doc) +
             " at " + ptime_to_dsl(*f.at);
    case Formula::Kind::Possesses: {
      std::string s = pagent_to_dsl(f.agent) + " possesses " + pterm_to_dsl(*f.msg, doc);
      if (f.at) s += " at " + ptime_to_dsl(*f.at);
      return s;
    }
    case Formula::Kind::PubKeyOf:
      return "pubkey " + pkey_to_dsl(*f.key, doc) + " of " + pagent_to_dsl(f.owner);
    case Formula::Kind::SharedKeyOf:
      return "sharedkey " + pkey_to_dsl(*f.key, doc) + " between " +
             pagent_to_dsl(f.a) + " and " + pagent_to_dsl(f.b);
    case Formula::Kind::Conj:
      return "?";
  }
  return "?";
}

std::string timesum_to_dsl(const TimeExpr& e) {
  switch (e.kind()) {
    case TimeExpr::Kind::Const: return rat_to_string(e.value());
    case TimeExpr::Kind::Var: return e.var_name();
    case TimeExpr::Kind::Plus: {
      std::vector<std::string> parts;
      if (!(e.base().kind() == TimeExpr::Kind::Const && e.base().value() == Rat(0)))
        parts.push_back(timesum_to_dsl(e.base()));
      for (const auto& d : e.delays()) parts.push_back(d);
      if (e.offset() != Rat(0)) parts.push_back(rat_to_string(e.offset()));
      if (parts.empty()) return "0";
      std::string s = parts[0];
      for (size_t i = 1; i < parts.size(); ++i) s += " + " + parts[i];
      return s;
    }
    case TimeExpr::Kind::Max: return e.to_string();
  }
  return "?";
}

}  // namespace

std::string SufficiencyGoal::to_string() const {
  return evidence + ": " + goal.to_string();
}

std::string print_document(const Document& doc) {
  std::ostringstream os;
  const ProtocolSpec& p = doc.protocol;
  if (!p.name.empty()) os << "protocol " << p.name << ";\n\n";
  for (const auto& party : p.parties)
    os << (party.is_ttp ? "ttp " : "party ") << party.name << ";\n";
  os << "\n";
  for (const auto& [alias, k] : doc.key_aliases) {
    switch (k.kind) {
      case KeyTerm::Kind::Public:
        os << "pubkey " << alias << " of " << k.owner << ";\n";
        break;
      case KeyTerm::Kind::Shared:
        os << "sharedkey " << alias << " between " << k.endpoints.first << " and "
           << k.endpoints.second << ";\n";
        break;
      case KeyTerm::Kind::Session:
        os << "sessionkey " << alias << ";\n";
        break;
      default:
        break;
    }
  }
  os << "\n";
  for (const auto& [party, set] : p.initial_knowledge) {
    os << "knows " << party << ": ";
    bool first = true;
    for (const auto& m : set) {
      if (!first) os << ", ";
      first = false;
      os << msg_to_dsl(m, doc);
    }
    os << ";\n";
  }
  os << "\n";
  for (const auto& s : p.steps) {
    os << s.index << ". " << s.from << " -> " << s.to << " : "
       << msg_to_dsl(s.msg, doc) << " @ " << s.at << ";\n";
    auto fresh = p.fresh_decls.find(s.index);
    if (fresh != p.fresh_decls.end()) {
      os << "fresh ";
      bool first = true;
      for (const auto& m : fresh->second) {
        if (!first) os << ", ";
        first = false;
        if (m.kind() == Msg::Kind::Key)
          os << key_to_dsl(m.key_term(), doc);
        else
          os << m.atom_name();
      }
      os << " at step " << s.index << ";\n";
    }
  }
  os << "\n";
  for (const auto& t : p.timeouts)
    os << "timeout " << t.party << " waits " << t.waiting.name << " after step "
       << t.after_step << " expecting step " << t.reply_step << ";\n";
  for (const auto& c : p.declared_constraints) {
    const char* rel = c.rel == Constraint::Rel::Le   ? "<="
                      : c.rel == Constraint::Rel::Lt ? "<"
                                                     : "=";
    os << "constraint " << timesum_to_dsl(c.lhs) << " " << rel << " "
       << timesum_to_dsl(c.rhs) << ";\n";
  }
  std::set<std::pair<std::string, std::string>> printed;
  for (const auto& [a, b] : doc.counterparts) {
    auto pr = std::minmax(a, b);
    if (printed.insert({pr.first, pr.second}).second)
      os << "counterpart " << pr.first << " " << pr.second << ";\n";
  }
  os << "\n";
  for (const auto& r : doc.assumptions) {
    os << "assume " << r.name << ": ";
    for (size_t i = 0; i < r.premises.size(); ++i) {
      if (i) os << " and ";
      os << pformula_to_dsl(r.premises[i], doc);
    }
    os << " => " << pformula_to_dsl(r.conclusion, doc) << ";\n";
  }
  for (const auto& b : doc.beliefs) {
    os << "believes " << b.believer << ": ";
    if (b.fact.kind() == Formula::Kind::PubKeyOf)
      os << "pubkey " << key_to_dsl(b.fact.key(), doc) << " of " << b.fact.owner();
    else
      os << "sharedkey " << key_to_dsl(b.fact.key(), doc) << " between "
         << b.fact.endpoint_a() << " and " << b.fact.endpoint_b();
    os << ";\n";
  }
  os << "\n";
  for (const auto& e : doc.evidence)
    os << "evidence " << e.name << " held_by " << e.holder << " = "
       << msg_to_dsl(e.msg, doc) << ";\n";
  if (doc.item)
    os << "item " << doc.item->name << " held_by " << doc.item->holder << ";\n";
  for (const auto& g : doc.goals) {
    const FormulaPat& inner = *g.goal.body;
    os << "goal sufficiency " << g.evidence << ": " << pagent_to_dsl(g.goal.agent)
       << " proves " << pagent_to_dsl(inner.agent) << " "
       << (inner.kind == Formula::Kind::Sent ? "sent" : "possesses") << " "
       << pterm_to_dsl(*inner.msg, doc) << ";\n";
  }
  return os.str();
}

}  // namespace paylogic

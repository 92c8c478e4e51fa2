// Declarative protocol specifications and the possession-set run semantics,
// including truncated runs with timeout-triggered record clearing.

#ifndef PAYLOGIC_PROTOCOL_HPP
#define PAYLOGIC_PROTOCOL_HPP

#include "paylogic/message.hpp"
#include "paylogic/time_algebra.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace paylogic {

struct Step {
  int index = 0;  // 1-based
  std::string from, to;
  Msg msg = Msg::atom("");
  std::string at;  // time variable, T<index> by convention
};

// A party's declared timeout: after sending/observing step `after_step` it
// waits `waiting` time units for step `reply_step`; if the reply does not
// arrive it aborts and clears its protocol records.
struct TimeoutDecl {
  std::string party;
  int after_step = 0;
  int reply_step = 0;
  DelaySym waiting;
};

enum class ChannelKind { Unreliable, Recoverable };

struct ProtocolSpec {
  std::string name;
  std::vector<PartyId> parties;
  std::vector<Step> steps;
  std::map<std::string, MsgSet> initial_knowledge;
  std::map<int, MsgSet> fresh_decls;  // step index -> msgs generated there
  std::vector<TimeoutDecl> timeouts;
  std::vector<Constraint> declared_constraints;  // e.g. t5 + t6 <= tC
  // Declared key material, used by validation and the DSL round trip.
  std::vector<KeyTerm> keys;

  const PartyId* find_party(const std::string& name) const;
  ChannelKind channel(const std::string& a, const std::string& b) const;
  const TimeoutDecl* timeout_for(const std::string& party) const;
};

struct RunConfig {
  int truncate_after = 0;               // number of executed steps
  std::set<std::string> timeout_fired;  // parties that aborted and cleared
  std::map<std::string, Rat> delay_pins;

  std::string to_string() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// One applied step of a run, with its possession-rule classification.
struct TraceEntry {
  Step step;
  bool sender_fresh = false;    // rule 1 added new messages at the sender
  bool receiver_new = false;    // rule 2 added the message at the receiver
};

struct Trace {
  std::vector<TraceEntry> entries;
};

// Per-party sequence of (time label, possession set); "T0" is first, the
// terminal entry is labelled "Te".
struct PossessionTimeline {
  std::vector<std::pair<std::string, MsgSet>> entries;

  const MsgSet& at(const std::string& label) const;  // throws E_UNKNOWN_TIME
  bool has(const std::string& label) const;
  const MsgSet& terminal() const;
};

struct Diagnostic {
  std::string code;
  int step = 0;  // 0 when not tied to a step
  std::string message;

  std::string to_string() const;
};

struct RunResult {
  Trace trace;
  std::map<std::string, PossessionTimeline> timelines;
  ConstraintSystem constraints;
};

// Referential and derivability checks; empty result means the spec is
// well-formed and every sent message is constructible by its sender.
std::vector<Diagnostic> validate(const ProtocolSpec& spec);

// Executes steps 1..truncate_after and applies timeout clearing; throws
// std::invalid_argument (E_BAD_CONFIG) on an illegal config.
RunResult run(const ProtocolSpec& spec, const RunConfig& config);

const MsgSet& possession_at(const RunResult& r, const std::string& party,
                            const std::string& time_label);

// All truncation points crossed with every legal timeout subset.
std::vector<RunConfig> terminal_states(const ProtocolSpec& spec);

}  // namespace paylogic

#endif

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcept/bitset.hpp"

namespace flowcept {

// One concrete header-field/value pair, e.g. "IPv4 src = 10/8".
struct MatchfieldValue {
  uint32_t id = 0;        // dense, assigned in insertion order, never reused
  std::string label;      // unique, human-readable
  std::string field_kind; // which header field this value belongs to ("" if unknown)
};

struct FlowEntry {
  uint32_t id = 0;     // dense, insertion order
  std::string name;    // unique
  Bitset matchfields;  // over matchfield ids; never empty
};

/* Cross table between flow entries and the matchfield values they carry.
 *
 * Both the row view (flow -> matchfields) and the column view
 * (matchfield -> flows) are kept so that image operators run in
 * O(set size * words).  Flow rows may contain one another (a coarse rule
 * can coexist with a finer one); only a row equal to an existing flow's
 * row is rejected, since a duplicate could never be told apart. */
class FormalContext {
public:
  uint32_t num_flows() const { return uint32_t(flows_.size()); }
  uint32_t num_matchfields() const { return uint32_t(matchfields_.size()); }

  const std::vector<FlowEntry>& flows() const { return flows_; }
  const std::vector<MatchfieldValue>& matchfields() const { return matchfields_; }

  const FlowEntry& flow(uint32_t id) const;
  const MatchfieldValue& matchfield(uint32_t id) const;

  // -1 when absent
  int64_t find_flow(const std::string& name) const;
  int64_t find_matchfield(const std::string& label) const;
  uint32_t flow_id_or_throw(const std::string& name) const;
  uint32_t matchfield_id_or_throw(const std::string& label) const;

  uint32_t add_matchfield(const std::string& label, const std::string& field_kind = "");

  // Validates first, then commits: name unused, set non-empty, all ids
  // known, and no existing flow with the identical matchfield set.
  uint32_t add_flow(const std::string& name, const Bitset& matchfields);

  // Validation only (used by the lattice layer to stage insertions).  The
  // override lets callers validate against a context about to grow by
  // staged matchfield columns.
  void check_flow_addable(const std::string& name, const Bitset& matchfields) const;
  void check_flow_addable(const std::string& name, const Bitset& matchfields,
                          uint32_t num_matchfields_after) const;

  // set of flows carrying one matchfield (column view)
  const Bitset& column(uint32_t matchfield_id) const;

  // flows having all the given matchfields; image_of_matchfields({}) = all flows
  Bitset image_of_matchfields(const Bitset& matchfield_set) const;
  // matchfields common to all the given flows; image_of_flows({}) = all matchfields
  Bitset image_of_flows(const Bitset& flow_set) const;
  // double image: smallest closed matchfield set containing the argument
  Bitset close_matchfields(const Bitset& matchfield_set) const;

  Bitset all_flows() const { return Bitset::all_below(num_flows()); }
  Bitset all_matchfields() const { return Bitset::all_below(num_matchfields()); }

  std::vector<std::string> matchfield_labels(const Bitset& set) const;
  std::vector<std::string> flow_names(const Bitset& set) const;

  // row/column mirror consistency; throws ErrorKind::verify on corruption
  void check_consistency() const;

private:
  std::vector<MatchfieldValue> matchfields_;
  std::vector<FlowEntry> flows_;
  std::vector<Bitset> columns_;  // matchfield id -> set of flows carrying it
  std::unordered_map<std::string, uint32_t> matchfield_by_label_;
  std::unordered_map<std::string, uint32_t> flow_by_name_;
};

// "IPv4 src = 10/8" -> "IPv4 src"; labels without '=' have no field kind
std::string derive_field_kind(const std::string& label);

}  // namespace flowcept

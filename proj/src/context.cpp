#include "flowcept/context.hpp"

#include "flowcept/errors.hpp"

namespace flowcept {

const FlowEntry& FormalContext::flow(uint32_t id) const {
  require(id < flows_.size(), ErrorKind::not_found, "unknown flow id " + std::to_string(id));
  return flows_[id];
}

const MatchfieldValue& FormalContext::matchfield(uint32_t id) const {
  require(id < matchfields_.size(), ErrorKind::not_found,
          "unknown matchfield id " + std::to_string(id));
  return matchfields_[id];
}

int64_t FormalContext::find_flow(const std::string& name) const {
  auto it = flow_by_name_.find(name);
  return it == flow_by_name_.end() ? -1 : int64_t(it->second);
}

int64_t FormalContext::find_matchfield(const std::string& label) const {
  auto it = matchfield_by_label_.find(label);
  return it == matchfield_by_label_.end() ? -1 : int64_t(it->second);
}

uint32_t FormalContext::flow_id_or_throw(const std::string& name) const {
  int64_t id = find_flow(name);
  require(id >= 0, ErrorKind::not_found, "unknown flow '" + name + "'");
  return uint32_t(id);
}

uint32_t FormalContext::matchfield_id_or_throw(const std::string& label) const {
  int64_t id = find_matchfield(label);
  require(id >= 0, ErrorKind::not_found, "unknown matchfield '" + label + "'");
  return uint32_t(id);
}

uint32_t FormalContext::add_matchfield(const std::string& label, const std::string& field_kind) {
  require(!label.empty(), ErrorKind::constraint, "matchfield label must not be empty");
  require(find_matchfield(label) < 0, ErrorKind::constraint,
          "duplicate matchfield label '" + label + "'");
  uint32_t id = uint32_t(matchfields_.size());
  matchfields_.push_back({id, label, field_kind});
  columns_.emplace_back();
  matchfield_by_label_.emplace(label, id);
  return id;
}

void FormalContext::check_flow_addable(const std::string& name, const Bitset& mfs) const {
  check_flow_addable(name, mfs, num_matchfields());
}

void FormalContext::check_flow_addable(const std::string& name, const Bitset& mfs,
                                       uint32_t num_matchfields_after) const {
  require(!name.empty(), ErrorKind::constraint, "flow name must not be empty");
  require(find_flow(name) < 0, ErrorKind::constraint, "duplicate flow name '" + name + "'");
  require(!mfs.empty(), ErrorKind::constraint, "flow '" + name + "' has no matchfields");
  require(mfs.highest() < int64_t(num_matchfields_after), ErrorKind::not_found,
          "flow '" + name + "' references unknown matchfield id " +
              std::to_string(mfs.highest()));
  for (const FlowEntry& g : flows_) {
    // Only exact duplicates are rejected. Rows contained in other rows are
    // legitimate flow entries (a coarser rule alongside a finer one); the
    // grounding layer resolves them through flow concepts, so nothing breaks.
    if (mfs == g.matchfields)
      fail(ErrorKind::constraint,
           "flow '" + name + "' duplicates the matchfield set of '" + g.name + "'");
  }
}

uint32_t FormalContext::add_flow(const std::string& name, const Bitset& mfs) {
  check_flow_addable(name, mfs);
  uint32_t id = uint32_t(flows_.size());
  flows_.push_back({id, name, mfs});
  flow_by_name_.emplace(name, id);
  mfs.for_each([&](uint32_t m) { columns_[m].set(id); });
  return id;
}

const Bitset& FormalContext::column(uint32_t matchfield_id) const {
  require(matchfield_id < columns_.size(), ErrorKind::not_found,
          "unknown matchfield id " + std::to_string(matchfield_id));
  return columns_[matchfield_id];
}

Bitset FormalContext::image_of_matchfields(const Bitset& mfs) const {
  require(mfs.highest() < int64_t(matchfields_.size()), ErrorKind::not_found,
          "image: unknown matchfield id " + std::to_string(mfs.highest()));
  Bitset out = all_flows();
  mfs.for_each([&](uint32_t m) { out &= columns_[m]; });
  return out;
}

Bitset FormalContext::image_of_flows(const Bitset& fs) const {
  require(fs.highest() < int64_t(flows_.size()), ErrorKind::not_found,
          "image: unknown flow id " + std::to_string(fs.highest()));
  Bitset out = all_matchfields();
  fs.for_each([&](uint32_t f) { out &= flows_[f].matchfields; });
  return out;
}

Bitset FormalContext::close_matchfields(const Bitset& mfs) const {
  return image_of_flows(image_of_matchfields(mfs));
}

std::vector<std::string> FormalContext::matchfield_labels(const Bitset& set) const {
  std::vector<std::string> out;
  set.for_each([&](uint32_t m) { out.push_back(matchfield(m).label); });
  return out;
}

std::vector<std::string> FormalContext::flow_names(const Bitset& set) const {
  std::vector<std::string> out;
  set.for_each([&](uint32_t f) { out.push_back(flow(f).name); });
  return out;
}

void FormalContext::check_consistency() const {
  require(columns_.size() == matchfields_.size(), ErrorKind::verify,
          "context: column count does not match matchfield count");
  for (const FlowEntry& f : flows_) {
    require(!f.matchfields.empty(), ErrorKind::verify, "context: flow '" + f.name + "' is empty");
    require(f.matchfields.highest() < int64_t(matchfields_.size()), ErrorKind::verify,
            "context: flow '" + f.name + "' references an unknown matchfield");
  }
  // row and column views must describe the same incidence relation
  for (uint32_t m = 0; m < columns_.size(); ++m) {
    Bitset rebuilt;
    for (const FlowEntry& f : flows_)
      if (f.matchfields.test(m)) rebuilt.set(f.id);
    require(rebuilt == columns_[m], ErrorKind::verify,
            "context: column for '" + matchfields_[m].label + "' out of sync with rows");
  }
}

std::string derive_field_kind(const std::string& label) {
  size_t eq = label.find('=');
  if (eq == std::string::npos) return "";
  size_t begin = 0;
  while (begin < eq && label[begin] == ' ') ++begin;
  size_t end = eq;
  while (end > begin && label[end - 1] == ' ') --end;
  return label.substr(begin, end - begin);
}

}  // namespace flowcept

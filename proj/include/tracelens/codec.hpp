#pragma once

// Newline-delimited JSON encoding of events, states and deltas.
// The grammar is documented in docs/trace-format.md and docs/state-schema.md.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tracelens/trace_model.hpp"

namespace tracelens {

using Json = nlohmann::ordered_json;

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

Json domain_to_json(const Domain& d);
Domain domain_from_json(const Json& j);

Json op_to_json(const DeltaOp& op);
DeltaOp op_from_json(const Json& j);
Json delta_to_json(const StateDelta& d);
StateDelta delta_from_json(const Json& j);

Json state_to_json(const FullState& s);
FullState state_from_json(const Json& j);

Json attrs_to_json(const AttributeMap& attrs);
AttributeMap attrs_from_json(const Json& j);

Json event_to_json(const TraceEvent& e);
TraceEvent event_from_json(const Json& j);

/// One line of UTF-8 text, terminated by '\n'.
std::string encode_event(const TraceEvent& e);
/// Accepts a line with or without its trailing newline.
TraceEvent decode_event(std::string_view line);

/// Parses one protocol line into a JSON object; throws DecodeError.
Json parse_line(std::string_view line);
std::string to_line(const Json& j);

}  // namespace tracelens

#include "tracelens/codec.hpp"

namespace tracelens {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void bad(const std::string& what) { throw DecodeError(what, 0); }

const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t int_field(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) bad(std::string("field '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

std::string str_field(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) bad(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

std::optional<std::int64_t> opt_int(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) bad(std::string("field '") + key + "' is not an integer");
  return it->get<std::int64_t>();
}

Json opt_to_json(const std::optional<std::int64_t>& v) { return v ? Json(*v) : Json(nullptr); }

Json constraint_to_json(const Constraint& c) {
  Json j;
  j["id"] = c.id;
  j["text"] = c.text;
  j["vars"] = c.vars;
  return j;
}

Constraint constraint_from_json(const Json& j) {
  Constraint c;
  c.id = int_field(j, "id");
  c.text = str_field(j, "text");
  for (const auto& v : field(j, "vars")) c.vars.push_back(v.get<std::string>());
  return c;
}

}  // namespace

Json domain_to_json(const Domain& d) {
  Json arr = Json::array();
  for (const auto& i : d.intervals()) arr.push_back(Json::array({i.lo, i.hi}));
  return arr;
}

Domain domain_from_json(const Json& j) {
  if (!j.is_array()) bad("domain is not an array");
  std::vector<Domain::Interval> iv;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) bad("domain interval is not a pair");
    iv.push_back({p[0].get<std::int64_t>(), p[1].get<std::int64_t>()});
  }
  return Domain::from_intervals(std::move(iv));
}

Json op_to_json(const DeltaOp& dop) {
  Json j;
  j["op"] = std::string(op_name(dop));
  std::visit(overloaded{
                 [&](const op::PushGoal& o) { j["goal"] = o.goal; },
                 [&](const op::PopGoal& o) { j["goal"] = o.goal; },
                 [&](const op::AddProofNode& o) {
                   j["parent"] = opt_to_json(o.parent);
                   j["id"] = o.id;
                   j["goal"] = o.goal;
                 },
                 [&](const op::SetNodeStatus& o) {
                   j["id"] = o.id;
                   j["status"] = std::string(status_name(o.status));
                 },
                 [&](const op::AddSearchNode& o) {
                   j["parent"] = opt_to_json(o.parent);
                   j["label"] = o.label;
                   j["kind"] = std::string(kind_name(o.kind));
                 },
                 [&](const op::SetChoicePoint& o) {
                   j["label"] = o.label;
                   j["open"] = o.open;
                 },
                 [&](const op::SetCurrentNode& o) { j["label"] = o.label; },
                 [&](const op::SetDomain& o) {
                   j["var"] = o.var;
                   j["domain"] = domain_to_json(o.domain);
                 },
                 [&](const op::NarrowDomain& o) {
                   j["var"] = o.var;
                   j["removed"] = domain_to_json(o.removed);
                 },
                 [&](const op::RemoveVariable& o) { j["var"] = o.var; },
                 [&](const op::AddConstraint& o) { j["c"] = constraint_to_json(o.c); },
                 [&](const op::RemoveConstraint& o) { j["id"] = o.id; },
                 [&](const op::Enqueue& o) { j["id"] = o.id; },
                 [&](const op::Dequeue& o) { j["id"] = o.id; },
                 [&](const op::IncrSolutions&) {},
             },
             dop);
  return j;
}

DeltaOp op_from_json(const Json& j) {
  auto name = str_field(j, "op");
  if (name == "PushGoal") return op::PushGoal{str_field(j, "goal")};
  if (name == "PopGoal") return op::PopGoal{str_field(j, "goal")};
  if (name == "AddProofNode") return op::AddProofNode{opt_int(j, "parent"), int_field(j, "id"), str_field(j, "goal")};
  if (name == "SetNodeStatus") {
    auto st = status_from_name(str_field(j, "status"));
    if (!st) bad("bad node status");
    return op::SetNodeStatus{int_field(j, "id"), *st};
  }
  if (name == "AddSearchNode") {
    auto k = kind_from_name(str_field(j, "kind"));
    if (!k) bad("bad search node kind");
    return op::AddSearchNode{opt_int(j, "parent"), int_field(j, "label"), *k};
  }
  if (name == "SetChoicePoint") {
    const auto& o = field(j, "open");
    if (!o.is_boolean()) bad("field 'open' is not a boolean");
    return op::SetChoicePoint{int_field(j, "label"), o.get<bool>()};
  }
  if (name == "SetCurrentNode") return op::SetCurrentNode{int_field(j, "label")};
  if (name == "SetDomain") return op::SetDomain{str_field(j, "var"), domain_from_json(field(j, "domain"))};
  if (name == "NarrowDomain") return op::NarrowDomain{str_field(j, "var"), domain_from_json(field(j, "removed"))};
  if (name == "RemoveVariable") return op::RemoveVariable{str_field(j, "var")};
  if (name == "AddConstraint") return op::AddConstraint{constraint_from_json(field(j, "c"))};
  if (name == "RemoveConstraint") return op::RemoveConstraint{int_field(j, "id")};
  if (name == "Enqueue") return op::Enqueue{int_field(j, "id")};
  if (name == "Dequeue") return op::Dequeue{int_field(j, "id")};
  if (name == "IncrSolutions") return op::IncrSolutions{};
  bad("unknown delta op '" + name + "'");
}

Json delta_to_json(const StateDelta& d) {
  Json arr = Json::array();
  for (const auto& o : d.ops) arr.push_back(op_to_json(o));
  return arr;
}

StateDelta delta_from_json(const Json& j) {
  if (!j.is_array()) bad("delta is not an array");
  StateDelta d;
  d.ops.reserve(j.size());
  for (const auto& o : j) d.ops.push_back(op_from_json(o));
  return d;
}

Json state_to_json(const FullState& s) {
  Json j;
  j["chrono"] = s.chrono.value;
  j["goal_stack"] = s.goal_stack;
  Json proof = Json::array();
  for (const auto& [id, n] : s.proof_tree) {
    Json o;
    o["id"] = id;
    o["parent"] = opt_to_json(n.parent);
    o["goal"] = n.goal;
    o["status"] = std::string(status_name(n.status));
    o["depth"] = n.depth;
    proof.push_back(std::move(o));
  }
  j["proof_tree"] = std::move(proof);
  Json search = Json::array();
  for (const auto& [label, n] : s.search_tree) {
    Json o;
    o["label"] = label;
    o["parent"] = opt_to_json(n.parent);
    o["kind"] = std::string(kind_name(n.kind));
    o["open"] = n.open;
    o["depth"] = n.depth;
    search.push_back(std::move(o));
  }
  j["search_tree"] = std::move(search);
  Json vars = Json::object();
  for (const auto& [name, d] : s.fd_vars) vars[name] = domain_to_json(d);
  j["fd_vars"] = std::move(vars);
  Json cs = Json::array();
  for (const auto& [id, c] : s.constraint_store) cs.push_back(constraint_to_json(c));
  j["constraint_store"] = std::move(cs);
  j["propagation_queue"] = Json(std::vector<ConstraintId>(s.propagation_queue.begin(), s.propagation_queue.end()));
  j["current_node"] = s.current_node;
  j["solutions"] = s.solutions;
  return j;
}

FullState state_from_json(const Json& j) {
  if (!j.is_object()) bad("state is not an object");
  FullState s;
  s.chrono.value = static_cast<std::uint64_t>(int_field(j, "chrono"));
  for (const auto& g : field(j, "goal_stack")) s.goal_stack.push_back(g.get<std::string>());
  for (const auto& o : field(j, "proof_tree")) {
    ProofNode n;
    n.id = int_field(o, "id");
    n.parent = opt_int(o, "parent");
    n.goal = str_field(o, "goal");
    auto st = status_from_name(str_field(o, "status"));
    if (!st) bad("bad node status");
    n.status = *st;
    n.depth = static_cast<int>(int_field(o, "depth"));
    s.proof_tree.emplace(n.id, std::move(n));
  }
  for (const auto& o : field(j, "search_tree")) {
    SearchNode n;
    n.label = int_field(o, "label");
    n.parent = opt_int(o, "parent");
    auto k = kind_from_name(str_field(o, "kind"));
    if (!k) bad("bad search node kind");
    n.kind = *k;
    n.open = field(o, "open").get<bool>();
    n.depth = static_cast<int>(int_field(o, "depth"));
    s.search_tree.emplace(n.label, n);
  }
  for (const auto& [name, d] : field(j, "fd_vars").items()) s.fd_vars.emplace(name, domain_from_json(d));
  for (const auto& c : field(j, "constraint_store")) {
    auto con = constraint_from_json(c);
    s.constraint_store.emplace(con.id, std::move(con));
  }
  for (const auto& q : field(j, "propagation_queue")) s.propagation_queue.push_back(q.get<ConstraintId>());
  s.current_node = int_field(j, "current_node");
  s.solutions = int_field(j, "solutions");
  return s;
}

Json attrs_to_json(const AttributeMap& attrs) {
  Json j = Json::object();
  for (const auto& [k, v] : attrs)
    std::visit([&](const auto& x) { j[k] = x; }, v);
  return j;
}

AttributeMap attrs_from_json(const Json& j) {
  if (!j.is_object()) bad("attrs is not an object");
  AttributeMap m;
  for (const auto& [k, v] : j.items()) {
    if (v.is_number_integer()) m.emplace(k, v.get<std::int64_t>());
    else if (v.is_string()) m.emplace(k, v.get<std::string>());
    else bad("attribute '" + k + "' is neither integer nor string");
  }
  return m;
}

Json event_to_json(const TraceEvent& e) {
  Json j;
  j["type"] = "event";
  j["chrono"] = e.chrono.value;
  j["tags"] = e.tags;
  j["port"] = std::string(port_name(e.port));
  j["attrs"] = attrs_to_json(e.attrs);
  if (e.delta) j["delta"] = delta_to_json(*e.delta);
  if (e.state) j["state"] = state_to_json(*e.state);
  return j;
}

TraceEvent event_from_json(const Json& j) {
  if (!j.is_object()) bad("event is not an object");
  if (str_field(j, "type") != "event") bad("message is not an event");
  TraceEvent e;
  auto chrono = int_field(j, "chrono");
  if (chrono < 0) bad("negative chrono");
  e.chrono.value = static_cast<std::uint64_t>(chrono);
  e.id = e.chrono.value;
  auto p = port_from_name(str_field(j, "port"));
  if (!p) bad("unknown port");
  e.port = *p;
  for (const auto& t : field(j, "tags")) e.tags.push_back(t.get<std::string>());
  e.attrs = attrs_from_json(field(j, "attrs"));
  if (auto it = j.find("delta"); it != j.end()) e.delta = delta_from_json(*it);
  if (auto it = j.find("state"); it != j.end()) e.state = state_from_json(*it);
  return e;
}

Json parse_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  try {
    auto j = Json::parse(line);
    if (!j.is_object()) throw DecodeError("message is not a JSON object", 0);
    return j;
  } catch (const nlohmann::json::parse_error& err) {
    throw DecodeError(err.what(), err.byte == 0 ? 0 : err.byte - 1);
  }
}

std::string to_line(const Json& j) {
  auto s = j.dump();
  s.push_back('\n');
  return s;
}

std::string encode_event(const TraceEvent& e) { return to_line(event_to_json(e)); }

TraceEvent decode_event(std::string_view line) {
  auto j = parse_line(line);
  try {
    return event_from_json(j);
  } catch (const DecodeError&) {
    throw;
  } catch (const nlohmann::json::exception& err) {
    throw DecodeError(err.what(), 0);
  }
}

}  // namespace tracelens

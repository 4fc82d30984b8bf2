#include "protodep/depgraph.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "protodep/errors.hpp"

namespace protodep::depgraph {

namespace {

constexpr std::string_view kGraphHeader = "# protodep-graph v1";
constexpr std::string_view kFlowHeader = "# protodep-flow v1";

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

/// Reads lines, checks the header, and hands each remaining non-blank,
/// non-comment line to `fn(tokens, line_no)`.
template <class Fn>
void read_records(std::istream& in, const std::string& origin, std::string_view header, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != header) throw ParseError(origin, line_no, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    if (t.front() == '#') continue;
    fn(split_ws(t), line_no);
  }
  if (!seen_header) throw ParseError(origin, line_no == 0 ? 1 : line_no, "missing header");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

struct PropertyStyle {
  const char* color;
  const char* style;
  const char* arrowhead;
};

PropertyStyle style_of(PropertyKind p) {
  switch (p) {
    case PropertyKind::Confidentiality:
      return {"firebrick", "solid", "normal"};
    case PropertyKind::Integrity:
      return {"royalblue", "solid", "normal"};
    case PropertyKind::Authentication:
      return {"forestgreen", "solid", "vee"};
    case PropertyKind::Accounting:
      return {"darkorange", "dashed", "normal"};
    case PropertyKind::Include:
      return {"gray40", "dotted", "odot"};
    case PropertyKind::Generate:
      return {"purple", "dashed", "diamond"};
  }
  return {"black", "solid", "normal"};
}

std::string edge_statement(const DependencyEdge& e) {
  const PropertyStyle s = style_of(e.property);
  std::string out = quoted(e.source) + " -> " + quoted(e.destination) + " [label=\"" +
                    std::string(property_name(e.property)) + "\\n" + format_number(e.confidence) + " " +
                    std::string(provenance_name(e.provenance));
  if (!e.active()) out += " refuted";
  out += "\", color=\"";
  out += e.active() ? s.color : "gray70";
  out += "\", style=\"";
  out += s.style;
  out += "\", arrowhead=\"";
  out += s.arrowhead;
  out += "\"";
  if (e.provenance == EdgeProvenance::EvidenceConfirmed) out += ", penwidth=2";
  out += "];";
  return out;
}

}  // namespace

std::string_view provenance_name(EdgeProvenance p) noexcept {
  switch (p) {
    case EdgeProvenance::Model:
      return "model";
    case EdgeProvenance::Expert:
      return "expert";
    case EdgeProvenance::EvidenceConfirmed:
      return "evidence-confirmed";
  }
  return "model";
}

std::optional<EdgeProvenance> parse_provenance(std::string_view s) noexcept {
  if (s == "model") return EdgeProvenance::Model;
  if (s == "expert") return EdgeProvenance::Expert;
  if (s == "evidence-confirmed") return EdgeProvenance::EvidenceConfirmed;
  return std::nullopt;
}

std::string_view status_name(EdgeStatus s) noexcept { return s == EdgeStatus::Active ? "active" : "refuted"; }

std::optional<EdgeStatus> parse_status(std::string_view s) noexcept {
  if (s == "active") return EdgeStatus::Active;
  if (s == "refuted") return EdgeStatus::Refuted;
  return std::nullopt;
}

std::string key_string(const EdgeKey& k) {
  return k.source + "->" + k.destination + ":" + std::string(property_name(k.property));
}

bool valid_identifier(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '"' || c == '\\' || c == ',';
  });
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// ---------------------------------------------------------------------------

void DependencyGraph::add_node(const std::string& name) {
  if (!valid_identifier(name)) throw InputError("invalid identifier '" + name + "'");
  nodes_.insert(name);
}

void DependencyGraph::upsert(const DependencyEdge& edge) {
  if (edge.source == edge.destination) throw InputError("self-dependency on '" + edge.source + "'");
  if (!(edge.confidence >= 0.0 && edge.confidence <= 1.0)) {
    throw InputError("edge " + key_string(edge.key()) + " has confidence " + format_number(edge.confidence) +
                     " outside [0, 1]");
  }
  add_node(edge.source);
  add_node(edge.destination);
  edges_[edge.key()] = edge;
}

const DependencyEdge* DependencyGraph::find(const EdgeKey& key) const {
  auto it = edges_.find(key);
  return it == edges_.end() ? nullptr : &it->second;
}

std::vector<DependencyEdge> DependencyGraph::active_edges() const {
  std::vector<DependencyEdge> out;
  for (const auto& [k, e] : edges_) {
    if (e.active()) out.push_back(e);
  }
  return out;
}

std::set<EdgeKey> DependencyGraph::active_keys() const {
  std::set<EdgeKey> out;
  for (const auto& [k, e] : edges_) {
    if (e.active()) out.insert(k);
  }
  return out;
}

DependencyGraph build_graph(std::span<const model::Prediction> predictions, double accept) {
  if (!(accept > 0.0 && accept < 1.0)) {
    throw ConfigError("acceptance threshold must lie in (0, 1), got " + format_number(accept));
  }
  DependencyGraph g;
  for (const model::Prediction& p : predictions) {
    for (PropertyKind k : kAllProperties) {
      const double prob = p.probs[index_of(k)];
      if (!(prob >= accept)) continue;
      const EdgeKey key{p.source, p.destination, k};
      const DependencyEdge* existing = g.find(key);
      if (existing != nullptr && existing->confidence >= prob) continue;
      g.upsert({p.source, p.destination, k, prob, EdgeProvenance::Model, EdgeStatus::Active});
    }
  }
  return g;
}

DependencyGraph merge_graphs(const DependencyGraph& a, const DependencyGraph& b) {
  DependencyGraph out = a;
  for (const std::string& n : b.nodes()) out.add_node(n);
  for (const auto& [key, e] : b.edges()) {
    const DependencyEdge* mine = out.find(key);
    if (mine == nullptr) {
      out.upsert(e);
      continue;
    }
    DependencyEdge merged = *mine;
    merged.confidence = std::max(merged.confidence, e.confidence);
    merged.provenance = std::max(merged.provenance, e.provenance);
    if (!e.active()) merged.status = EdgeStatus::Refuted;
    out.upsert(merged);
  }
  return out;
}

GraphDiff graph_diff(const DependencyGraph& predicted, const DependencyGraph& truth) {
  const std::set<EdgeKey> p = predicted.active_keys(), t = truth.active_keys();
  GraphDiff d;
  std::set_difference(t.begin(), t.end(), p.begin(), p.end(), std::back_inserter(d.missing));
  std::set_difference(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(d.extra));
  return d;
}

// ---------------------------------------------------------------------------

void FlowGraph::validate() const {
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const FlowMessage& m = messages[i];
    const std::string where = "flow message " + std::to_string(i);
    if (m.command.empty()) throw InputError(where + " has an empty command");
    if (!valid_identifier(m.sender) || !valid_identifier(m.receiver)) {
      throw InputError(where + " has an invalid entity name");
    }
    if (!valid_identifier(m.command)) throw InputError(where + " has an invalid command name");
    std::set<std::string> seen;
    for (const std::string& id : m.identifiers) {
      if (!valid_identifier(id)) throw InputError(where + " carries invalid identifier '" + id + "'");
      if (!seen.insert(id).second) throw InputError(where + " carries '" + id + "' twice");
    }
  }
}

std::set<std::string> FlowGraph::identifiers() const {
  std::set<std::string> out;
  for (const FlowMessage& m : messages) out.insert(m.identifiers.begin(), m.identifiers.end());
  return out;
}

std::set<std::string> FlowGraph::entities() const {
  std::set<std::string> out;
  for (const FlowMessage& m : messages) {
    out.insert(m.sender);
    out.insert(m.receiver);
  }
  return out;
}

std::string_view removal_reason_name(RemovalReason r) noexcept {
  switch (r) {
    case RemovalReason::SourceAbsent:
      return "source-absent-from-flow";
    case RemovalReason::DestinationAbsent:
      return "destination-absent-from-flow";
    case RemovalReason::NoFlowPath:
      return "no-flow-path";
  }
  return "no-flow-path";
}

bool flow_reaches(const FlowGraph& flow, std::size_t from, std::size_t to) {
  if (from >= flow.messages.size() || to >= flow.messages.size()) {
    throw InputError("flow message index out of range");
  }
  if (to < from) return false;
  if (to == from) return true;
  std::set<std::string> holders = {flow.messages[from].sender, flow.messages[from].receiver};
  for (std::size_t i = from + 1; i < to; ++i) {
    if (holders.count(flow.messages[i].sender) != 0) holders.insert(flow.messages[i].receiver);
  }
  return holders.count(flow.messages[to].sender) != 0;
}

FilterResult intent_filter(const DependencyGraph& graph, const FlowGraph& flow) {
  flow.validate();
  std::map<std::string, std::vector<std::size_t>> occurs;
  for (std::size_t i = 0; i < flow.messages.size(); ++i) {
    for (const std::string& id : flow.messages[i].identifiers) occurs[id].push_back(i);
  }
  FilterResult result;
  for (const std::string& n : graph.nodes()) {
    if (occurs.count(n) != 0) result.graph.add_node(n);
  }
  for (const auto& [key, e] : graph.edges()) {
    auto src = occurs.find(key.source);
    auto dst = occurs.find(key.destination);
    if (src == occurs.end()) {
      result.removed.push_back({e, RemovalReason::SourceAbsent});
      continue;
    }
    if (dst == occurs.end()) {
      result.removed.push_back({e, RemovalReason::DestinationAbsent});
      continue;
    }
    bool connected = false;
    for (std::size_t i : src->second) {
      for (std::size_t j : dst->second) connected = connected || flow_reaches(flow, i, j);
    }
    if (connected) {
      result.graph.upsert(e);
    } else {
      result.removed.push_back({e, RemovalReason::NoFlowPath});
    }
  }
  return result;
}

void write_removals(std::span<const Removal> removed, std::ostream& out) {
  out << "# removed " << removed.size() << " edge(s)\n";
  for (const Removal& r : removed) {
    out << key_string(r.edge.key()) << " confidence=" << format_number(r.edge.confidence)
        << " reason=" << removal_reason_name(r.reason) << "\n";
  }
}

// ---------------------------------------------------------------------------

std::string to_dot(const DependencyGraph& graph, const DotOptions& options) {
  std::ostringstream out;
  out << "digraph dependencies {\n";
  out << "  graph [rankdir=LR, fontname=\"Helvetica\"];\n";
  out << "  node [shape=ellipse, fontname=\"Helvetica\"];\n";
  out << "  edge [fontname=\"Helvetica\", fontsize=10];\n";
  for (const std::string& n : graph.nodes()) out << "  " << quoted(n) << ";\n";

  std::map<std::string, std::vector<const DependencyEdge*>> includes;
  std::vector<const DependencyEdge*> arrows;
  for (const auto& [key, e] : graph.edges()) {
    if (!e.active() && !options.include_refuted) continue;
    if (e.property == PropertyKind::Include) {
      includes[e.destination].push_back(&e);
    } else {
      arrows.push_back(&e);
    }
  }
  std::size_t cluster = 0;
  for (const auto& [container, members] : includes) {
    out << "  subgraph \"cluster_include_" << cluster++ << "\" {\n";
    out << "    label=" << quoted(container) << ";\n";
    out << "    style=solid;\n";
    out << "    color=\"gray40\";\n";
    for (const DependencyEdge* e : members) out << "    " << quoted(e->source) << ";\n";
    for (const DependencyEdge* e : members) out << "    " << edge_statement(*e) << "\n";
    out << "  }\n";
  }
  for (const DependencyEdge* e : arrows) out << "  " << edge_statement(*e) << "\n";
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------

void write_graph(const DependencyGraph& graph, std::ostream& out) {
  out << kGraphHeader << "\n";
  for (const std::string& n : graph.nodes()) out << "node " << n << "\n";
  for (const auto& [key, e] : graph.edges()) {
    out << "edge " << e.source << " " << e.destination << " " << property_name(e.property) << " "
        << format_number(e.confidence) << " " << provenance_name(e.provenance) << " " << status_name(e.status)
        << "\n";
  }
}

DependencyGraph parse_graph(std::istream& in, const std::string& origin) {
  DependencyGraph g;
  read_records(in, origin, kGraphHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    try {
      if (f[0] == "node" && f.size() == 2) {
        g.add_node(f[1]);
        return;
      }
      if (f[0] != "edge" || f.size() != 7) throw ParseError(origin, line, "expected 'node' or 'edge' record");
      DependencyEdge e;
      e.source = f[1];
      e.destination = f[2];
      const auto prop = parse_property(f[3]);
      const auto conf = parse_number(f[4]);
      const auto prov = parse_provenance(f[5]);
      const auto status = parse_status(f[6]);
      if (!prop) throw ParseError(origin, line, "unknown property '" + f[3] + "'");
      if (!conf) throw ParseError(origin, line, "bad confidence '" + f[4] + "'");
      if (!prov) throw ParseError(origin, line, "unknown provenance '" + f[5] + "'");
      if (!status) throw ParseError(origin, line, "unknown status '" + f[6] + "'");
      e.property = *prop;
      e.confidence = *conf;
      e.provenance = *prov;
      e.status = *status;
      if (g.contains(e.key())) throw ParseError(origin, line, "duplicate edge " + key_string(e.key()));
      g.upsert(e);
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& err) {
      throw ParseError(origin, line, err.what());
    }
  });
  return g;
}

void save_graph(const DependencyGraph& graph, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_graph(graph, out);
}

DependencyGraph load_graph(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_graph(in, path.string());
}

void write_flow(const FlowGraph& flow, std::ostream& out) {
  out << kFlowHeader << "\n";
  for (const FlowMessage& m : flow.messages) {
    out << "msg " << m.sender << " " << m.receiver << " " << m.command << " ";
    if (m.identifiers.empty()) {
      out << "-";
    } else {
      for (std::size_t i = 0; i < m.identifiers.size(); ++i) out << (i ? "," : "") << m.identifiers[i];
    }
    out << "\n";
  }
}

FlowGraph parse_flow(std::istream& in, const std::string& origin) {
  FlowGraph flow;
  read_records(in, origin, kFlowHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f[0] != "msg" || f.size() != 5) {
      throw ParseError(origin, line, "expected 'msg <sender> <receiver> <command> <ids>'");
    }
    FlowMessage m{f[1], f[2], f[3], {}};
    if (f[4] != "-") m.identifiers = split_on(f[4], ',');
    flow.messages.push_back(m);
    try {
      FlowGraph single{{m}};
      single.validate();
    } catch (const InputError& err) {
      throw ParseError(origin, line, err.what());
    }
  });
  return flow;
}

FlowGraph load_flow(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_flow(in, path.string());
}

}  // namespace protodep::depgraph

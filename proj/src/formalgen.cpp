#include "protodep/formalgen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "protodep/errors.hpp"

namespace protodep::formalgen {

using depgraph::DependencyEdge;
using depgraph::EdgeKey;
using depgraph::format_number;
using depgraph::key_string;

namespace {

constexpr std::string_view kHeader = "(* protodep formal model v1 *)";
const std::set<std::string> kSectionComments = {"(* identifiers *)", "(* events *)", "(* term structure *)",
                                                "(* messages *)", "(* queries *)"};

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_event_property(PropertyKind p) {
  return p == PropertyKind::Integrity || p == PropertyKind::Authentication || p == PropertyKind::Accounting;
}

bool is_term_property(PropertyKind p) { return p == PropertyKind::Include || p == PropertyKind::Generate; }

std::string annotation(const DependencyEdge& e) {
  return "(* confidence=" + format_number(e.confidence) + " provenance=" +
         std::string(depgraph::provenance_name(e.provenance)) + " *)";
}

std::string edge_line(const DependencyEdge& e) {
  const std::string s = mangle(e.source), d = mangle(e.destination);
  const std::string p(property_name(e.property));
  switch (e.property) {
    case PropertyKind::Include:
      return "term include " + s + " in " + d + ". " + annotation(e);
    case PropertyKind::Generate:
      return "term generate " + d + " from " + s + ". " + annotation(e);
    case PropertyKind::Confidentiality:
      return "query attacker(" + d + ") protected_by " + s + ". " + annotation(e);
    case PropertyKind::Integrity:
    case PropertyKind::Authentication:
      return "query event(accept_" + p + "(" + s + ", " + d + ")) ==> event(send_" + p + "(" + s + ", " + d + ")). " +
             annotation(e);
    case PropertyKind::Accounting:
      return "query inj-event(accept_" + p + "(" + s + ", " + d + ")) ==> inj-event(send_" + p + "(" + s + ", " +
             d + ")). " + annotation(e);
  }
  return {};
}

}  // namespace

std::string mangle(std::string_view identifier) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < identifier.size(); ++i) {
    const char c = identifier[i];
    const bool keep = is_letter(c) || (i > 0 && is_digit(c));
    if (keep) {
      out += c;
    } else if (c == '_' && i > 0) {
      out += "__";
    } else {
      const auto u = static_cast<unsigned char>(c);
      out += "_h";
      out += kHex[u >> 4];
      out += kHex[u & 0xF];
      out += '_';
    }
  }
  return out;
}

std::optional<std::string> demangle(std::string_view name) {
  auto hex_value = [](char c) -> int {
    if (is_digit(c)) return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  std::size_t i = 0;
  while (i < name.size()) {
    const char c = name[i];
    if (is_letter(c) || (is_digit(c) && !out.empty())) {
      out += c;
      ++i;
      continue;
    }
    if (c != '_') return std::nullopt;
    if (i + 1 < name.size() && name[i + 1] == '_' && !out.empty()) {
      out += '_';
      i += 2;
      continue;
    }
    if (i + 4 < name.size() && name[i + 1] == 'h' && name[i + 4] == '_') {
      const int hi = hex_value(name[i + 2]), lo = hex_value(name[i + 3]);
      if (hi < 0 || lo < 0) return std::nullopt;
      out += static_cast<char>(hi * 16 + lo);
      i += 5;
      continue;
    }
    return std::nullopt;
  }
  if (out.empty() || mangle(out) != name) return std::nullopt;
  return out;
}

void check_consistency(const DependencyGraph& graph, const FlowGraph& flow) {
  const std::set<std::string> carried = flow.identifiers();
  std::vector<std::string> offending;
  for (const DependencyEdge& e : graph.active_edges()) {
    if (carried.count(e.source) == 0 || carried.count(e.destination) == 0) offending.push_back(key_string(e.key()));
  }
  if (offending.empty()) return;
  std::string msg = "active edges with endpoints absent from the flow graph (run the intent filter first):";
  for (const std::string& k : offending) msg += " " + k;
  throw ConsistencyError(msg);
}

std::size_t query_count(const DependencyGraph& graph) {
  std::size_t n = 0;
  for (const DependencyEdge& e : graph.active_edges()) n += is_term_property(e.property) ? 0 : 1;
  return n;
}

std::string emit_formal_model(const DependencyGraph& graph, const FlowGraph& flow) {
  flow.validate();
  check_consistency(graph, flow);
  const std::vector<DependencyEdge> active = graph.active_edges();

  std::set<std::string> names = flow.identifiers();
  names.insert(graph.nodes().begin(), graph.nodes().end());
  std::set<std::string> secret;
  std::set<PropertyKind> events;
  for (const DependencyEdge& e : active) {
    if (e.property == PropertyKind::Confidentiality) secret.insert(e.destination);
    if (is_event_property(e.property)) events.insert(e.property);
  }

  std::ostringstream out;
  out << kHeader << "\n";
  out << "free ch: channel.\n";
  out << "\n(* identifiers *)\n";
  for (const std::string& n : names) {
    out << "free " << mangle(n) << ": bitstring" << (secret.count(n) ? " [private]" : "") << ".\n";
  }
  if (!events.empty()) {
    out << "\n(* events *)\n";
    for (PropertyKind p : events) {
      out << "event send_" << property_name(p) << "(bitstring, bitstring).\n";
      out << "event accept_" << property_name(p) << "(bitstring, bitstring).\n";
    }
  }
  bool any_term = false;
  for (const DependencyEdge& e : active) {
    if (!is_term_property(e.property)) continue;
    if (!any_term) out << "\n(* term structure *)\n";
    any_term = true;
    out << edge_line(e) << "\n";
  }
  out << "\n(* messages *)\n";
  for (std::size_t i = 0; i < flow.messages.size(); ++i) {
    const auto& m = flow.messages[i];
    out << "(* msg " << i << ": " << m.sender << " -> " << m.receiver << " " << m.command << " *)\n";
    out << "let msg_" << i << " = ";
    if (m.identifiers.empty()) {
      out << "0.\n";
    } else {
      out << "out(ch, (";
      for (std::size_t k = 0; k < m.identifiers.size(); ++k) out << (k ? ", " : "") << mangle(m.identifiers[k]);
      out << ")).\n";
    }
  }
  if (flow.messages.empty()) {
    out << "process 0.\n";
  } else {
    out << "process ( ";
    for (std::size_t i = 0; i < flow.messages.size(); ++i) out << (i ? " | " : "") << "msg_" << i;
    out << " ).\n";
  }
  bool any_query = false;
  for (const DependencyEdge& e : active) {
    if (is_term_property(e.property)) continue;
    if (!any_query) out << "\n(* queries *)\n";
    any_query = true;
    out << edge_line(e) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

ParsedModel parse_formal_model(const std::string& text, const std::string& origin) {
  static const std::string kName = R"(([A-Za-z0-9_]+))";
  static const std::string kAnn = R"( \(\* confidence=(\S+) provenance=(\S+) \*\))";
  static const std::regex kFree("free " + kName + R"(: bitstring( \[private\])?\.)");
  static const std::regex kEvent(R"(event (send|accept)_([a-z]+)\(bitstring, bitstring\)\.)");
  static const std::regex kInclude("term include " + kName + " in " + kName + R"(\.)" + kAnn);
  static const std::regex kGenerate("term generate " + kName + " from " + kName + R"(\.)" + kAnn);
  static const std::regex kMsgComment(R"(\(\* msg (\d+): (\S+) -> (\S+) (\S+) \*\))");
  static const std::regex kLet(R"(let msg_(\d+) = (0|out\(ch, \((.*)\)\))\.)");
  static const std::regex kProcess(R"(process (0|\( (.*) \))\.)");
  static const std::regex kSecrecy("query attacker\\(" + kName + R"(\) protected_by )" + kName + R"(\.)" + kAnn);
  static const std::regex kCorr(R"(query (inj-event|event)\(accept_([a-z]+)\()" + kName + ", " + kName +
                                R"(\)\) ==> (inj-event|event)\(send_([a-z]+)\()" + kName + ", " + kName +
                                R"(\)\)\.)" + kAnn);

  ParsedModel result;
  std::map<std::string, bool> declared;  // identifier -> private
  std::set<std::string> event_decls;
  std::vector<std::pair<std::size_t, DependencyEdge>> edges;
  std::vector<std::pair<std::size_t, std::string>> uses;  // names referenced by messages and edges
  bool awaiting_let = false;  // a message comment must be followed by its let
  bool seen_header = false, seen_channel = false, seen_process = false;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> void { throw ParseError(origin, line_no, what); };
  auto ident = [&](const std::string& mangled) {
    auto d = demangle(mangled);
    if (!d) fail("'" + mangled + "' is not a mangled identifier");
    uses.emplace_back(line_no, *d);
    return *d;
  };
  auto make_edge = [&](const std::string& s, const std::string& d, PropertyKind p, const std::string& conf,
                       const std::string& prov) {
    DependencyEdge e;
    e.source = ident(s);
    e.destination = ident(d);
    e.property = p;
    double c = 0.0;
    const auto [ptr, ec] = std::from_chars(conf.data(), conf.data() + conf.size(), c);
    if (ec != std::errc() || ptr != conf.data() + conf.size() || !std::isfinite(c)) fail("bad confidence");
    e.confidence = c;
    const auto pv = depgraph::parse_provenance(prov);
    if (!pv) fail("unknown provenance '" + prov + "'");
    e.provenance = *pv;
    edges.emplace_back(line_no, e);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::smatch m;
    if (!seen_header) {
      if (line != kHeader) fail("expected model header");
      seen_header = true;
      continue;
    }
    if (awaiting_let) {
      if (!std::regex_match(line, m, kLet) || std::stoul(m[1]) != result.flow.messages.size() - 1) {
        fail("expected 'let msg_" + std::to_string(result.flow.messages.size() - 1) + " = ...'");
      }
      if (m[2] != "0") {
        const std::string list = m[3];
        if (list.empty()) fail("empty message tuple");
        std::size_t start = 0;
        while (true) {
          const std::size_t comma = list.find(", ", start);
          result.flow.messages.back().identifiers.push_back(ident(list.substr(start, comma - start)));
          if (comma == std::string::npos) break;
          start = comma + 2;
        }
      }
      awaiting_let = false;
      continue;
    }
    if (seen_process && line.rfind("query ", 0) != 0 && kSectionComments.count(line) == 0) {
      fail("only queries may follow the process statement");
    }
    if (line == "free ch: channel.") {
      if (seen_channel) fail("channel declared twice");
      seen_channel = true;
    } else if (kSectionComments.count(line) != 0) {
      continue;
    } else if (std::regex_match(line, m, kFree)) {
      const auto d = demangle(m[1].str());
      if (!d) fail("'" + m[1].str() + "' is not a mangled identifier");
      if (!declared.emplace(*d, m[2].matched).second) fail("'" + *d + "' declared twice");
    } else if (std::regex_match(line, m, kEvent)) {
      const auto p = parse_property(m[2].str());
      if (!p || !is_event_property(*p)) fail("event for an unsupported property");
      event_decls.insert(m[1].str() + "_" + m[2].str());
    } else if (std::regex_match(line, m, kInclude)) {
      make_edge(m[1], m[2], PropertyKind::Include, m[3], m[4]);
    } else if (std::regex_match(line, m, kGenerate)) {
      make_edge(m[2], m[1], PropertyKind::Generate, m[3], m[4]);
    } else if (std::regex_match(line, m, kMsgComment)) {
      if (std::stoul(m[1]) != result.flow.messages.size()) fail("messages out of order");
      result.flow.messages.push_back({m[2], m[3], m[4], {}});
      awaiting_let = true;
    } else if (std::regex_match(line, m, kProcess)) {
      if (seen_process) fail("process given twice");
      seen_process = true;
      std::string expected;
      for (std::size_t i = 0; i < result.flow.messages.size(); ++i) {
        expected += (i ? " | " : "") + std::string("msg_") + std::to_string(i);
      }
      const bool ok = result.flow.messages.empty() ? m[1] == "0" : m[2].matched && m[2] == expected;
      if (!ok) fail("process must compose every message in order");
    } else if (std::regex_match(line, m, kSecrecy)) {
      make_edge(m[2], m[1], PropertyKind::Confidentiality, m[3], m[4]);
    } else if (std::regex_match(line, m, kCorr)) {
      const auto p = parse_property(m[2].str());
      const bool injective = m[1] == "inj-event";
      if (!p || !is_event_property(*p) || m[2] != m[6] || m[1] != m[5] || m[3] != m[7] || m[4] != m[8] ||
          injective != (*p == PropertyKind::Accounting)) {
        fail("inconsistent correspondence query");
      }
      if (event_decls.count("send_" + m[2].str()) == 0 || event_decls.count("accept_" + m[2].str()) == 0) {
        fail("query uses an undeclared event");
      }
      make_edge(m[3], m[4], *p, m[9], m[10]);
    } else {
      fail("unrecognised statement");
    }
  }
  if (!seen_header) throw ParseError(origin, 1, "missing model header");
  if (awaiting_let) fail("message comment without its let statement");
  if (!seen_channel) fail("missing channel declaration");
  if (!seen_process) fail("missing process statement");

  for (const auto& [where, name] : uses) {
    if (declared.count(name) == 0) throw ParseError(origin, where, "'" + name + "' is not declared");
  }
  std::set<std::string> secret;
  for (const auto& [where, e] : edges) {
    if (e.property == PropertyKind::Confidentiality) {
      if (!declared.at(e.destination)) throw ParseError(origin, where, "secrecy query on a public name");
      secret.insert(e.destination);
    }
  }
  for (const auto& [name, priv] : declared) {
    if (priv && secret.count(name) == 0) throw ParseError(origin, line_no, "'" + name + "' is private but unqueried");
    result.graph.add_node(name);
  }
  for (const auto& [where, e] : edges) {
    if (result.graph.contains(e.key())) throw ParseError(origin, where, "duplicate edge " + key_string(e.key()));
    try {
      result.graph.upsert(e);
    } catch (const InputError& err) {
      throw ParseError(origin, where, err.what());
    }
  }
  try {
    result.flow.validate();
  } catch (const InputError& err) {
    throw ParseError(origin, line_no, err.what());
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string emit_report(const DependencyGraph& graph, const std::optional<GraphDiff>& diff,
                        const model::Thresholds& band) {
  std::array<std::size_t, kNumProperties> counts{};
  std::vector<const DependencyEdge*> low, refuted;
  std::size_t active = 0;
  for (const auto& [key, e] : graph.edges()) {
    if (!e.active()) {
      refuted.push_back(&e);
      continue;
    }
    ++active;
    ++counts[index_of(e.property)];
    if (band.classify(e.confidence) == model::Confidence::LowConfidence) low.push_back(&e);
  }
  std::ostringstream out;
  out << "dependency report\n";
  out << "nodes: " << graph.nodes().size() << "\n";
  out << "active edges: " << active << "\n";
  out << "refuted edges: " << refuted.size() << "\n";
  out << "queries: " << query_count(graph) << "\n";
  out << "\nactive edges per property\n";
  for (PropertyKind p : kAllProperties) {
    std::string name(property_name(p));
    name.resize(16, ' ');
    out << "  " << name << counts[index_of(p)] << "\n";
  }
  out << "\nlow confidence [" << format_number(band.low) << ", " << format_number(band.high) << ")\n";
  if (low.empty()) out << "  (none)\n";
  for (const DependencyEdge* e : low) out << "  " << key_string(e->key()) << " " << format_number(e->confidence) << "\n";
  out << "\nrefuted\n";
  if (refuted.empty()) out << "  (none)\n";
  for (const DependencyEdge* e : refuted) out << "  " << key_string(e->key()) << "\n";
  if (diff) {
    out << "\nagainst ground truth\n";
    out << "  missing: " << diff->missing.size() << "\n";
    for (const EdgeKey& k : diff->missing) out << "    " << key_string(k) << "\n";
    out << "  extra: " << diff->extra.size() << "\n";
    for (const EdgeKey& k : diff->extra) out << "    " << key_string(k) << "\n";
  }
  return out.str();
}

}  // namespace protodep::formalgen

#include <algorithm>
#include <set>

#include "doctest.h"
#include "protodep/errors.hpp"
#include "protodep/formalgen.hpp"
#include "protodep/numkit.hpp"

using namespace protodep;
using namespace protodep::formalgen;
using depgraph::DependencyEdge;
using depgraph::EdgeKey;
using depgraph::EdgeProvenance;
using depgraph::EdgeStatus;
using depgraph::FlowMessage;
using numkit::Rng;

namespace {

DependencyEdge edge(const std::string& s, const std::string& d, PropertyKind p, double c = 0.9,
                    EdgeStatus st = EdgeStatus::Active) {
  return {s, d, p, c, EdgeProvenance::Model, st};
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Connection-setup toy: three messages between UE and gNB.
FlowGraph rrc_flow() {
  return {{{"UE", "gNB", "RRCSetupRequest", {"ue-Identity", "establishmentCause"}},
           {"gNB", "UE", "RRCSetup", {"radioBearerConfig", "masterCellGroup"}},
           {"UE", "gNB", "RRCSetupComplete", {"selectedPLMN-Identity", "dedicatedNAS-Message"}}}};
}

DependencyGraph rrc_graph() {
  DependencyGraph g;
  g.upsert(edge("ue-Identity", "establishmentCause", PropertyKind::Include, 0.92));
  g.upsert(edge("ue-Identity", "selectedPLMN-Identity", PropertyKind::Integrity, 0.81));
  g.upsert(edge("radioBearerConfig", "masterCellGroup", PropertyKind::Generate, 0.77));
  g.upsert(edge("masterCellGroup", "dedicatedNAS-Message", PropertyKind::Confidentiality, 0.88));
  g.upsert(edge("establishmentCause", "dedicatedNAS-Message", PropertyKind::Accounting, 0.74));
  g.upsert(edge("ue-Identity", "dedicatedNAS-Message", PropertyKind::Authentication, 0.7));
  g.upsert(edge("ue-Identity", "radioBearerConfig", PropertyKind::Integrity, 0.75, EdgeStatus::Refuted));
  return g;
}

const std::vector<std::string> kIds = {"a", "b-1", "c_d", "5G-GUTI", "e.f", "g"};

std::pair<DependencyGraph, FlowGraph> random_filtered(Rng& rng) {
  const std::vector<std::string> entities = {"UE", "gNB", "AMF"};
  FlowGraph f;
  const std::size_t n_msgs = rng.below(5);
  for (std::size_t i = 0; i < n_msgs; ++i) {
    FlowMessage m{entities[rng.below(3)], entities[rng.below(3)], "Cmd" + std::to_string(i), {}};
    for (const std::string& id : kIds) {
      if (rng.below(3) == 0) m.identifiers.push_back(id);
    }
    f.messages.push_back(m);
  }
  DependencyGraph g;
  const std::size_t n_edges = rng.below(10);
  for (std::size_t i = 0; i < n_edges; ++i) {
    const std::size_t s = rng.below(kIds.size());
    std::size_t d = rng.below(kIds.size() - 1);
    if (d >= s) ++d;
    g.upsert({kIds[s], kIds[d], kAllProperties[rng.below(kNumProperties)], rng.uniform(),
              static_cast<EdgeProvenance>(rng.below(3)),
              rng.below(5) == 0 ? EdgeStatus::Refuted : EdgeStatus::Active});
  }
  return {depgraph::intent_filter(g, f).graph, f};
}

}  // namespace

TEST_CASE("mangle and demangle") {
  CHECK(mangle("establishmentCause") == "establishmentCause");
  CHECK(mangle("ue-Identity") == "ue_h2d_Identity");
  CHECK(mangle("c_d") == "c__d");
  CHECK(mangle("5G") == "_h35_G");
  CHECK(demangle("ue_h2d_Identity") == std::optional<std::string>("ue-Identity"));
  CHECK_FALSE(demangle("ue_x").has_value());
  CHECK_FALSE(demangle("_h2D_").has_value());
  CHECK_FALSE(demangle("5G").has_value());
  CHECK_FALSE(demangle("").has_value());
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const std::size_t len = 1 + rng.below(8);
    for (std::size_t k = 0; k < len; ++k) s += static_cast<char>(33 + rng.below(94));
    const std::string m = mangle(s);
    CHECK(std::all_of(m.begin(), m.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }));
    CHECK(demangle(m) == std::optional<std::string>(s));
  }
}

TEST_CASE("emit_formal_model examples") {
  const std::string empty = emit_formal_model(DependencyGraph{}, FlowGraph{});
  CHECK(count_of(empty, "query ") == 0);
  CHECK(empty.find("process 0.") != std::string::npos);

  DependencyGraph one;
  one.upsert(edge("a", "b", PropertyKind::Confidentiality));
  const FlowGraph flow{{{"UE", "gNB", "M", {"a", "b"}}}};
  const std::string text = emit_formal_model(one, flow);
  CHECK(count_of(text, "query ") == 1);
  CHECK(text.find("query attacker(b) protected_by a.") != std::string::npos);
  CHECK(text.find("free b: bitstring [private].") != std::string::npos);
  CHECK(text.find("free a: bitstring.") != std::string::npos);
}

TEST_CASE("connection-setup toy graph yields one query per active security edge") {
  const DependencyGraph g = rrc_graph();
  const std::string text = emit_formal_model(g, rrc_flow());
  std::size_t expected = 0;
  for (const auto& e : g.active_edges()) {
    expected += (e.property != PropertyKind::Include && e.property != PropertyKind::Generate) ? 1 : 0;
  }
  CHECK(expected == 4);
  CHECK(count_of(text, "\nquery ") == expected);
  CHECK(query_count(g) == expected);
  CHECK(count_of(text, "\nterm ") == 2);
  CHECK(count_of(text, "inj-event(accept_accounting") == 1);
  CHECK(text.find("radioBearerConfig)) ==>") == std::string::npos);
  CHECK(emit_formal_model(g, rrc_flow()) == text);
}

TEST_CASE("refuted edges never reach the formal text") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity, 0.6, EdgeStatus::Refuted));
  const FlowGraph flow{{{"UE", "gNB", "M", {"a", "b"}}}};
  const std::string text = emit_formal_model(g, flow);
  CHECK(text.find("integrity") == std::string::npos);
  CHECK(parse_formal_model(text).graph.empty());
}

TEST_CASE("emission requires a filtered graph") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity));
  g.upsert(edge("a", "z", PropertyKind::Include));
  const FlowGraph flow{{{"UE", "gNB", "M", {"a", "b"}}}};
  try {
    emit_formal_model(g, flow);
    FAIL("expected ConsistencyError");
  } catch (const ConsistencyError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a->z:include") != std::string::npos);
    CHECK(msg.find("a->b:integrity") == std::string::npos);
  }
  g.upsert(edge("a", "z", PropertyKind::Include, 0.9, EdgeStatus::Refuted));
  CHECK_NOTHROW(emit_formal_model(g, flow));
}

TEST_CASE("parse recovers the active edges and emit is a fixed point") {
  Rng rng(2718);
  for (int i = 0; i < 200; ++i) {
    const auto [g, f] = random_filtered(rng);
    const std::string text = emit_formal_model(g, f);
    const ParsedModel back = parse_formal_model(text);
    CHECK(back.graph.active_keys() == g.active_keys());
    for (const auto& e : g.active_edges()) CHECK(*back.graph.find(e.key()) == e);
    CHECK(back.flow == f);
    CHECK(emit_formal_model(back.graph, back.flow) == text);
    CHECK(emit_formal_model(g, f) == text);
  }
}

TEST_CASE("parse rejects tampered text") {
  const std::string text = emit_formal_model(rrc_graph(), rrc_flow());
  auto tamper = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    return t;
  };
  CHECK_NOTHROW(parse_formal_model(text));
  CHECK_THROWS_AS(parse_formal_model(tamper("query attacker(", "query attackr(")), ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper("==> event(send_integrity(ue_h2d_Identity", "==> event(send_integrity(masterCellGroup")),
                  ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper("query inj-event(accept_accounting", "query event(accept_accounting")),
                  ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper("protected_by masterCellGroup", "protected_by undeclaredName")),
                  ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper(" [private]", "")), ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper("process ( msg_0 | msg_1 | msg_2 ).", "process ( msg_0 | msg_2 ).")),
                  ParseError);
  CHECK_THROWS_AS(parse_formal_model(tamper("confidence=0.88", "confidence=high")), ParseError);
  CHECK_THROWS_AS(parse_formal_model("free ch: channel.\n"), ParseError);
  try {
    parse_formal_model(tamper("query attacker(", "query attackr("));
  } catch (const ParseError& e) {
    CHECK(e.line() > 1);
  }
}

TEST_CASE("emit_report examples") {
  const model::Thresholds band{0.3, 0.7};
  const std::string empty = emit_report(DependencyGraph{}, std::nullopt, band);
  CHECK(empty.find("active edges: 0") != std::string::npos);
  for (PropertyKind p : kAllProperties) {
    std::string name(property_name(p));
    name.resize(16, ' ');
    CHECK(empty.find("  " + name + "0\n") != std::string::npos);
  }

  DependencyGraph g = rrc_graph();
  g.upsert(edge("a", "b", PropertyKind::Integrity, 0.5));
  const depgraph::GraphDiff diff{{}, {{"a", "b", PropertyKind::Integrity}, {"x", "y", PropertyKind::Generate}}};
  const std::string report = emit_report(g, diff, band);
  CHECK(report.find("extra: 2") != std::string::npos);
  CHECK(report.find("    a->b:integrity\n") != std::string::npos);
  CHECK(report.find("    x->y:generate\n") != std::string::npos);
  CHECK(report.find("  a->b:integrity 0.5\n") != std::string::npos);
  CHECK(report.find("  ue-Identity->radioBearerConfig:integrity\n") != std::string::npos);
  CHECK(emit_report(g, diff, band) == report);
}

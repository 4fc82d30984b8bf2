#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "protodep/depgraph.hpp"
#include "protodep/errors.hpp"
#include "protodep/numkit.hpp"
#include "graph_support.hpp"
#include "support.hpp"

using namespace protodep;
using namespace protodep::depgraph;
using numkit::Rng;
using namespace graphsupport;

namespace {

DependencyEdge edge(const std::string& s, const std::string& d, PropertyKind p, double c = 0.9,
                    EdgeProvenance prov = EdgeProvenance::Model, EdgeStatus st = EdgeStatus::Active) {
  return {s, d, p, c, prov, st};
}

model::Prediction prediction(const std::string& s, const std::string& d, Probabilities probs) {
  model::Prediction p;
  p.doc_id = "doc";
  p.source = s;
  p.destination = d;
  p.probs = probs;
  return p;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("build_graph examples") {
  const std::vector<model::Prediction> low = {prediction("a", "b", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6})};
  CHECK(build_graph(low, 0.7).empty());

  const std::vector<model::Prediction> boundary = {prediction("a", "b", {0.7, 0, 0, 0, 0, 0})};
  const DependencyGraph g = build_graph(boundary, 0.7);
  REQUIRE(g.size() == 1);
  const DependencyEdge& e = g.edges().begin()->second;
  CHECK(e.confidence == 0.7);
  CHECK(e.provenance == EdgeProvenance::Model);
  CHECK(e.status == EdgeStatus::Active);

  std::vector<model::Prediction> twelve;
  for (int i = 0; i < 12; ++i) {
    Probabilities probs{};
    probs[static_cast<std::size_t>(i % 6)] = i < 3 ? 0.9 : 0.4;
    twelve.push_back(prediction("s" + std::to_string(i), "d" + std::to_string(i), probs));
  }
  CHECK(build_graph(twelve, 0.5).size() == 3);
  CHECK_THROWS_AS(build_graph(twelve, 1.0), ConfigError);
  CHECK_THROWS_AS(build_graph(twelve, 0.0), ConfigError);
}

TEST_CASE("build_graph keeps the highest probability across sections") {
  const std::vector<model::Prediction> p = {prediction("a", "b", {0.8, 0, 0, 0, 0, 0}),
                                            prediction("a", "b", {0.95, 0, 0, 0, 0, 0}),
                                            prediction("a", "b", {0.85, 0, 0, 0, 0, 0})};
  const DependencyGraph g = build_graph(p, 0.5);
  REQUIRE(g.size() == 1);
  CHECK(g.edges().begin()->second.confidence == 0.95);
}

TEST_CASE("graph rejects invalid edges") {
  DependencyGraph g;
  CHECK_THROWS_AS(g.upsert(edge("a", "a", PropertyKind::Include)), InputError);
  CHECK_THROWS_AS(g.upsert(edge("a", "b", PropertyKind::Include, 1.5)), InputError);
  CHECK_THROWS_AS(g.upsert(edge("a b", "c", PropertyKind::Include)), InputError);
  CHECK_THROWS_AS(g.add_node(""), InputError);
}

TEST_CASE("merge_graphs examples") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity, 0.6));
  g.upsert(edge("b", "c", PropertyKind::Include, 0.9, EdgeProvenance::Expert));
  CHECK(merge_graphs(g, g) == g);
  CHECK(merge_graphs(g, DependencyGraph{}) == g);
  CHECK(merge_graphs(DependencyGraph{}, g) == g);

  DependencyGraph h;
  h.upsert(edge("a", "b", PropertyKind::Integrity, 0.8));
  h.upsert(edge("b", "c", PropertyKind::Include, 0.2, EdgeProvenance::Model, EdgeStatus::Refuted));
  h.add_node("z");
  const DependencyGraph m = merge_graphs(g, h);
  CHECK(m.find({"a", "b", PropertyKind::Integrity})->confidence == 0.8);
  const DependencyEdge* bc = m.find({"b", "c", PropertyKind::Include});
  CHECK(bc->confidence == 0.9);
  CHECK(bc->provenance == EdgeProvenance::Expert);
  CHECK(bc->status == EdgeStatus::Refuted);
  CHECK(m.nodes() == std::set<std::string>{"a", "b", "c", "z"});
}

TEST_CASE("merge_graphs is commutative, associative and idempotent") {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const DependencyGraph a = random_graph(rng), b = random_graph(rng), c = random_graph(rng);
    CHECK(merge_graphs(a, b) == merge_graphs(b, a));
    CHECK(merge_graphs(merge_graphs(a, b), c) == merge_graphs(a, merge_graphs(b, c)));
    CHECK(merge_graphs(a, a) == a);
  }
}

TEST_CASE("graph_diff examples") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity));
  g.upsert(edge("b", "c", PropertyKind::Include));
  const GraphDiff same = graph_diff(g, g);
  CHECK(same.missing.empty());
  CHECK(same.extra.empty());

  DependencyGraph bigger = g;
  bigger.upsert(edge("c", "a", PropertyKind::Accounting));
  const GraphDiff over = graph_diff(bigger, g);
  CHECK(over.missing.empty());
  CHECK(over.extra == std::vector<EdgeKey>{{"c", "a", PropertyKind::Accounting}});

  DependencyGraph other;
  other.upsert(edge("x", "y", PropertyKind::Generate));
  const GraphDiff disjoint = graph_diff(other, g);
  CHECK(disjoint.missing.size() == g.size());
  CHECK(disjoint.extra.size() == other.size());

  DependencyGraph refuted = g;
  refuted.upsert(edge("a", "b", PropertyKind::Integrity, 0.9, EdgeProvenance::Model, EdgeStatus::Refuted));
  CHECK(graph_diff(refuted, g).missing == std::vector<EdgeKey>{{"a", "b", PropertyKind::Integrity}});
}

TEST_CASE("intent_filter examples") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Include));
  g.upsert(edge("c", "d", PropertyKind::Integrity));
  const FlowGraph flow{{{"UE", "gNB", "Setup", {"a", "b"}}}};
  const FilterResult r = intent_filter(g, flow);
  CHECK(key_set(r.graph) == std::set<EdgeKey>{{"a", "b", PropertyKind::Include}});
  REQUIRE(r.removed.size() == 1);
  CHECK(r.removed[0].edge.key() == EdgeKey{"c", "d", PropertyKind::Integrity});
  CHECK(r.removed[0].reason == RemovalReason::SourceAbsent);
  CHECK(r.graph.nodes() == std::set<std::string>{"a", "b"});

  CHECK(intent_filter(g, FlowGraph{}).graph.empty());
}

TEST_CASE("intent_filter follows message chains forward only") {
  // UE -> gNB carries x; gNB -> AMF carries y; AMF -> SMF carries z;
  // SMF -> UE carries w; a separate AUSF -> SMF message precedes everything.
  const FlowGraph flow{{{"AUSF", "SMF", "Pre", {"p"}},
                        {"UE", "gNB", "M1", {"x"}},
                        {"gNB", "AMF", "M2", {"y"}},
                        {"AMF", "SMF", "M3", {"z"}},
                        {"UDM", "UE", "M4", {"w"}}}};
  CHECK(flow_reaches(flow, 1, 3));
  CHECK_FALSE(flow_reaches(flow, 3, 1));
  CHECK_FALSE(flow_reaches(flow, 1, 4));
  DependencyGraph g;
  g.upsert(edge("x", "z", PropertyKind::Integrity));
  g.upsert(edge("z", "x", PropertyKind::Integrity));
  g.upsert(edge("x", "w", PropertyKind::Confidentiality));
  g.upsert(edge("p", "y", PropertyKind::Generate));
  g.upsert(edge("x", "q", PropertyKind::Include));
  const FilterResult r = intent_filter(g, flow);
  CHECK(key_set(r.graph) == std::set<EdgeKey>{{"x", "z", PropertyKind::Integrity}});
  std::map<EdgeKey, RemovalReason> reasons;
  for (const Removal& rm : r.removed) reasons[rm.edge.key()] = rm.reason;
  CHECK(reasons.at({"z", "x", PropertyKind::Integrity}) == RemovalReason::NoFlowPath);
  CHECK(reasons.at({"x", "w", PropertyKind::Confidentiality}) == RemovalReason::NoFlowPath);
  CHECK(reasons.at({"p", "y", PropertyKind::Generate}) == RemovalReason::NoFlowPath);
  CHECK(reasons.at({"x", "q", PropertyKind::Include}) == RemovalReason::DestinationAbsent);
  std::ostringstream report;
  write_removals(r.removed, report);
  CHECK(report.str().find("x->q:include confidence=0.9 reason=destination-absent-from-flow") != std::string::npos);
}

TEST_CASE("intent_filter agrees with the recursive chain oracle, is idempotent and shrinks") {
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const DependencyGraph g = random_graph(rng);
    const FlowGraph f = random_flow(rng);
    const FilterResult once = intent_filter(g, f);
    CHECK(key_set(once.graph) == oracle_filter(g, f));
    CHECK(intent_filter(once.graph, f).graph == once.graph);
    CHECK(once.graph.size() + once.removed.size() == g.size());
    for (const auto& [k, e] : once.graph.edges()) CHECK(*g.find(k) == e);
  }
}

TEST_CASE("to_dot examples") {
  const std::string empty = to_dot(DependencyGraph{});
  CHECK(empty.rfind("digraph dependencies {\n", 0) == 0);
  CHECK(empty.find("->") == std::string::npos);
  CHECK(empty.back() == '\n');

  DependencyGraph one;
  one.upsert(edge("KRRCenc", "CipherAlgorithm", PropertyKind::Integrity, 0.5));
  const std::string dot = to_dot(one);
  CHECK(count_of(dot, "->") == 1);
  CHECK(count_of(dot, "label=\"integrity") == 1);

  DependencyGraph inc;
  inc.upsert(edge("establishmentCause", "RRCSetupRequest", PropertyKind::Include));
  inc.upsert(edge("ue-Identity", "RRCSetupRequest", PropertyKind::Include));
  const std::string cluster = to_dot(inc);
  CHECK(count_of(cluster, "subgraph \"cluster_include_") == 1);
  CHECK(cluster.find("label=\"RRCSetupRequest\"") != std::string::npos);
}

TEST_CASE("to_dot is independent of insertion order and omits refuted edges") {
  const std::vector<DependencyEdge> edges = {edge("a", "b", PropertyKind::Integrity),
                                             edge("c", "a", PropertyKind::Include, 0.7),
                                             edge("b", "c", PropertyKind::Generate, 0.8, EdgeProvenance::Expert),
                                             edge("d", "a", PropertyKind::Confidentiality)};
  DependencyGraph forward, backward;
  for (const auto& e : edges) forward.upsert(e);
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) backward.upsert(*it);
  CHECK(to_dot(forward) == to_dot(backward));

  DependencyGraph with_refuted = forward;
  with_refuted.upsert(edge("a", "d", PropertyKind::Accounting, 0.6, EdgeProvenance::Model, EdgeStatus::Refuted));
  CHECK(to_dot(with_refuted).find("accounting") == std::string::npos);
  CHECK(to_dot(with_refuted, {.include_refuted = true}).find("accounting") != std::string::npos);
}

TEST_CASE("to_dot distinguishes distinct graphs") {
  Rng rng(5);
  std::vector<DependencyGraph> graphs;
  for (int i = 0; i < 200; ++i) {
    DependencyGraph g = random_graph(rng);
    graphs.push_back(g);
  }
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    for (std::size_t j = i + 1; j < graphs.size(); ++j) {
      const bool same_graph = graphs[i] == graphs[j];
      const bool same_bytes = to_dot(graphs[i], {.include_refuted = true}) == to_dot(graphs[j], {.include_refuted = true});
      CHECK(same_graph == same_bytes);
    }
  }
}

TEST_CASE("graph text round-trip and errors") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    DependencyGraph g = random_graph(rng);
    if (!g.empty()) {
      DependencyEdge e = g.edges().begin()->second;
      e.confidence = rng.uniform();
      g.upsert(e);
    }
    std::stringstream text;
    write_graph(g, text);
    CHECK(parse_graph(text, "t") == g);
  }
  std::istringstream no_header("node a\n");
  CHECK_THROWS_AS(parse_graph(no_header, "t"), ParseError);
  std::istringstream bad("# protodep-graph v1\nnode a\nedge a b integrity 1.5 model active\n");
  try {
    parse_graph(bad, "t");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream dup("# protodep-graph v1\nedge a b integrity 0.5 model active\nedge a b integrity 0.6 model active\n");
  CHECK_THROWS_AS(parse_graph(dup, "t"), ParseError);
  CHECK_THROWS_AS(load_graph("/nonexistent/graph.txt"), InputError);
}

TEST_CASE("flow text round-trip and errors") {
  const FlowGraph f{{{"UE", "gNB", "RRCSetupRequest", {"ue-Identity", "establishmentCause"}},
                     {"gNB", "UE", "RRCSetup", {}}}};
  std::stringstream text;
  write_flow(f, text);
  CHECK(text.str() == "# protodep-flow v1\nmsg UE gNB RRCSetupRequest ue-Identity,establishmentCause\n"
                      "msg gNB UE RRCSetup -\n");
  CHECK(parse_flow(text, "t") == f);
  std::istringstream repeated("# protodep-flow v1\nmsg UE gNB Cmd a,a\n");
  CHECK_THROWS_AS(parse_flow(repeated, "t"), ParseError);
  std::istringstream short_line("# protodep-flow v1\nmsg UE gNB\n");
  CHECK_THROWS_AS(parse_flow(short_line, "t"), ParseError);
  std::istringstream empty_id("# protodep-flow v1\nmsg UE gNB Cmd a,,b\n");
  CHECK_THROWS_AS(parse_flow(empty_id, "t"), ParseError);
}

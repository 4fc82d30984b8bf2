#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "protodep/errors.hpp"
#include "protodep/feedback.hpp"
#include "protodep/numkit.hpp"

using namespace protodep;
using namespace protodep::feedback;
using depgraph::EdgeProvenance;
using depgraph::EdgeStatus;

namespace {

model::Prediction prediction(const std::string& s, const std::string& d, Probabilities probs) {
  model::Prediction p;
  p.doc_id = "doc";
  p.source = s;
  p.destination = d;
  p.probs = probs;
  return p;
}

DependencyEdge edge(const std::string& s, const std::string& d, PropertyKind p, double c = 0.5) {
  return {s, d, p, c, EdgeProvenance::Model, EdgeStatus::Active};
}

EvidenceRecord record(const std::string& s, const std::string& d, PropertyKind p, Verdict v,
                      const std::string& ts = "t1") {
  return {s, d, p, v, "log:1", ts, "observed"};
}

const char* kKrrLog =
    "2026-03-02T10:15:00Z INFO relay attached to gNB\n"
    "2026-03-02T10:15:02Z PROBE_RESULT probe=probe-integrity-KRRCenc-CipherAlgorithm pair=KRRCenc->CipherAlgorithm "
    "property=integrity verdict=refuted detail=\"mutated CipherAlgorithm accepted; no integrity failure\"\n"
    "2026-03-02T10:15:03Z INFO relay detached\n";

}  // namespace

TEST_CASE("select_low_confidence examples") {
  const model::Thresholds band{0.3, 0.7};
  const std::vector<model::Prediction> p = {prediction("a", "b", {0.95, 0.5, 0.1, 0, 0, 0})};
  const auto sel = select_low_confidence(p, band);
  REQUIRE(sel.size() == 1);
  CHECK(sel[0].property == PropertyKind::Integrity);
  CHECK(sel[0].confidence == 0.5);
  CHECK(select_low_confidence(std::vector<model::Prediction>{prediction("a", "b", {0.9, 0.1, 0, 0, 0, 0})}, band)
            .empty());
  const std::vector<model::Prediction> edges = {prediction("a", "b", {0.7, 0.3, 0.6999, 0, 0, 0})};
  const auto boundary = select_low_confidence(edges, band);
  REQUIRE(boundary.size() == 2);
  CHECK(boundary[0].confidence == 0.6999);
  CHECK(boundary[1].confidence == 0.3);
  CHECK_THROWS_AS(select_low_confidence(edges, model::Thresholds{0.7, 0.3}), ConfigError);
}

TEST_CASE("band, accepted and rejected partition every pair-property") {
  numkit::Rng rng(8);
  const model::Thresholds band{0.3, 0.7};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<model::Prediction> preds;
    for (int i = 0; i < 5; ++i) {
      Probabilities pr{};
      for (double& x : pr) x = static_cast<double>(rng.below(11)) / 10.0;
      preds.push_back(prediction("s" + std::to_string(i), "d", pr));
    }
    const auto low = select_low_confidence(preds, band);
    const auto accepted = depgraph::build_graph(preds, band.high);
    std::size_t rejected = 0;
    for (const auto& p : preds) {
      for (double x : p.probs) rejected += x < band.low ? 1 : 0;
    }
    CHECK(low.size() + accepted.size() + rejected == preds.size() * kNumProperties);
    for (std::size_t i = 1; i < low.size(); ++i) CHECK(low[i - 1].confidence >= low[i].confidence);
    for (const auto& e : low) CHECK_FALSE(accepted.contains(e.key()));
  }
}

TEST_CASE("emit_test_script examples") {
  const DependencyEdge krr = edge("KRRCenc", "CipherAlgorithm", PropertyKind::Integrity, 0.46);
  const std::string script = emit_test_script(krr, default_script_template());
  CHECK(script.find("KRRCenc") != std::string::npos);
  CHECK(script.find("CipherAlgorithm") != std::string::npos);
  CHECK(script.find(std::string(probe_stanza(PropertyKind::Integrity).mutation)) != std::string::npos);
  CHECK(script.find("probe-integrity-KRRCenc-CipherAlgorithm") != std::string::npos);
  CHECK(emit_test_script(krr, default_script_template()) == script);

  std::set<std::string> stanzas, scripts;
  for (PropertyKind p : kAllProperties) {
    stanzas.insert(std::string(probe_stanza(p).mutation) + "|" + std::string(probe_stanza(p).expectation));
    scripts.insert(emit_test_script(edge("a", "b", p), "{{source}} {{destination}} {{property}} {{mutation}}"));
  }
  CHECK(stanzas.size() == kNumProperties);
  CHECK(scripts.size() == kNumProperties);
}

TEST_CASE("emit_test_script rejects bad templates") {
  const DependencyEdge e = edge("a", "b", PropertyKind::Include);
  CHECK_THROWS_AS(emit_test_script(e, "{{source}} {{destination}}"), TemplateError);
  CHECK_THROWS_AS(emit_test_script(e, "{{source}} {{property}}"), TemplateError);
  CHECK_THROWS_AS(emit_test_script(e, "{{destination}} {{property}}"), TemplateError);
  CHECK_THROWS_AS(emit_test_script(e, "{{source}} {{destination}} {{property}} {{nope}}"), TemplateError);
  CHECK_THROWS_AS(emit_test_script(e, "{{source}} {{destination}} {{property"), TemplateError);
  CHECK(emit_test_script(e, "{{source}}/{{destination}}/{{property}}") == "a/b/include");
}

TEST_CASE("parse_evidence_log examples") {
  const EvidenceLog empty = parse_evidence_log(std::string(), "log");
  CHECK(empty.records.empty());
  CHECK(empty.unmatched == 0);

  const EvidenceLog krr = parse_evidence_log(std::string(kKrrLog), "fuzz.log");
  REQUIRE(krr.records.size() == 1);
  CHECK(krr.unmatched == 2);
  const EvidenceRecord& r = krr.records[0];
  CHECK(r.source == "KRRCenc");
  CHECK(r.destination == "CipherAlgorithm");
  CHECK(r.property == PropertyKind::Integrity);
  CHECK(r.verdict == Verdict::Refuted);
  CHECK(r.evidence_ref == "fuzz.log:2");
  CHECK(r.timestamp == "2026-03-02T10:15:02Z");
  CHECK(r.detail == "mutated CipherAlgorithm accepted; no integrity failure");

  const std::string bad = "x INFO ok\nt PROBE_RESULT probe=p pair=a->b property=integrity verdict=maybe detail=\"\"\n";
  try {
    parse_evidence_log(bad, "log");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_evidence_log(std::string("t PROBE_RESULT probe=p pair=ab property=integrity "
                                                 "verdict=refuted detail=\"\"\n"),
                                     "log"),
                  ParseError);
}

TEST_CASE("evidence lines round-trip through the parser") {
  EvidenceRecord r = record("ue-Identity", "RRCSetupRequest", PropertyKind::Include, Verdict::Confirmed, "sim-000004");
  r.detail = "quote \" and backslash \\ kept";
  const EvidenceLog log = parse_evidence_log(format_evidence_line(r), "x");
  REQUIRE(log.records.size() == 1);
  EvidenceRecord back = log.records[0];
  CHECK(back.evidence_ref == "x:1");
  back.evidence_ref = r.evidence_ref;
  CHECK(back == r);
}

TEST_CASE("apply_evidence examples") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity, 0.5));
  const GroundTruthStore empty;

  const EvidenceRecord refute_absent = record("x", "y", PropertyKind::Integrity, Verdict::Refuted);
  const ApplyResult r1 = apply_evidence(g, empty, std::vector{refute_absent});
  CHECK(r1.graph == g);
  CHECK(r1.store.size() == 1);

  const EvidenceRecord confirm = record("a", "b", PropertyKind::Integrity, Verdict::Confirmed);
  const ApplyResult r2 = apply_evidence(g, empty, std::vector{confirm});
  const DependencyEdge* ab = r2.graph.find({"a", "b", PropertyKind::Integrity});
  CHECK(ab->confidence == 1.0);
  CHECK(ab->provenance == EdgeProvenance::EvidenceConfirmed);
  CHECK(ab->active());

  const EvidenceRecord refute = record("a", "b", PropertyKind::Integrity, Verdict::Refuted);
  const ApplyResult r3 = apply_evidence(g, empty, std::vector{refute});
  CHECK(r3.graph.size() == 1);
  CHECK(r3.graph.find({"a", "b", PropertyKind::Integrity})->status == EdgeStatus::Refuted);

  const EvidenceRecord confirm_new = record("c", "d", PropertyKind::Generate, Verdict::Confirmed);
  const ApplyResult r4 = apply_evidence(g, empty, std::vector{confirm_new});
  CHECK(r4.graph.find({"c", "d", PropertyKind::Generate})->confidence == 1.0);
}

TEST_CASE("apply_evidence twice is idempotent on the graph and grows the store") {
  DependencyGraph g;
  g.upsert(edge("a", "b", PropertyKind::Integrity, 0.5));
  g.upsert(edge("b", "c", PropertyKind::Include, 0.6));
  const std::vector<EvidenceRecord> recs = {record("a", "b", PropertyKind::Integrity, Verdict::Confirmed),
                                            record("b", "c", PropertyKind::Include, Verdict::Refuted),
                                            record("b", "c", PropertyKind::Include, Verdict::Confirmed)};
  const ApplyResult once = apply_evidence(g, GroundTruthStore{}, recs);
  const ApplyResult twice = apply_evidence(once.graph, once.store, recs);
  CHECK(twice.graph == once.graph);
  CHECK(once.graph.find({"b", "c", PropertyKind::Include})->status == EdgeStatus::Refuted);
  REQUIRE(twice.store.size() == 6);
  std::set<std::uint64_t> ticks;
  for (const auto& e : twice.store.entries()) ticks.insert(e.recorded_at);
  CHECK(ticks.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) CHECK(twice.store.entries()[i] == once.store.entries()[i]);
  CHECK(once.graph.size() == g.size());

  std::ostringstream before, after;
  once.store.write(before);
  twice.store.write(after);
  CHECK(after.str().size() > before.str().size());
  CHECK(after.str().rfind(before.str(), 0) == 0);
}

TEST_CASE("ground-truth store round-trip") {
  GroundTruthStore s;
  s.append(record("a", "b", PropertyKind::Integrity, Verdict::Confirmed, "t1"));
  s.append(record("a", "b", PropertyKind::Integrity, Verdict::Refuted, "t2"));
  std::stringstream text;
  s.write(text);
  CHECK(GroundTruthStore::parse(text, "s") == s);
  const auto path = std::filesystem::temp_directory_path() / "protodep_store_test.jsonl";
  std::filesystem::remove(path);
  CHECK(GroundTruthStore::load(path).size() == 0);
  s.save(path);
  CHECK(GroundTruthStore::load(path) == s);
  std::filesystem::remove(path);

  std::istringstream unordered(R"({"format":"protodep.groundtruth","version":1}
{"recorded_at":2,"source":"a","destination":"b","property":"integrity","verdict":"refuted","evidence_ref":"r","timestamp":"t"}
{"recorded_at":2,"source":"a","destination":"b","property":"integrity","verdict":"refuted","evidence_ref":"r","timestamp":"t"}
)");
  CHECK_THROWS_AS(GroundTruthStore::parse(unordered, "s"), ParseError);
  GroundTruthStore bad;
  EvidenceRecord no_ref = record("a", "b", PropertyKind::Integrity, Verdict::Refuted);
  no_ref.evidence_ref.clear();
  CHECK_THROWS_AS(bad.append(no_ref), InputError);
}

TEST_CASE("evidence_samples label the confirmed properties") {
  GroundTruthStore s;
  s.append(record("a", "b", PropertyKind::Integrity, Verdict::Confirmed));
  s.append(record("a", "b", PropertyKind::Include, Verdict::Confirmed));
  s.append(record("a", "b", PropertyKind::Include, Verdict::Refuted));
  s.append(record("b", "c", PropertyKind::Accounting, Verdict::Refuted));
  s.append(record("x", "y", PropertyKind::Accounting, Verdict::Confirmed));
  const std::vector<corpus::Section> sections = {{"doc", "1", "text one", {"a", "b", "c"}},
                                                 {"doc", "2", "text two", {"a", "b"}}};
  const auto rows = evidence_samples(s, sections);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].source == "a");
  CHECK(rows[0].section_id == "1");
  CHECK(rows[0].context == "text one");
  CHECK(rows[0].labels == Labels{false, true, false, false, false, false});
  CHECK(rows[0].provenance == corpus::Provenance::Evidence);
  CHECK(rows[1].source == "b");
  CHECK_FALSE(any_label(rows[1].labels));
}

TEST_CASE("simulated_oracle examples") {
  std::istringstream text("# protodep-truth v1\nKRRCenc CipherAlgorithm integrity false\na b include true\n");
  const TruthTable t = TruthTable::parse(text, "truth");
  const EvidenceRecord refuted = simulated_oracle(edge("KRRCenc", "CipherAlgorithm", PropertyKind::Integrity), t, 3);
  CHECK(refuted.verdict == Verdict::Refuted);
  CHECK(refuted.evidence_ref == "simulated:KRRCenc->CipherAlgorithm:integrity");
  CHECK(refuted.timestamp == "sim-000003");
  CHECK(simulated_oracle(edge("a", "b", PropertyKind::Include), t, 4).verdict == Verdict::Confirmed);
  CHECK_THROWS_AS(simulated_oracle(edge("a", "b", PropertyKind::Generate), t, 5), LookupError);

  std::istringstream with_default("# protodep-truth v1\ndefault true\n");
  const TruthTable d = TruthTable::parse(with_default, "truth");
  CHECK(simulated_oracle(edge("a", "b", PropertyKind::Generate), d, 1).verdict == Verdict::Confirmed);

  std::istringstream bad("# protodep-truth v1\na b include maybe\n");
  CHECK_THROWS_AS(TruthTable::parse(bad, "truth"), ParseError);
  std::istringstream dup("# protodep-truth v1\na b include true\na b include false\n");
  CHECK_THROWS_AS(TruthTable::parse(dup, "truth"), ParseError);
}

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "protodep/corpus.hpp"
#include "protodep/errors.hpp"
#include "protodep/numkit.hpp"

using namespace protodep;
using namespace protodep::corpus;

namespace {

const char* kHeader = R"({"format":"protodep.annotations","version":1})";

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_annotations(in, "test");
}

Section section(const std::string& id, std::vector<std::string> identifiers) {
  return {"doc", id, "context of " + id, std::move(identifiers)};
}

AnnotatedSample positive(const std::string& sec, const std::string& s, const std::string& d, PropertyKind p) {
  AnnotatedSample a;
  a.doc_id = "doc";
  a.section_id = sec;
  a.context = "context of " + sec;
  a.source = s;
  a.destination = d;
  a.labels[index_of(p)] = true;
  return a;
}

std::vector<AnnotatedSample> samples_with_include(std::initializer_list<bool> flags) {
  std::vector<AnnotatedSample> out;
  int i = 0;
  for (bool f : flags) {
    AnnotatedSample s = positive("1", "s" + std::to_string(i), "d" + std::to_string(i), PropertyKind::Include);
    s.labels[index_of(PropertyKind::Include)] = f;
    if (!f) s.provenance = Provenance::GeneratedNegative;
    out.push_back(s);
    ++i;
  }
  return out;
}

}  // namespace

TEST_CASE("property names round-trip") {
  for (PropertyKind p : kAllProperties) CHECK(parse_property(property_name(p)) == p);
  CHECK(parse_property("Integrity") == PropertyKind::Integrity);
  CHECK_FALSE(parse_property("secrecy").has_value());
  CHECK(index_of(PropertyKind::Generate) == 5);
}

TEST_CASE("load_annotations examples") {
  CHECK(parse("").samples.empty());
  CHECK(parse(std::string(kHeader) + "\n").samples.empty());

  const std::string good = std::string(kHeader) + "\n" +
                           R"({"type":"sample","doc_id":"38.331","section_id":"6.2.2","source":"establishmentCause",)"
                           R"("destination":"RRCSetupRequest","labels":["include"],"context":"text"})" "\n";
  const Corpus c = parse(good);
  REQUIRE(c.samples.size() == 1);
  CHECK(c.samples[0].labels == Labels{false, false, false, false, true, false});
  CHECK(c.samples[0].provenance == Provenance::Expert);

  const std::string self = std::string(kHeader) + "\n" +
                           R"({"type":"sample","doc_id":"d","section_id":"s","source":"x","destination":"x",)"
                           R"("labels":["include"],"context":"t"})";
  CHECK_THROWS_AS(parse(self), ParseError);
}

TEST_CASE("load_annotations reports line numbers and duplicates") {
  const std::string bad = std::string(kHeader) + "\n\n{not json}\n";
  try {
    parse(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse(R"({"type":"section"})"), ParseError);
  const std::string rec = R"({"type":"sample","doc_id":"d","section_id":"s","source":"a","destination":"b",)"
                          R"("labels":["integrity"],"context":"t"})";
  const std::string dup = std::string(kHeader) + "\n" + rec + "\n" + rec + "\n";
  try {
    parse(dup);
    FAIL("expected duplicate error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a -> b") != std::string::npos);
    CHECK(msg.find("2 3") != std::string::npos);
  }
  const std::string unlabeled = std::string(kHeader) + "\n" +
                                R"({"type":"sample","doc_id":"d","section_id":"s","source":"a","destination":"b",)"
                                R"("labels":[],"context":"t"})";
  CHECK_THROWS_AS(parse(unlabeled), ParseError);
  const std::string bad_prop = std::string(kHeader) + "\n" +
                               R"({"type":"sample","doc_id":"d","section_id":"s","source":"a","destination":"b",)"
                               R"("labels":["secrecy"],"context":"t"})";
  CHECK_THROWS_AS(parse(bad_prop), ParseError);
}

TEST_CASE("annotation round-trip is lossless") {
  Corpus c;
  c.sections.push_back(section("5.3.3", {"a", "b", "c"}));
  c.samples.push_back(positive("5.3.3", "a", "b", PropertyKind::Integrity));
  c.samples.back().labels[index_of(PropertyKind::Include)] = true;
  AnnotatedSample ev = positive("5.3.3", "b", "c", PropertyKind::Generate);
  ev.provenance = Provenance::Evidence;
  ev.context = "inline \"quoted\" context";
  c.samples.push_back(ev);
  AnnotatedSample neg = positive("5.3.3", "c", "a", PropertyKind::Generate);
  neg.labels = {};
  neg.provenance = Provenance::GeneratedNegative;
  c.samples.push_back(neg);

  std::stringstream first;
  write_annotations(c, first);
  const Corpus back = parse(first.str());
  CHECK(back == c);
  std::stringstream second;
  write_annotations(back, second);
  CHECK(second.str() == first.str());

  const auto path = std::filesystem::temp_directory_path() / "protodep_corpus_roundtrip.jsonl";
  save_annotations(c, path);
  CHECK(load_annotations(path) == c);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_annotations(path), InputError);
}

TEST_CASE("generate_pairs examples") {
  const std::vector<Section> secs = {section("1", {"a", "b", "c", "d"})};
  const std::vector<AnnotatedSample> pos = {positive("1", "a", "b", PropertyKind::Include),
                                            positive("1", "c", "d", PropertyKind::Integrity)};
  const auto all = generate_pairs(secs, pos);
  CHECK(all.size() == 12);
  CHECK(std::count_if(all.begin(), all.end(),
                      [](const auto& s) { return s.provenance == Provenance::GeneratedNegative; }) == 10);
  CHECK(all[0] == pos[0]);
  CHECK(all[1] == pos[1]);
  for (const auto& s : all) {
    CHECK(s.source != s.destination);
    CHECK(any_label(s.labels) == (s.provenance != Provenance::GeneratedNegative));
  }
  CHECK(generate_pairs({section("2", {"only"})}, {}).empty());
  CHECK(generate_pairs(secs, pos) == all);
  CHECK_THROWS_AS(generate_pairs({section("3", {"a", "a"})}, {}), InputError);
}

TEST_CASE("generate_pairs yields k(k-1) per section") {
  for (std::size_t k = 0; k < 7; ++k) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back("id" + std::to_string(i));
    std::vector<AnnotatedSample> pos;
    if (k >= 2) pos.push_back(positive("s", "id0", "id1", PropertyKind::Accounting));
    CHECK(generate_pairs({section("s", ids)}, pos).size() == k * (k == 0 ? 0 : k - 1));
  }
}

TEST_CASE("class_stats examples") {
  const auto s = samples_with_include({true, true, false});
  const ClassStats st = class_stats(s);
  CHECK(st.positives[index_of(PropertyKind::Include)] == 2);
  CHECK(st.negatives[index_of(PropertyKind::Include)] == 1);
  for (std::size_t p = 0; p < kNumProperties; ++p) CHECK(st.positives[p] + st.negatives[p] == st.total);
  const ClassStats none = class_stats(samples_with_include({false, false}));
  for (std::size_t p = 0; p < kNumProperties; ++p) CHECK(none.positives[p] == 0);
  CHECK(st.weight(index_of(PropertyKind::Include), true) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(ClassStats{}.weight(0, true), ConfigError);
}

TEST_CASE("intersection_counts examples") {
  std::vector<AnnotatedSample> s = samples_with_include({true, true, true, false});
  s[2].labels[index_of(PropertyKind::Integrity)] = true;
  const auto counts = intersection_counts(s);
  Labels inc{}, both{};
  inc[index_of(PropertyKind::Include)] = true;
  both = inc;
  both[index_of(PropertyKind::Integrity)] = true;
  CHECK(counts.size() == 2);
  CHECK(counts.at(inc) == 2);
  CHECK(counts.at(both) == 1);
  std::size_t total = 0;
  for (const auto& [k, v] : counts) total += v;
  CHECK(total == 3);
  CHECK(labels_to_string(both) == "{integrity,include}");
}

TEST_CASE("split examples") {
  std::vector<AnnotatedSample> ten = samples_with_include({false, false, false, false, false, false, false, false,
                                                           false, false});
  auto [tr, va] = split(ten, 0.9, 3);
  CHECK(tr.size() == 9);
  CHECK(va.size() == 1);
  auto [tr2, va2] = split(ten, 0.9, 3);
  CHECK(tr2 == tr);
  CHECK(va2 == va);
  CHECK_THROWS_AS(split(ten, 1.0, 3), ConfigError);

  std::vector<bool> flags(20, false);
  flags[4] = flags[11] = true;
  std::vector<AnnotatedSample> twenty;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    AnnotatedSample s = positive("1", "s" + std::to_string(i), "d" + std::to_string(i), PropertyKind::Include);
    if (!flags[i]) {
      s.labels = {};
      s.provenance = Provenance::GeneratedNegative;
    }
    twenty.push_back(s);
  }
  // round(0.1 * 2) = 0 positives go to validation, and moving one would
  // leave include with a single training positive anyway.
  auto [t3, v3] = split(twenty, 0.9, 11);
  CHECK(t3.size() == 18);
  CHECK(v3.size() == 2);
  CHECK(std::count_if(t3.begin(), t3.end(), [](const auto& s) { return any_label(s.labels); }) == 2);
}

TEST_CASE("split keeps every property represented in training") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    numkit::Rng rng(seed);
    std::vector<AnnotatedSample> s;
    for (int i = 0; i < 40; ++i) {
      AnnotatedSample a = positive("1", "s" + std::to_string(i), "d" + std::to_string(i), PropertyKind::Include);
      a.labels = {};
      if (rng.below(4) == 0) a.labels[rng.below(kNumProperties)] = true;
      if (!any_label(a.labels)) a.provenance = Provenance::GeneratedNegative;
      s.push_back(a);
    }
    auto [tr, va] = split(s, 0.8, seed);
    CHECK(tr.size() + va.size() == s.size());
    const ClassStats all = class_stats(s);
    const ClassStats train = class_stats(tr);
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      if (all.positives[p] > 0) CHECK(train.positives[p] > 0);
    }
    std::set<std::string> names;
    for (const auto* part : {&tr, &va}) {
      for (const auto& a : *part) names.insert(a.source);
    }
    CHECK(names.size() == s.size());
  }
}

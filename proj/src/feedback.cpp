#include "protodep/feedback.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protodep/errors.hpp"

namespace protodep::feedback {

using nlohmann::ordered_json;

namespace {

constexpr const char* kStoreFormat = "protodep.groundtruth";
constexpr int kStoreVersion = 1;
constexpr std::string_view kTruthHeader = "# protodep-truth v1";

const std::array<ProbeStanza, kNumProperties> kStanzas = {{
    {"send the destination without the protection derived from the source",
     "the receiver must not accept or reveal the unprotected destination"},
    {"corrupt the destination payload while keeping the source-derived integrity check",
     "the receiver rejects the corrupted message"},
    {"substitute the source with a value from another session",
     "the receiver fails to authenticate the destination"},
    {"replay the destination with a stale source counter",
     "the receiver detects the replay and discards it"},
    {"drop the source field from the destination message",
     "the receiver reports a missing or undecodable field"},
    {"derive the destination from a mutated source",
     "the receiver's derived destination no longer matches"},
}};

const std::string kDefaultTemplate =
    "# probe {{probe_id}}\n"
    "# dependency {{source}} -> {{destination}} ({{property}}, confidence {{confidence}})\n"
    "probe \"{{probe_id}}\" {\n"
    "  pair        = \"{{source}}->{{destination}}\"\n"
    "  property    = \"{{property}}\"\n"
    "  mutation    = \"{{mutation}}\"\n"
    "  expect      = \"{{expectation}}\"\n"
    "  on_expected = \"verdict=confirmed\"\n"
    "  otherwise   = \"verdict=refuted\"\n"
    "}\n";

std::string escape_detail(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

std::string unescape_detail(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      out += s[i] == 'n' ? '\n' : s[i];
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

ordered_json entry_to_json(const StoreEntry& e) {
  ordered_json j;
  j["recorded_at"] = e.recorded_at;
  j["source"] = e.record.source;
  j["destination"] = e.record.destination;
  j["property"] = std::string(property_name(e.record.property));
  j["verdict"] = std::string(verdict_name(e.record.verdict));
  j["evidence_ref"] = e.record.evidence_ref;
  j["timestamp"] = e.record.timestamp;
  j["detail"] = e.record.detail;
  return j;
}

void validate_record(const EvidenceRecord& r) {
  if (!depgraph::valid_identifier(r.source) || !depgraph::valid_identifier(r.destination)) {
    throw InputError("evidence record has an invalid identifier");
  }
  if (r.source == r.destination) throw InputError("evidence record pairs '" + r.source + "' with itself");
  if (r.evidence_ref.empty()) throw InputError("evidence record for " + key_string(r.key()) + " has no evidence_ref");
  if (r.timestamp.empty() || r.timestamp.find_first_of(" \t\n") != std::string::npos) {
    throw InputError("evidence record for " + key_string(r.key()) + " has an invalid timestamp");
  }
}

}  // namespace

using depgraph::key_string;

std::string_view verdict_name(Verdict v) noexcept { return v == Verdict::Confirmed ? "confirmed" : "refuted"; }

std::optional<Verdict> parse_verdict(std::string_view s) noexcept {
  if (s == "confirmed") return Verdict::Confirmed;
  if (s == "refuted") return Verdict::Refuted;
  return std::nullopt;
}

std::vector<DependencyEdge> select_low_confidence(std::span<const model::Prediction> predictions,
                                                  const model::Thresholds& band) {
  band.validate();
  std::vector<DependencyEdge> out;
  for (const model::Prediction& p : predictions) {
    for (PropertyKind k : kAllProperties) {
      const double prob = p.probs[index_of(k)];
      if (band.classify(prob) != model::Confidence::LowConfidence) continue;
      out.push_back({p.source, p.destination, k, prob, depgraph::EdgeProvenance::Model,
                     depgraph::EdgeStatus::Active});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const DependencyEdge& a, const DependencyEdge& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.key() < b.key();
  });
  return out;
}

// ---------------------------------------------------------------------------

const ProbeStanza& probe_stanza(PropertyKind p) noexcept { return kStanzas[index_of(p)]; }

std::string probe_id(const EdgeKey& key) {
  return "probe-" + std::string(property_name(key.property)) + "-" + key.source + "-" + key.destination;
}

const std::string& default_script_template() { return kDefaultTemplate; }

std::string emit_test_script(const DependencyEdge& edge, const std::string& template_text) {
  const ProbeStanza& stanza = probe_stanza(edge.property);
  const std::map<std::string, std::string> values = {
      {"source", edge.source},
      {"destination", edge.destination},
      {"property", std::string(property_name(edge.property))},
      {"probe_id", probe_id(edge.key())},
      {"mutation", std::string(stanza.mutation)},
      {"expectation", std::string(stanza.expectation)},
      {"confidence", depgraph::format_number(edge.confidence)},
  };
  std::set<std::string> used;
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = template_text.find("{{", pos);
    if (open == std::string::npos) {
      out.append(template_text, pos, std::string::npos);
      break;
    }
    const std::size_t close = template_text.find("}}", open + 2);
    if (close == std::string::npos) throw TemplateError("unterminated placeholder in script template");
    const std::string name = template_text.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it == values.end()) throw TemplateError("unknown placeholder {{" + name + "}} in script template");
    out.append(template_text, pos, open - pos);
    out += it->second;
    used.insert(name);
    pos = close + 2;
  }
  for (const char* required : {"source", "destination", "property"}) {
    if (used.count(required) == 0) {
      throw TemplateError(std::string("script template lacks the {{") + required + "}} placeholder");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

EvidenceLog parse_evidence_log(std::istream& in, const std::string& origin) {
  static const std::regex kBody(
      R"re(probe=(\S+) pair=(\S+?)->(\S+) property=(\S+) verdict=(\S+) detail="((?:[^"\\]|\\.)*)")re");
  EvidenceLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    std::istringstream fields(t);
    std::string timestamp, tag;
    fields >> timestamp >> tag;
    if (tag != "PROBE_RESULT") {
      if (!t.empty()) ++log.unmatched;
      continue;
    }
    std::string body;
    std::getline(fields, body);
    body = trim(body);
    std::smatch m;
    if (!std::regex_match(body, m, kBody)) throw ParseError(origin, line_no, "malformed PROBE_RESULT line");
    EvidenceRecord r;
    r.timestamp = timestamp;
    r.source = m[2];
    r.destination = m[3];
    const auto prop = parse_property(m[4].str());
    if (!prop) throw ParseError(origin, line_no, "unknown property '" + m[4].str() + "'");
    const auto verdict = parse_verdict(m[5].str());
    if (!verdict) throw ParseError(origin, line_no, "unknown verdict '" + m[5].str() + "'");
    r.property = *prop;
    r.verdict = *verdict;
    r.detail = unescape_detail(m[6]);
    r.evidence_ref = origin + ":" + std::to_string(line_no);
    try {
      validate_record(r);
    } catch (const InputError& e) {
      throw ParseError(origin, line_no, e.what());
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

EvidenceLog parse_evidence_log(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return parse_evidence_log(in, origin);
}

std::string format_evidence_line(const EvidenceRecord& r) {
  return r.timestamp + " PROBE_RESULT probe=" + probe_id(r.key()) + " pair=" + r.source + "->" + r.destination +
         " property=" + std::string(property_name(r.property)) + " verdict=" + std::string(verdict_name(r.verdict)) +
         " detail=\"" + escape_detail(r.detail) + "\"\n";
}

// ---------------------------------------------------------------------------

void GroundTruthStore::append(const EvidenceRecord& record) {
  validate_record(record);
  const std::uint64_t tick = entries_.empty() ? 1 : entries_.back().recorded_at + 1;
  entries_.push_back({tick, record});
}

void GroundTruthStore::write(std::ostream& out) const {
  ordered_json header;
  header["format"] = kStoreFormat;
  header["version"] = kStoreVersion;
  out << header.dump() << "\n";
  for (const StoreEntry& e : entries_) out << entry_to_json(e).dump() << "\n";
}

GroundTruthStore GroundTruthStore::parse(std::istream& in, const std::string& origin) {
  GroundTruthStore store;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!seen_header) {
      if (j.value("format", "") != kStoreFormat || j.value("version", 0) != kStoreVersion) {
        throw ParseError(origin, line_no, "expected ground-truth store header");
      }
      seen_header = true;
      continue;
    }
    try {
      StoreEntry e;
      e.recorded_at = j.at("recorded_at").get<std::uint64_t>();
      e.record.source = j.at("source").get<std::string>();
      e.record.destination = j.at("destination").get<std::string>();
      const auto prop = parse_property(j.at("property").get<std::string>());
      const auto verdict = parse_verdict(j.at("verdict").get<std::string>());
      if (!prop || !verdict) throw ParseError(origin, line_no, "unknown property or verdict");
      e.record.property = *prop;
      e.record.verdict = *verdict;
      e.record.evidence_ref = j.at("evidence_ref").get<std::string>();
      e.record.timestamp = j.at("timestamp").get<std::string>();
      e.record.detail = j.value("detail", "");
      validate_record(e.record);
      if (!store.entries_.empty() && e.recorded_at <= store.entries_.back().recorded_at) {
        throw ParseError(origin, line_no, "recorded_at must increase strictly");
      }
      store.entries_.push_back(std::move(e));
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin, line_no, e.what());
    } catch (const InputError& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
  return store;
}

void GroundTruthStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write(out);
}

GroundTruthStore GroundTruthStore::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse(in, path.string());
}

ApplyResult apply_evidence(const DependencyGraph& graph, const GroundTruthStore& store,
                           std::span<const EvidenceRecord> records) {
  ApplyResult result{graph, store};
  std::map<EdgeKey, std::pair<bool, bool>> verdicts;  // (confirmed, refuted)
  for (const EvidenceRecord& r : records) {
    result.store.append(r);
    auto& v = verdicts[r.key()];
    (r.verdict == Verdict::Confirmed ? v.first : v.second) = true;
  }
  for (const auto& [key, v] : verdicts) {
    const auto [confirmed, refuted] = v;
    if (confirmed) {
      DependencyEdge e{key.source, key.destination, key.property, 1.0, depgraph::EdgeProvenance::EvidenceConfirmed,
                       depgraph::EdgeStatus::Active};
      if (const DependencyEdge* existing = result.graph.find(key)) e.status = existing->status;
      result.graph.upsert(e);
    }
    if (refuted) {
      if (const DependencyEdge* existing = result.graph.find(key)) {
        DependencyEdge e = *existing;
        e.status = depgraph::EdgeStatus::Refuted;
        result.graph.upsert(e);
      }
    }
  }
  return result;
}

std::vector<corpus::AnnotatedSample> evidence_samples(const GroundTruthStore& store,
                                                      std::span<const corpus::Section> sections) {
  std::map<std::pair<std::string, std::string>, std::pair<Labels, Labels>> pairs;  // (confirmed, refuted)
  for (const StoreEntry& e : store.entries()) {
    auto& [confirmed, refuted] = pairs[{e.record.source, e.record.destination}];
    (e.record.verdict == Verdict::Confirmed ? confirmed : refuted)[index_of(e.record.property)] = true;
  }
  std::vector<corpus::AnnotatedSample> out;
  for (const auto& [pair, verdicts] : pairs) {
    const corpus::Section* home = nullptr;
    for (const corpus::Section& s : sections) {
      const auto& ids = s.identifiers;
      if (std::find(ids.begin(), ids.end(), pair.first) != ids.end() &&
          std::find(ids.begin(), ids.end(), pair.second) != ids.end()) {
        home = &s;
        break;
      }
    }
    if (home == nullptr) continue;
    corpus::AnnotatedSample a;
    a.doc_id = home->doc_id;
    a.section_id = home->section_id;
    a.context = home->context;
    a.source = pair.first;
    a.destination = pair.second;
    for (std::size_t k = 0; k < kNumProperties; ++k) a.labels[k] = verdicts.first[k] && !verdicts.second[k];
    a.provenance = corpus::Provenance::Evidence;
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------

TruthTable TruthTable::parse(std::istream& in, const std::string& origin) {
  TruthTable table;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  auto parse_bool = [&](const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ParseError(origin, line_no, "expected true or false, got '" + s + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != kTruthHeader) throw ParseError(origin, line_no, "expected header '" + std::string(kTruthHeader) + "'");
      seen_header = true;
      continue;
    }
    if (t.front() == '#') continue;
    std::istringstream fields(t);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.size() == 2 && f[0] == "default") {
      if (table.fallback) throw ParseError(origin, line_no, "default given twice");
      table.fallback = parse_bool(f[1]);
      continue;
    }
    if (f.size() != 4) throw ParseError(origin, line_no, "expected '<source> <destination> <property> true|false'");
    const auto prop = parse_property(f[2]);
    if (!prop) throw ParseError(origin, line_no, "unknown property '" + f[2] + "'");
    const EdgeKey key{f[0], f[1], *prop};
    if (!table.entries.emplace(key, parse_bool(f[3])).second) {
      throw ParseError(origin, line_no, "duplicate entry " + key_string(key));
    }
  }
  if (!seen_header) throw ParseError(origin, 1, "missing header");
  return table;
}

TruthTable TruthTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse(in, path.string());
}

EvidenceRecord simulated_oracle(const DependencyEdge& edge, const TruthTable& table, std::uint64_t tick) {
  const EdgeKey key = edge.key();
  bool holds = false;
  if (auto it = table.entries.find(key); it != table.entries.end()) {
    holds = it->second;
  } else if (table.fallback) {
    holds = *table.fallback;
  } else {
    throw LookupError("truth table does not cover " + key_string(key) + " and has no default");
  }
  EvidenceRecord r;
  r.source = edge.source;
  r.destination = edge.destination;
  r.property = edge.property;
  r.verdict = holds ? Verdict::Confirmed : Verdict::Refuted;
  r.evidence_ref = "simulated:" + key_string(key);
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "sim-%06llu", static_cast<unsigned long long>(tick));
  r.timestamp = stamp;
  r.detail = holds ? "expected outcome observed" : "mutation had no observable effect";
  return r;
}

}  // namespace protodep::feedback

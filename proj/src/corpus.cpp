#include "protodep/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "protodep/errors.hpp"
#include "protodep/numkit.hpp"

namespace protodep::corpus {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "protodep.annotations";
constexpr int kVersion = 1;

std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "expert") return Provenance::Expert;
  if (s == "generated-negative") return Provenance::GeneratedNegative;
  if (s == "evidence") return Provenance::Evidence;
  return std::nullopt;
}

json labels_to_json(const Labels& labels) {
  json arr = json::array();
  for (PropertyKind p : kAllProperties) {
    if (labels[index_of(p)]) arr.push_back(std::string(property_name(p)));
  }
  return arr;
}

std::string required_string(const json& rec, const char* key, const std::string& origin, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError(origin, line, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view provenance_name(Provenance p) noexcept {
  switch (p) {
    case Provenance::Expert:
      return "expert";
    case Provenance::GeneratedNegative:
      return "generated-negative";
    case Provenance::Evidence:
      return "evidence";
  }
  return "expert";
}

const Section* Corpus::find_section(const std::string& doc_id, const std::string& section_id) const {
  for (const Section& s : sections) {
    if (s.doc_id == doc_id && s.section_id == section_id) return &s;
  }
  return nullptr;
}

double ClassStats::weight(std::size_t property, bool label) const {
  if (total == 0) throw ConfigError("class statistics are empty (N = 0)");
  const std::size_t n = label ? positives[property] : negatives[property];
  return 1.0 - static_cast<double>(n) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

Corpus parse_annotations(std::istream& in, const std::string& origin) {
  Corpus corpus;
  std::string text;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::vector<std::pair<std::size_t, json>> pending;  // samples, resolved after all sections

  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(origin, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(origin, line_no, "record is not an object");
    if (!seen_header) {
      if (rec.value("format", "") != kFormat) {
        throw ParseError(origin, line_no, std::string("expected header with format '") + kFormat + "'");
      }
      if (rec.value("version", 0) != kVersion) {
        throw ParseError(origin, line_no, "unsupported annotation version");
      }
      seen_header = true;
      continue;
    }
    const std::string type = required_string(rec, "type", origin, line_no);
    if (type == "section") {
      Section s;
      s.doc_id = required_string(rec, "doc_id", origin, line_no);
      s.section_id = required_string(rec, "section_id", origin, line_no);
      s.context = required_string(rec, "context", origin, line_no);
      for (const auto& id : rec.value("identifiers", json::array())) {
        if (!id.is_string()) throw ParseError(origin, line_no, "identifier is not a string");
        s.identifiers.push_back(id.get<std::string>());
      }
      if (corpus.find_section(s.doc_id, s.section_id)) {
        throw ParseError(origin, line_no, "duplicate section " + s.doc_id + "/" + s.section_id);
      }
      corpus.sections.push_back(std::move(s));
    } else if (type == "sample") {
      pending.emplace_back(line_no, std::move(rec));
    } else {
      throw ParseError(origin, line_no, "unknown record type '" + type + "'");
    }
  }

  std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::size_t>> seen;
  for (auto& [line, rec] : pending) {
    AnnotatedSample s;
    s.doc_id = required_string(rec, "doc_id", origin, line);
    s.section_id = required_string(rec, "section_id", origin, line);
    s.source = required_string(rec, "source", origin, line);
    s.destination = required_string(rec, "destination", origin, line);
    if (s.source == s.destination) {
      throw ParseError(origin, line, "source and destination are both '" + s.source + "'");
    }
    if (auto it = rec.find("context"); it != rec.end() && it->is_string()) {
      s.context = it->get<std::string>();
    } else if (const Section* sec = corpus.find_section(s.doc_id, s.section_id)) {
      s.context = sec->context;
    } else {
      throw ParseError(origin, line, "no context and no section " + s.doc_id + "/" + s.section_id);
    }
    for (const auto& name : rec.value("labels", json::array())) {
      auto p = name.is_string() ? parse_property(name.get<std::string>()) : std::nullopt;
      if (!p) throw ParseError(origin, line, "unknown property " + name.dump());
      s.labels[index_of(*p)] = true;
    }
    auto prov = parse_provenance(rec.value("provenance", "expert"));
    if (!prov) throw ParseError(origin, line, "unknown provenance " + rec["provenance"].dump());
    s.provenance = *prov;
    if (s.provenance == Provenance::Expert && !any_label(s.labels)) {
      throw ParseError(origin, line, "expert sample without any property");
    }
    if (s.provenance == Provenance::GeneratedNegative && any_label(s.labels)) {
      throw ParseError(origin, line, "generated negative carries a property");
    }
    seen[{s.doc_id, s.source, s.destination}].push_back(line);
    corpus.samples.push_back(std::move(s));
  }

  std::string duplicates;
  for (const auto& [key, lines] : seen) {
    if (lines.size() < 2) continue;
    duplicates += "\n  " + std::get<0>(key) + ": " + std::get<1>(key) + " -> " + std::get<2>(key) + " (lines";
    for (std::size_t l : lines) duplicates += " " + std::to_string(l);
    duplicates += ")";
  }
  if (!duplicates.empty()) throw InputError(origin + ": duplicate samples:" + duplicates);
  return corpus;
}

Corpus load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotation file " + path.string());
  return parse_annotations(in, path.string());
}

void write_annotations(const Corpus& corpus, std::ostream& out) {
  out << json{{"format", kFormat}, {"version", kVersion}}.dump() << '\n';
  for (const Section& s : corpus.sections) {
    json rec = {{"type", "section"},
                {"doc_id", s.doc_id},
                {"section_id", s.section_id},
                {"identifiers", s.identifiers},
                {"context", s.context}};
    out << rec.dump() << '\n';
  }
  for (const AnnotatedSample& s : corpus.samples) {
    json rec = {{"type", "sample"},
                {"doc_id", s.doc_id},
                {"section_id", s.section_id},
                {"source", s.source},
                {"destination", s.destination},
                {"labels", labels_to_json(s.labels)},
                {"provenance", std::string(provenance_name(s.provenance))}};
    const Section* sec = corpus.find_section(s.doc_id, s.section_id);
    if (!sec || sec->context != s.context) rec["context"] = s.context;
    out << rec.dump() << '\n';
  }
}

void save_annotations(const Corpus& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write annotation file " + path.string());
  write_annotations(corpus, out);
}

// ---------------------------------------------------------------------------

std::vector<AnnotatedSample> generate_pairs(const std::vector<Section>& sections,
                                            const std::vector<AnnotatedSample>& positives) {
  std::set<std::tuple<std::string, std::string, std::string, std::string>> covered;
  for (const AnnotatedSample& s : positives) {
    covered.emplace(s.doc_id, s.section_id, s.source, s.destination);
  }
  std::vector<AnnotatedSample> out = positives;
  for (const Section& sec : sections) {
    std::set<std::string> unique(sec.identifiers.begin(), sec.identifiers.end());
    if (unique.size() != sec.identifiers.size()) {
      throw InputError("section " + sec.doc_id + "/" + sec.section_id + " lists an identifier twice");
    }
    for (const std::string& src : sec.identifiers) {
      for (const std::string& dst : sec.identifiers) {
        if (src == dst || covered.contains({sec.doc_id, sec.section_id, src, dst})) continue;
        AnnotatedSample neg;
        neg.doc_id = sec.doc_id;
        neg.section_id = sec.section_id;
        neg.context = sec.context;
        neg.source = src;
        neg.destination = dst;
        neg.provenance = Provenance::GeneratedNegative;
        out.push_back(std::move(neg));
      }
    }
  }
  return out;
}

ClassStats class_stats(const std::vector<AnnotatedSample>& samples) {
  ClassStats stats;
  stats.total = samples.size();
  for (const AnnotatedSample& s : samples) {
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      ++(s.labels[p] ? stats.positives[p] : stats.negatives[p]);
    }
  }
  return stats;
}

std::map<Labels, std::size_t> intersection_counts(const std::vector<AnnotatedSample>& samples) {
  std::map<Labels, std::size_t> counts;
  for (const AnnotatedSample& s : samples) {
    if (any_label(s.labels)) ++counts[s.labels];
  }
  return counts;
}

std::string labels_to_string(const Labels& labels) {
  std::string out = "{";
  for (PropertyKind p : kAllProperties) {
    if (!labels[index_of(p)]) continue;
    if (out.size() > 1) out += ",";
    out += property_name(p);
  }
  return out + "}";
}

std::pair<std::vector<AnnotatedSample>, std::vector<AnnotatedSample>> split(
    const std::vector<AnnotatedSample>& samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  numkit::Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  const std::size_t valid_quota = n - std::min(n, n_train);
  std::size_t n_pos = 0;
  std::array<std::size_t, kNumProperties> train_pos{};
  for (const AnnotatedSample& s : samples) {
    if (!any_label(s.labels)) continue;
    ++n_pos;
    for (std::size_t p = 0; p < kNumProperties; ++p) train_pos[p] += s.labels[p] ? 1 : 0;
  }
  const auto pos_target = std::min<std::size_t>(
      valid_quota, static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<double>(n_pos))));

  std::vector<bool> to_valid(n, false);
  std::size_t valid_count = 0;
  auto try_move_positive = [&](std::size_t idx) {
    const Labels& l = samples[idx].labels;
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      if (l[p] && train_pos[p] < 2) return false;
    }
    for (std::size_t p = 0; p < kNumProperties; ++p) train_pos[p] -= l[p] ? 1 : 0;
    to_valid[idx] = true;
    ++valid_count;
    return true;
  };

  std::size_t pos_moved = 0;
  for (std::size_t idx : order) {
    if (pos_moved == pos_target) break;
    if (any_label(samples[idx].labels) && try_move_positive(idx)) ++pos_moved;
  }
  for (std::size_t idx : order) {
    if (valid_count == valid_quota) break;
    if (!any_label(samples[idx].labels)) {
      to_valid[idx] = true;
      ++valid_count;
    }
  }
  // Not enough negatives: fill the remainder with positives that keep coverage.
  for (std::size_t idx : order) {
    if (valid_count == valid_quota) break;
    if (!to_valid[idx] && any_label(samples[idx].labels)) try_move_positive(idx);
  }

  std::pair<std::vector<AnnotatedSample>, std::vector<AnnotatedSample>> out;
  for (std::size_t idx : order) {
    (to_valid[idx] ? out.second : out.first).push_back(samples[idx]);
  }
  return out;
}

}  // namespace protodep::corpus

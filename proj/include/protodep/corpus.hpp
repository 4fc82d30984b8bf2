#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "protodep/property.hpp"

namespace protodep::corpus {

enum class Provenance { Expert, GeneratedNegative, Evidence };

std::string_view provenance_name(Provenance p) noexcept;

/// A protocol section: its text and the identifiers it defines.
struct Section {
  std::string doc_id;
  std::string section_id;
  std::string context;
  std::vector<std::string> identifiers;

  bool operator==(const Section&) const = default;
};

struct AnnotatedSample {
  std::string doc_id;
  std::string section_id;
  std::string context;
  std::string source;
  std::string destination;
  Labels labels{};
  Provenance provenance = Provenance::Expert;

  bool operator==(const AnnotatedSample&) const = default;
};

struct Corpus {
  std::vector<Section> sections;
  std::vector<AnnotatedSample> samples;

  const Section* find_section(const std::string& doc_id, const std::string& section_id) const;
  bool operator==(const Corpus&) const = default;
};

/// Per-property class counts over a sample set.
struct ClassStats {
  std::array<std::size_t, kNumProperties> positives{};
  std::array<std::size_t, kNumProperties> negatives{};
  std::size_t total = 0;

  /// Balancing weight 1 − n_(label)/N for an element of `property` whose
  /// ground truth is `label`.
  double weight(std::size_t property, bool label) const;
};

/// Annotation files are line-delimited JSON: a header line
/// {"format":"protodep.annotations","version":1} followed by "section" and
/// "sample" records. See docs/formats.md.
Corpus load_annotations(const std::filesystem::path& path);
Corpus parse_annotations(std::istream& in, const std::string& origin = "<stream>");
void save_annotations(const Corpus& corpus, const std::filesystem::path& path);
void write_annotations(const Corpus& corpus, std::ostream& out);

/// Every ordered identifier pair of every section that no input sample
/// covers becomes an all-false generated negative. Input samples are kept
/// first, in order.
std::vector<AnnotatedSample> generate_pairs(const std::vector<Section>& sections,
                                            const std::vector<AnnotatedSample>& positives);

ClassStats class_stats(const std::vector<AnnotatedSample>& samples);

/// Exact-combination counts of the true-label sets (UpSet semantics).
std::map<Labels, std::size_t> intersection_counts(const std::vector<AnnotatedSample>& samples);
std::string labels_to_string(const Labels& labels);

/// Seeded shuffle, then a split stratified by the any-positive flag. A
/// positive sample only goes to validation when each of its properties
/// keeps another positive in the training part.
std::pair<std::vector<AnnotatedSample>, std::vector<AnnotatedSample>> split(
    const std::vector<AnnotatedSample>& samples, double ratio, std::uint64_t seed);

}  // namespace protodep::corpus

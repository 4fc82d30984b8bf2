#pragma once

// Trustworthiness loop: low-confidence selection, probe scripts, evidence
// logs, the append-only ground-truth store and a simulated oracle.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protodep/corpus.hpp"
#include "protodep/depgraph.hpp"
#include "protodep/model.hpp"

namespace protodep::feedback {

using depgraph::DependencyEdge;
using depgraph::DependencyGraph;
using depgraph::EdgeKey;

enum class Verdict { Confirmed, Refuted };
std::string_view verdict_name(Verdict v) noexcept;
std::optional<Verdict> parse_verdict(std::string_view s) noexcept;

struct EvidenceRecord {
  std::string source;
  std::string destination;
  PropertyKind property = PropertyKind::Confidentiality;
  Verdict verdict = Verdict::Refuted;
  std::string evidence_ref;  // never empty
  std::string timestamp;     // no whitespace
  std::string detail;

  EdgeKey key() const { return {source, destination, property}; }
  bool operator==(const EvidenceRecord&) const = default;
};

/// Model edges with prob in [low, high), sorted by prob descending then key.
std::vector<DependencyEdge> select_low_confidence(std::span<const model::Prediction> predictions,
                                                  const model::Thresholds& band);

// ---------------------------------------------------------------------------

/// Mutation and expected outcome for one property.
struct ProbeStanza {
  std::string_view mutation;
  std::string_view expectation;
};
const ProbeStanza& probe_stanza(PropertyKind p) noexcept;

/// "probe-<property>-<source>-<destination>"
std::string probe_id(const EdgeKey& key);

/// Fills {{source}}, {{destination}}, {{property}} (all required) and the
/// optional {{probe_id}}, {{mutation}}, {{expectation}} and {{confidence}}.
/// Throws TemplateError on a missing required or unknown placeholder.
std::string emit_test_script(const DependencyEdge& edge, const std::string& template_text);

/// Built-in template used when none is supplied.
const std::string& default_script_template();

// ---------------------------------------------------------------------------

/// Line grammar, one record per line:
///   <timestamp> PROBE_RESULT probe=<id> pair=<source>-><destination>
///     property=<name> verdict=<confirmed|refuted> detail="<text>"
/// Lines whose second field is not PROBE_RESULT are counted and skipped.
struct EvidenceLog {
  std::vector<EvidenceRecord> records;
  std::size_t unmatched = 0;
};

/// evidence_ref is "<origin>:<line>". A PROBE_RESULT line that does not fit
/// the grammar throws ParseError with its line number.
EvidenceLog parse_evidence_log(std::istream& in, const std::string& origin);
EvidenceLog parse_evidence_log(const std::string& text, const std::string& origin);

/// One PROBE_RESULT line (with trailing newline) for a record.
std::string format_evidence_line(const EvidenceRecord& record);

// ---------------------------------------------------------------------------

struct StoreEntry {
  std::uint64_t recorded_at = 0;  // logical tick, strictly increasing
  EvidenceRecord record;
  bool operator==(const StoreEntry&) const = default;
};

/// Append-only. Conflicting verdicts for one key are kept side by side.
class GroundTruthStore {
 public:
  void append(const EvidenceRecord& record);
  const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool operator==(const GroundTruthStore&) const = default;

  /// JSON lines: a header then one entry per line.
  void write(std::ostream& out) const;
  static GroundTruthStore parse(std::istream& in, const std::string& origin);
  void save(const std::filesystem::path& path) const;
  /// A missing file is an empty store.
  static GroundTruthStore load(const std::filesystem::path& path);

 private:
  std::vector<StoreEntry> entries_;
};

struct ApplyResult {
  DependencyGraph graph;
  GroundTruthStore store;
};

/// Appends every record to the store (in the given order) and updates the
/// graph in sorted key order: a refutation marks an existing edge refuted and
/// leaves absent keys absent; a confirmation sets confidence 1 and provenance
/// evidence-confirmed, inserting the edge if absent. Refutation wins over
/// confirmation. Never removes edges.
ApplyResult apply_evidence(const DependencyGraph& graph, const GroundTruthStore& store,
                           std::span<const EvidenceRecord> records);

/// Evidence rows for retraining: one sample per (source, destination) in the
/// store whose identifiers share a section. Labels are the confirmed
/// properties not refuted anywhere in the store; a pair with only
/// refutations yields an all-false row. Pairs without a section are skipped.
std::vector<corpus::AnnotatedSample> evidence_samples(const GroundTruthStore& store,
                                                      std::span<const corpus::Section> sections);

// ---------------------------------------------------------------------------

/// Ground truth for the simulated oracle. Text format:
///   # protodep-truth v1
///   <source> <destination> <property> true|false
///   default true|false          (optional)
struct TruthTable {
  std::map<EdgeKey, bool> entries;
  std::optional<bool> fallback;

  static TruthTable parse(std::istream& in, const std::string& origin);
  static TruthTable load(const std::filesystem::path& path);
};

/// Verdict from the table; evidence_ref "simulated:<key>". Throws
/// LookupError for an uncovered key when the table has no default.
EvidenceRecord simulated_oracle(const DependencyEdge& edge, const TruthTable& table, std::uint64_t tick);

}  // namespace protodep::feedback

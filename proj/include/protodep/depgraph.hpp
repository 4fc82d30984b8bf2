#pragma once

// Typed dependency multigraph, cross-session merge, information-flow graph,
// design-intent filtering and DOT emission.

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "protodep/model.hpp"
#include "protodep/property.hpp"

namespace protodep::depgraph {

/// Ordered by trust: merging keeps the higher rank.
enum class EdgeProvenance { Model = 0, Expert = 1, EvidenceConfirmed = 2 };
enum class EdgeStatus { Active, Refuted };

std::string_view provenance_name(EdgeProvenance p) noexcept;
std::optional<EdgeProvenance> parse_provenance(std::string_view s) noexcept;
std::string_view status_name(EdgeStatus s) noexcept;
std::optional<EdgeStatus> parse_status(std::string_view s) noexcept;

struct EdgeKey {
  std::string source;
  std::string destination;
  PropertyKind property = PropertyKind::Confidentiality;

  auto operator<=>(const EdgeKey&) const = default;
  bool operator==(const EdgeKey&) const = default;
};

/// "source->destination:property"
std::string key_string(const EdgeKey& k);

struct DependencyEdge {
  std::string source;
  std::string destination;
  PropertyKind property = PropertyKind::Confidentiality;
  double confidence = 0.0;
  EdgeProvenance provenance = EdgeProvenance::Model;
  EdgeStatus status = EdgeStatus::Active;

  EdgeKey key() const { return {source, destination, property}; }
  bool active() const noexcept { return status == EdgeStatus::Active; }
  bool operator==(const DependencyEdge&) const = default;
};

/// Identifiers are non-empty and free of whitespace, quotes and backslashes;
/// every file format relies on this.
bool valid_identifier(std::string_view name) noexcept;

class DependencyGraph {
 public:
  /// Throws InputError on an invalid identifier.
  void add_node(const std::string& name);
  /// Inserts the edge or replaces the one with the same key; endpoints are
  /// added as nodes. Throws InputError on a self loop, an invalid identifier
  /// or a confidence outside [0, 1].
  void upsert(const DependencyEdge& edge);

  const DependencyEdge* find(const EdgeKey& key) const;
  bool contains(const EdgeKey& key) const { return find(key) != nullptr; }

  const std::set<std::string>& nodes() const noexcept { return nodes_; }
  const std::map<EdgeKey, DependencyEdge>& edges() const noexcept { return edges_; }
  std::vector<DependencyEdge> active_edges() const;
  std::set<EdgeKey> active_keys() const;
  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }

  bool operator==(const DependencyGraph&) const = default;

 private:
  std::set<std::string> nodes_;
  std::map<EdgeKey, DependencyEdge> edges_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// One model edge per (pair, property) with prob ≥ accept. A key predicted
/// in several sections keeps its highest probability. Throws ConfigError
/// unless 0 < accept < 1.
DependencyGraph build_graph(std::span<const model::Prediction> predictions, double accept);

/// Node union; per key the confidence and provenance are the maxima and a
/// refuted status wins. Commutative, associative and idempotent.
DependencyGraph merge_graphs(const DependencyGraph& a, const DependencyGraph& b);

struct GraphDiff {
  std::vector<EdgeKey> missing;  // active in truth, not active in predicted
  std::vector<EdgeKey> extra;    // active in predicted, not active in truth
  bool operator==(const GraphDiff&) const = default;
};

GraphDiff graph_diff(const DependencyGraph& predicted, const DependencyGraph& truth);

// ---------------------------------------------------------------------------

struct FlowMessage {
  std::string sender;
  std::string receiver;
  std::string command;
  std::vector<std::string> identifiers;
  bool operator==(const FlowMessage&) const = default;
};

struct FlowGraph {
  std::vector<FlowMessage> messages;

  /// Throws InputError on an empty command, entity or identifier name, or an
  /// identifier repeated inside one message.
  void validate() const;
  std::set<std::string> identifiers() const;
  std::set<std::string> entities() const;
  bool operator==(const FlowGraph&) const = default;
};

enum class RemovalReason { SourceAbsent, DestinationAbsent, NoFlowPath };
std::string_view removal_reason_name(RemovalReason r) noexcept;

struct Removal {
  DependencyEdge edge;
  RemovalReason reason;
  bool operator==(const Removal&) const = default;
};

struct FilterResult {
  DependencyGraph graph;
  std::vector<Removal> removed;  // in key order
};

/// Whether information carried by message `from` can reach the sender of
/// message `to` (to ≥ from). The sender and receiver of `from` hold it; each
/// later message whose sender holds it passes it to its receiver.
bool flow_reaches(const FlowGraph& flow, std::size_t from, std::size_t to);

/// Keeps an edge iff both endpoints occur in the flow and some occurrence of
/// the destination is in the same message as, or a reachable later message
/// than, some occurrence of the source. Kept nodes are the input nodes that
/// occur in the flow. Idempotent; the output edges are a subset of the input.
FilterResult intent_filter(const DependencyGraph& graph, const FlowGraph& flow);

/// Human-readable removal report, one line per removed edge.
void write_removals(std::span<const Removal> removed, std::ostream& out);

// ---------------------------------------------------------------------------

struct DotOptions {
  bool include_refuted = false;
};

/// Deterministic DOT text. Nodes are sorted; each destination of an Include
/// edge becomes a box cluster holding its included fields; the other five
/// properties are labeled, styled arrows.
std::string to_dot(const DependencyGraph& graph, const DotOptions& options = {});

// ---------------------------------------------------------------------------
// Text formats. See docs/formats.md.

void write_graph(const DependencyGraph& graph, std::ostream& out);
DependencyGraph parse_graph(std::istream& in, const std::string& origin);
void save_graph(const DependencyGraph& graph, const std::filesystem::path& path);
DependencyGraph load_graph(const std::filesystem::path& path);

void write_flow(const FlowGraph& flow, std::ostream& out);
FlowGraph parse_flow(std::istream& in, const std::string& origin);
FlowGraph load_flow(const std::filesystem::path& path);

}  // namespace protodep::depgraph

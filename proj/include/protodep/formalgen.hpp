#pragma once

// Applied-pi-flavored model text from a dependency graph and a flow graph,
// its round-trip parser, and a plain-text review report.
//
// Grammar (one statement per line, see docs/formats.md):
//   (* protodep formal model v1 *)
//   free ch: channel.
//   free <name>: bitstring.                 | ... bitstring [private].
//   event send_<prop>(bitstring, bitstring). / event accept_<prop>(...).
//   term include <src> in <dst>. <ann>      | term generate <dst> from <src>. <ann>
//   (* msg <i>: <sender> -> <receiver> <command> *)
//   let msg_<i> = out(ch, (<name>, ...)).   | let msg_<i> = 0.
//   process ( msg_0 | ... ).                | process 0.
//   query attacker(<dst>) protected_by <src>. <ann>
//   query event(accept_<p>(<src>, <dst>)) ==> event(send_<p>(<src>, <dst>)). <ann>
//   query inj-event(accept_accounting(...)) ==> inj-event(send_accounting(...)). <ann>
// where <ann> is "(* confidence=<c> provenance=<p> *)" and names are
// mangled identifiers.

#include <optional>
#include <string>
#include <string_view>

#include "protodep/depgraph.hpp"
#include "protodep/model.hpp"

namespace protodep::formalgen {

using depgraph::DependencyGraph;
using depgraph::FlowGraph;
using depgraph::GraphDiff;

/// Letters and digits are kept, '_' doubles, any other byte becomes
/// "_h<hex>_"; a leading non-letter is always escaped.
std::string mangle(std::string_view identifier);
/// Inverse of mangle; nullopt when `name` is not a mangled identifier.
std::optional<std::string> demangle(std::string_view name);

/// Throws ConsistencyError naming every active edge with an endpoint that
/// the flow never carries.
void check_consistency(const DependencyGraph& graph, const FlowGraph& flow);

/// Deterministic model text. Only active edges appear. Throws
/// ConsistencyError when check_consistency fails.
std::string emit_formal_model(const DependencyGraph& graph, const FlowGraph& flow);

/// Number of query statements emit_formal_model produces for `graph`.
std::size_t query_count(const DependencyGraph& graph);

struct ParsedModel {
  DependencyGraph graph;  // declared names as nodes, annotated edges as active
  FlowGraph flow;
};

/// Throws ParseError with the line number on any grammar violation,
/// including a queried name that is not declared.
ParsedModel parse_formal_model(const std::string& text, const std::string& origin = "model");

/// Counts per property, low-confidence and refuted edges, and the diff
/// against ground truth when given.
std::string emit_report(const DependencyGraph& graph, const std::optional<GraphDiff>& diff,
                        const model::Thresholds& band);

}  // namespace protodep::formalgen

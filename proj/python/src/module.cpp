// Python bindings for the numeric kernels, the graph and formal-model
// operations and the file pipeline. Graphs and flows cross the boundary in
// their text formats.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "protodep/depgraph.hpp"
#include "protodep/errors.hpp"
#include "protodep/formalgen.hpp"
#include "protodep/pipeline.hpp"
#include "protodep/training.hpp"

namespace py = pybind11;
using namespace protodep;
using numkit::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

depgraph::DependencyGraph graph_from(const std::string& text) {
  std::istringstream in(text);
  return depgraph::parse_graph(in, "<graph>");
}

depgraph::FlowGraph flow_from(const std::string& text) {
  std::istringstream in(text);
  return depgraph::parse_flow(in, "<flow>");
}

std::string graph_text(const depgraph::DependencyGraph& g) {
  std::ostringstream out;
  depgraph::write_graph(g, out);
  return out.str();
}

py::tuple key_tuple(const depgraph::EdgeKey& k) {
  return py::make_tuple(k.source, k.destination, std::string(property_name(k.property)));
}

corpus::ClassStats stats_from(const std::vector<std::size_t>& positives, const std::vector<std::size_t>& negatives) {
  if (positives.size() != negatives.size() || positives.size() > kNumProperties) {
    throw ShapeError("positives and negatives need one count per property column");
  }
  corpus::ClassStats s;
  for (std::size_t p = 0; p < positives.size(); ++p) {
    s.positives[p] = positives[p];
    s.negatives[p] = negatives[p];
  }
  s.total = positives.empty() ? 0 : positives[0] + negatives[0];
  return s;
}

py::dict demo_dict(const pipeline::DemoSummary& s) {
  py::list artifacts;
  for (const auto& a : s.artifacts) artifacts.append(a.generic_string());
  py::list traces;
  for (const auto& t : s.traces) {
    py::dict d;
    d["edge"] = key_tuple(t.key);
    d["verdict"] = std::string(feedback::verdict_name(t.verdict));
    d["prob_before"] = t.prob_before;
    d["prob_after"] = t.prob_after;
    d["final_confidence"] = t.final_confidence;
    d["final_status"] = std::string(depgraph::status_name(t.final_status));
    d["in_formal_model"] = t.in_formal_model;
    traces.append(d);
  }
  py::dict out;
  out["artifacts"] = artifacts;
  out["valid_accuracy"] = s.metrics.micro.accuracy;
  out["traces"] = traces;
  return out;
}

pipeline::PipelineConfig config_for(const std::string& config_path, std::optional<std::uint64_t> seed) {
  pipeline::PipelineConfig c = pipeline::load_config(config_path);
  if (seed) {
    c.seed = seed;
    c.train.seed = *seed;
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Protocol dependency extraction: numeric kernels, dependency graphs and formal model emission";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto input_error = py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", input_error.ptr());
  py::register_exception<ConsistencyError>(m, "ConsistencyError", input_error.ptr());
  py::register_exception<TemplateError>(m, "TemplateError", config_error.ptr());

  m.attr("PROPERTIES") = [] {
    py::list names;
    for (PropertyKind p : kAllProperties) names.append(std::string(property_name(p)));
    return names;
  }();

  m.def(
      "softmax_rows", [](const Array& a) { return to_array(numkit::softmax_rows(to_matrix(a))); }, py::arg("logits"),
      "Row-wise softmax of a 2-D array.");
  m.def(
      "balanced_bce",
      [](const Array& probs, const Array& labels, const std::vector<std::size_t>& positives,
         const std::vector<std::size_t>& negatives) {
        return training::balanced_bce(to_matrix(probs), to_matrix(labels), stats_from(positives, negatives));
      },
      py::arg("probs"), py::arg("labels"), py::arg("positives"), py::arg("negatives"),
      "Class-balanced binary cross-entropy; counts are per property column.");
  m.def(
      "unweighted_bce",
      [](const Array& probs, const Array& labels) {
        return training::unweighted_bce(to_matrix(probs), to_matrix(labels));
      },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) { return training::auc(scores, labels); },
      py::arg("scores"), py::arg("labels"), "Rank-sum AUC with ties counted one half.");

  m.def(
      "merge_graphs",
      [](const std::string& a, const std::string& b) {
        return graph_text(depgraph::merge_graphs(graph_from(a), graph_from(b)));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "intent_filter",
      [](const std::string& graph, const std::string& flow) {
        const auto r = depgraph::intent_filter(graph_from(graph), flow_from(flow));
        py::list removed;
        for (const auto& x : r.removed) {
          removed.append(py::make_tuple(key_tuple(x.edge.key()), std::string(depgraph::removal_reason_name(x.reason))));
        }
        return py::make_tuple(graph_text(r.graph), removed);
      },
      py::arg("graph"), py::arg("flow"), "Returns (filtered graph text, [(key, reason), ...]).");
  m.def(
      "to_dot", [](const std::string& graph) { return depgraph::to_dot(graph_from(graph)); }, py::arg("graph"));
  m.def(
      "emit_formal_model",
      [](const std::string& graph, const std::string& flow) {
        return formalgen::emit_formal_model(graph_from(graph), flow_from(flow));
      },
      py::arg("graph"), py::arg("flow"));
  m.def(
      "parse_formal_model",
      [](const std::string& text) {
        const auto parsed = formalgen::parse_formal_model(text);
        py::list keys;
        for (const auto& k : parsed.graph.active_keys()) keys.append(key_tuple(k));
        return keys;
      },
      py::arg("text"), "Active edge keys recovered from model text.");

  m.def(
      "train",
      [](const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
        const auto r = pipeline::run_train(config_for(config, seed), out);
        return py::make_tuple(r.history.size(), r.best_epoch);
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), "Returns (epochs run, best epoch).");
  m.def(
      "demo",
      [](const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
        std::ostringstream log;
        pipeline::DemoSummary s;
        {
          py::gil_scoped_release release;
          s = pipeline::run_demo(config_for(config, seed), out, log);
        }
        return demo_dict(s);
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), "Full loop; returns a summary dict.");
}

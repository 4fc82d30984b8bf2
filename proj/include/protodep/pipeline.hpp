#pragma once

// File-passing pipeline shared by the command-line tool, the Python module
// and the acceptance suite. Each stage reads files, writes files and returns
// what it produced.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "protodep/corpus.hpp"
#include "protodep/depgraph.hpp"
#include "protodep/feedback.hpp"
#include "protodep/model.hpp"
#include "protodep/training.hpp"

namespace protodep::pipeline {

namespace fs = std::filesystem;

struct Paths {
  fs::path corpus;          // annotated training corpus
  fs::path extract_corpus;  // sections to extract dependencies from
  fs::path checkpoint;
  fs::path predictions;
  fs::path graph;
  fs::path flow;
  fs::path truth;            // oracle truth table
  fs::path script_template;  // empty: built-in template
  fs::path store;
  fs::path evidence_log;  // empty: ask the simulated oracle
};

struct PipelineConfig {
  Paths paths;
  model::CalConfig model;
  training::TrainConfig train;
  model::Thresholds band;
  /// Edges at or above this probability enter the graph directly.
  double accept = 0.7;
  double train_ratio = 0.8;
  std::size_t retrain_epochs = 30;
  std::optional<std::uint64_t> seed;

  /// Throws ConfigError unless 0 < low < high < 1, low ≤ accept < 1 and the
  /// model and training settings are valid.
  void validate() const;
  /// Throws ConfigError when no seed was given.
  std::uint64_t require_seed() const;
};

/// JSON object with optional keys "seed", "paths", "model", "train",
/// "thresholds" {low, high, accept}, "train_ratio", "retrain_epochs".
/// Relative paths resolve against `base_dir`. Unknown keys are ConfigError.
PipelineConfig config_from_json(const std::string& json_text, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);

/// Name of the stage that was running when the last error escaped, or "".
std::string failing_stage();

/// Throws ConfigError when `path` is empty or names no existing file.
void require_input(const fs::path& path, const std::string& what);

// ---------------------------------------------------------------------------

struct TrainSplit {
  std::vector<corpus::AnnotatedSample> train;
  std::vector<corpus::AnnotatedSample> valid;
};

/// All pairs of the corpus (expert positives plus generated negatives),
/// split with the config seed and ratio.
TrainSplit training_split(const corpus::Corpus& corpus, const PipelineConfig& config);

/// checkpoint.bin and history.jsonl under `out_dir`.
training::TrainResult run_train(const PipelineConfig& config, const fs::path& out_dir);
/// metrics.json with "train" and "valid" sections.
void run_eval(const PipelineConfig& config, const fs::path& out_dir, const std::string& name = "metrics.json");

/// Predictions for every ordered identifier pair of every section.
std::vector<model::Prediction> extract(const model::CalModel& model, const corpus::Corpus& sections,
                                       const model::Thresholds& band);
std::vector<model::Prediction> run_extract(const PipelineConfig& config, const fs::path& out_dir,
                                           const std::string& name = "predictions.jsonl");

void write_predictions(const std::vector<model::Prediction>& predictions, const fs::path& path);
std::vector<model::Prediction> read_predictions(const fs::path& path);

/// graph.txt and graph.dot.
depgraph::DependencyGraph run_graph(const PipelineConfig& config, const fs::path& out_dir);
/// filtered.txt, filtered.dot and removals.txt.
depgraph::FilterResult run_filter(const PipelineConfig& config, const fs::path& out_dir);

struct FeedbackOutcome {
  std::vector<depgraph::DependencyEdge> candidates;
  std::vector<feedback::EvidenceRecord> evidence;
  depgraph::DependencyGraph graph;
  feedback::GroundTruthStore store;
  std::vector<corpus::AnnotatedSample> evidence_samples;
};

/// Low-confidence band of `predictions`, kept only where the flow graph (if
/// given) supports the edge. Candidates join the graph as model edges, one
/// probe script each is written under scripts/, evidence comes from the log
/// or the simulated oracle (written to evidence.log), and the verdicts are
/// applied. Writes graph_feedback.txt, store.jsonl (appending to `store`)
/// and evidence_samples.jsonl.
FeedbackOutcome feedback_stage(const std::vector<model::Prediction>& predictions,
                               const depgraph::DependencyGraph& graph, const depgraph::FlowGraph* flow,
                               const feedback::GroundTruthStore& store, const PipelineConfig& config,
                               const corpus::Corpus& sections, const fs::path& out_dir);
FeedbackOutcome run_feedback(const PipelineConfig& config, const fs::path& out_dir);

/// model.pv and report.txt; the report compares with the truth table's true
/// entries when one is configured.
std::string run_emit(const PipelineConfig& config, const fs::path& out_dir);

struct PairTrace {
  depgraph::EdgeKey key;
  feedback::Verdict verdict = feedback::Verdict::Refuted;
  double prob_before = 0.0;
  double prob_after = 0.0;
  double final_confidence = 0.0;
  depgraph::EdgeStatus final_status = depgraph::EdgeStatus::Active;
  bool in_formal_model = false;
};

struct DemoSummary {
  std::vector<fs::path> artifacts;  // relative to the output directory
  training::Metrics metrics;
  std::vector<PairTrace> traces;
};

/// Full loop: train, eval, extract, graph, filter, feedback, retrain,
/// re-extract, merge, emit. Overwrites every artifact in `out_dir`.
DemoSummary run_demo(const PipelineConfig& config, const fs::path& out_dir, std::ostream& log);

}  // namespace protodep::pipeline

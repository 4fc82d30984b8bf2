#include "protodep/pipeline.hpp"

#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "protodep/errors.hpp"
#include "protodep/formalgen.hpp"
#include "protodep/json_io.hpp"

namespace protodep::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string g_stage;

/// Records the running stage; an escaping exception leaves the name behind.
class Stage {
 public:
  explicit Stage(std::string name) : previous_(g_stage), uncaught_(std::uncaught_exceptions()) {
    g_stage = std::move(name);
  }
  ~Stage() {
    if (std::uncaught_exceptions() == uncaught_) g_stage = previous_;
  }
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;

 private:
  std::string previous_;
  int uncaught_;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path resolve(const fs::path& base, const json& value, const char* key) {
  if (!value.is_string()) throw ConfigError(std::string("paths.") + key + " must be a string");
  const fs::path p = value.get<std::string>();
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(what + ": unknown key '" + item.key() + "'");
  }
}

std::string metrics_json(const training::Metrics& train, const training::Metrics& valid) {
  json j;
  j["train"] = train;
  j["valid"] = valid;
  return j.dump(2) + "\n";
}

std::string history_text(const std::vector<training::EpochRecord>& history) {
  std::ostringstream s;
  training::write_history(history, s);
  return s.str();
}

std::string graph_text(const depgraph::DependencyGraph& g) {
  std::ostringstream s;
  depgraph::write_graph(g, s);
  return s.str();
}

depgraph::DependencyGraph truth_graph(const feedback::TruthTable& table) {
  depgraph::DependencyGraph g;
  for (const auto& [key, holds] : table.entries) {
    if (holds) {
      g.upsert({key.source, key.destination, key.property, 1.0, depgraph::EdgeProvenance::Expert,
                depgraph::EdgeStatus::Active});
    }
  }
  return g;
}

std::string emit_report_for(const depgraph::DependencyGraph& g, const PipelineConfig& config) {
  std::optional<depgraph::GraphDiff> diff;
  if (!config.paths.truth.empty()) {
    require_input(config.paths.truth, "truth table");
    diff = depgraph::graph_diff(g, truth_graph(feedback::TruthTable::load(config.paths.truth)));
  }
  return formalgen::emit_report(g, diff, config.band);
}

double max_prob(const std::vector<model::Prediction>& preds, const depgraph::EdgeKey& key) {
  double best = 0.0;
  for (const auto& p : preds) {
    if (p.source == key.source && p.destination == key.destination) {
      best = std::max(best, p.probs[index_of(key.property)]);
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  band.validate();
  if (!(band.low > 0.0 && band.high < 1.0)) throw ConfigError("thresholds must satisfy 0 < low < high < 1");
  if (!(accept >= band.low && accept < 1.0)) {
    throw ConfigError("accept threshold must lie in [low, 1), got " + depgraph::format_number(accept));
  }
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train_ratio must lie in (0, 1)");
  model.validate();
  train.validate();
}

std::uint64_t PipelineConfig::require_seed() const {
  if (!seed) throw ConfigError("a seed is required (config key 'seed' or --seed)");
  return *seed;
}

PipelineConfig config_from_json(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "paths", "model", "train", "thresholds", "train_ratio", "retrain_epochs"}, "config");
  PipelineConfig c;
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p,
               {"corpus", "extract_corpus", "checkpoint", "predictions", "graph", "flow", "truth", "script_template",
                "store", "evidence_log"},
               "paths");
    const std::pair<const char*, fs::path*> fields[] = {
        {"corpus", &c.paths.corpus},   {"extract_corpus", &c.paths.extract_corpus},
        {"checkpoint", &c.paths.checkpoint}, {"predictions", &c.paths.predictions},
        {"graph", &c.paths.graph},     {"flow", &c.paths.flow},
        {"truth", &c.paths.truth},     {"script_template", &c.paths.script_template},
        {"store", &c.paths.store},     {"evidence_log", &c.paths.evidence_log}};
    for (const auto& [key, field] : fields) {
      if (p.contains(key)) *field = resolve(base_dir, p[key], key);
    }
  }
  if (j.contains("model")) c.model = j["model"].get<model::CalConfig>();
  if (j.contains("train")) c.train = j["train"].get<training::TrainConfig>();
  if (j.contains("thresholds")) {
    const json& t = j["thresholds"];
    check_keys(t, {"low", "high", "accept"}, "thresholds");
    if (t.contains("low")) c.band.low = get_as<double>(t, "low");
    if (t.contains("high")) c.band.high = get_as<double>(t, "high");
    if (t.contains("accept")) c.accept = get_as<double>(t, "accept");
  }
  if (j.contains("train_ratio")) c.train_ratio = get_as<double>(j, "train_ratio");
  if (j.contains("retrain_epochs")) c.retrain_epochs = get_as<std::size_t>(j, "retrain_epochs");
  if (c.seed) c.train.seed = *c.seed;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  require_input(path, "config file");
  return config_from_json(read_file(path), path.parent_path());
}

std::string failing_stage() { return g_stage; }

void require_input(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError("no " + what + " given");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path.string() + "' does not exist");
}

// ---------------------------------------------------------------------------

TrainSplit training_split(const corpus::Corpus& corpus, const PipelineConfig& config) {
  const auto all = corpus::generate_pairs(corpus.sections, corpus.samples);
  if (all.empty()) throw InputError("the training corpus yields no identifier pairs");
  auto [train, valid] = corpus::split(all, config.train_ratio, config.require_seed());
  return {std::move(train), std::move(valid)};
}

training::TrainResult run_train(const PipelineConfig& config, const fs::path& out_dir) {
  Stage stage("train");
  config.validate();
  training::TrainConfig tc = config.train;
  tc.seed = config.require_seed();
  require_input(config.paths.corpus, "training corpus");
  const corpus::Corpus c = corpus::load_annotations(config.paths.corpus);
  const TrainSplit s = training_split(c, config);
  training::TrainResult result = training::train(training::training_view(s.train, tc), s.valid, config.model, tc);
  model::save_checkpoint(result.model, out_dir / "checkpoint.bin");
  write_file(out_dir / "history.jsonl", history_text(result.history));
  return result;
}

void run_eval(const PipelineConfig& config, const fs::path& out_dir, const std::string& name) {
  Stage stage("eval");
  config.validate();
  require_input(config.paths.checkpoint, "checkpoint");
  require_input(config.paths.corpus, "training corpus");
  const model::CalModel m = model::load_checkpoint(config.paths.checkpoint);
  const TrainSplit s = training_split(corpus::load_annotations(config.paths.corpus), config);
  const double thr = config.train.decision_threshold;
  write_file(out_dir / name, metrics_json(training::evaluate(m, s.train, thr), training::evaluate(m, s.valid, thr)));
}

std::vector<model::Prediction> extract(const model::CalModel& m, const corpus::Corpus& sections,
                                       const model::Thresholds& band) {
  std::vector<model::Prediction> out;
  for (const corpus::Section& s : sections.sections) {
    if (s.identifiers.size() < 2) continue;
    auto preds = model::predict_all_pairs(s.context, s.identifiers, m, band);
    for (auto& p : preds) {
      p.doc_id = s.doc_id;
      p.section_id = s.section_id;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<model::Prediction> run_extract(const PipelineConfig& config, const fs::path& out_dir,
                                           const std::string& name) {
  Stage stage("extract");
  config.validate();
  config.require_seed();
  require_input(config.paths.checkpoint, "checkpoint");
  require_input(config.paths.extract_corpus, "extraction corpus");
  const model::CalModel m = model::load_checkpoint(config.paths.checkpoint);
  const auto preds = extract(m, corpus::load_annotations(config.paths.extract_corpus), config.band);
  write_predictions(preds, out_dir / name);
  return preds;
}

void write_predictions(const std::vector<model::Prediction>& predictions, const fs::path& path) {
  std::string text;
  for (const auto& p : predictions) text += json(p).dump() + "\n";
  write_file(path, text);
}

std::vector<model::Prediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<model::Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<model::Prediction>());
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const InputError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

depgraph::DependencyGraph run_graph(const PipelineConfig& config, const fs::path& out_dir) {
  Stage stage("graph");
  config.validate();
  require_input(config.paths.predictions, "predictions file");
  const auto g = depgraph::build_graph(read_predictions(config.paths.predictions), config.accept);
  write_file(out_dir / "graph.txt", graph_text(g));
  write_file(out_dir / "graph.dot", depgraph::to_dot(g));
  return g;
}

depgraph::FilterResult run_filter(const PipelineConfig& config, const fs::path& out_dir) {
  Stage stage("filter");
  require_input(config.paths.graph, "graph file");
  require_input(config.paths.flow, "flow graph");
  const auto r = depgraph::intent_filter(depgraph::load_graph(config.paths.graph), depgraph::load_flow(config.paths.flow));
  write_file(out_dir / "filtered.txt", graph_text(r.graph));
  write_file(out_dir / "filtered.dot", depgraph::to_dot(r.graph));
  std::ostringstream removals;
  depgraph::write_removals(r.removed, removals);
  write_file(out_dir / "removals.txt", removals.str());
  return r;
}

FeedbackOutcome feedback_stage(const std::vector<model::Prediction>& predictions,
                               const depgraph::DependencyGraph& graph, const depgraph::FlowGraph* flow,
                               const feedback::GroundTruthStore& store, const PipelineConfig& config,
                               const corpus::Corpus& sections, const fs::path& out_dir) {
  Stage stage("feedback");
  config.validate();
  FeedbackOutcome out;
  depgraph::DependencyGraph band_graph;
  for (const auto& e : feedback::select_low_confidence(predictions, config.band)) {
    // A key seen in several sections keeps its highest probability.
    if (const auto* seen = band_graph.find(e.key()); seen != nullptr && seen->confidence >= e.confidence) continue;
    band_graph.upsert(e);
  }
  if (flow != nullptr) band_graph = depgraph::intent_filter(band_graph, *flow).graph;
  for (const auto& e : feedback::select_low_confidence(predictions, config.band)) {
    const auto* kept = band_graph.find(e.key());
    if (kept != nullptr && kept->confidence == e.confidence &&
        std::none_of(out.candidates.begin(), out.candidates.end(),
                     [&](const depgraph::DependencyEdge& c) { return c.key() == e.key(); })) {
      out.candidates.push_back(e);
    }
  }

  std::string template_text = feedback::default_script_template();
  if (!config.paths.script_template.empty()) {
    require_input(config.paths.script_template, "script template");
    template_text = read_file(config.paths.script_template);
  }
  const fs::path scripts = out_dir / "scripts";
  fs::remove_all(scripts);
  fs::create_directories(scripts);
  for (const auto& e : out.candidates) {
    write_file(scripts / (feedback::probe_id(e.key()) + ".probe"), feedback::emit_test_script(e, template_text));
  }

  if (!config.paths.evidence_log.empty()) {
    require_input(config.paths.evidence_log, "evidence log");
    std::ifstream in(config.paths.evidence_log);
    out.evidence = feedback::parse_evidence_log(in, config.paths.evidence_log.string()).records;
  } else {
    require_input(config.paths.truth, "truth table");
    const auto table = feedback::TruthTable::load(config.paths.truth);
    std::string log_text;
    std::uint64_t tick = store.size();
    for (const auto& e : out.candidates) {
      out.evidence.push_back(feedback::simulated_oracle(e, table, ++tick));
      log_text += feedback::format_evidence_line(out.evidence.back());
    }
    write_file(out_dir / "evidence.log", log_text);
  }

  const auto applied = feedback::apply_evidence(depgraph::merge_graphs(graph, band_graph), store, out.evidence);
  out.graph = applied.graph;
  out.store = applied.store;
  out.evidence_samples = feedback::evidence_samples(out.store, sections.sections);
  // Unprobed properties of a pair take the graph's active edges, not false.
  for (corpus::AnnotatedSample& s : out.evidence_samples) {
    for (PropertyKind p : kAllProperties) {
      const auto* e = out.graph.find({s.source, s.destination, p});
      if (e != nullptr && e->active()) s.labels[index_of(p)] = true;
    }
  }
  write_file(out_dir / "graph_feedback.txt", graph_text(out.graph));
  write_file(out_dir / "graph_feedback.dot", depgraph::to_dot(out.graph));
  std::ostringstream samples;
  corpus::write_annotations({sections.sections, out.evidence_samples}, samples);
  write_file(out_dir / "evidence_samples.jsonl", samples.str());
  return out;
}

FeedbackOutcome run_feedback(const PipelineConfig& config, const fs::path& out_dir) {
  Stage stage("feedback");
  require_input(config.paths.predictions, "predictions file");
  require_input(config.paths.graph, "graph file");
  const auto preds = read_predictions(config.paths.predictions);
  const auto graph = depgraph::load_graph(config.paths.graph);
  std::optional<depgraph::FlowGraph> flow;
  if (!config.paths.flow.empty()) {
    require_input(config.paths.flow, "flow graph");
    flow = depgraph::load_flow(config.paths.flow);
  }
  corpus::Corpus sections;
  if (!config.paths.extract_corpus.empty()) {
    require_input(config.paths.extract_corpus, "extraction corpus");
    sections = corpus::load_annotations(config.paths.extract_corpus);
  }
  const fs::path store_path = config.paths.store.empty() ? out_dir / "store.jsonl" : config.paths.store;
  const auto store = feedback::GroundTruthStore::load(store_path);
  FeedbackOutcome out = feedback_stage(preds, graph, flow ? &*flow : nullptr, store, config, sections, out_dir);
  std::ostringstream s;
  out.store.write(s);
  write_file(store_path, s.str());
  return out;
}

std::string run_emit(const PipelineConfig& config, const fs::path& out_dir) {
  Stage stage("emit");
  require_input(config.paths.graph, "graph file");
  require_input(config.paths.flow, "flow graph");
  const auto g = depgraph::load_graph(config.paths.graph);
  const std::string text = formalgen::emit_formal_model(g, depgraph::load_flow(config.paths.flow));
  write_file(out_dir / "model.pv", text);
  write_file(out_dir / "report.txt", emit_report_for(g, config));
  return text;
}

// ---------------------------------------------------------------------------

DemoSummary run_demo(const PipelineConfig& config, const fs::path& out_dir, std::ostream& log) {
  Stage stage("demo");
  config.validate();
  const std::uint64_t seed = config.require_seed();
  require_input(config.paths.corpus, "training corpus");
  require_input(config.paths.extract_corpus, "extraction corpus");
  require_input(config.paths.flow, "flow graph");
  require_input(config.paths.truth, "truth table");
  fs::create_directories(out_dir);
  DemoSummary summary;
  auto produced = [&](const fs::path& rel) { summary.artifacts.push_back(rel); };

  PipelineConfig cfg = config;
  cfg.train.seed = seed;
  cfg.paths.evidence_log.clear();

  log << "[demo] training on " << cfg.paths.corpus.filename().string() << "\n";
  const training::TrainResult trained = run_train(cfg, out_dir);
  produced("checkpoint.bin");
  produced("history.jsonl");
  log << "[demo] " << trained.history.size() << " epochs, best epoch " << trained.best_epoch << "\n";

  cfg.paths.checkpoint = out_dir / "checkpoint.bin";
  run_eval(cfg, out_dir);
  produced("metrics.json");
  {
    const TrainSplit s = training_split(corpus::load_annotations(cfg.paths.corpus), cfg);
    summary.metrics = training::evaluate(trained.model, s.valid, cfg.train.decision_threshold);
  }

  const auto preds = run_extract(cfg, out_dir);
  produced("predictions.jsonl");
  cfg.paths.predictions = out_dir / "predictions.jsonl";
  const auto graph = run_graph(cfg, out_dir);
  produced("graph.txt");
  produced("graph.dot");
  cfg.paths.graph = out_dir / "graph.txt";
  const auto filtered = run_filter(cfg, out_dir);
  produced("filtered.txt");
  produced("filtered.dot");
  produced("removals.txt");
  log << "[demo] graph " << graph.size() << " edges, " << filtered.graph.size() << " after intent filter\n";

  const auto flow = depgraph::load_flow(cfg.paths.flow);
  const corpus::Corpus sections = corpus::load_annotations(cfg.paths.extract_corpus);
  const FeedbackOutcome fb =
      feedback_stage(preds, filtered.graph, &flow, feedback::GroundTruthStore{}, cfg, sections, out_dir);
  {
    std::ostringstream s;
    fb.store.write(s);
    write_file(out_dir / "store.jsonl", s.str());
  }
  for (const auto& e : fb.candidates) produced(fs::path("scripts") / (feedback::probe_id(e.key()) + ".probe"));
  produced("evidence.log");
  produced("graph_feedback.txt");
  produced("graph_feedback.dot");
  produced("store.jsonl");
  produced("evidence_samples.jsonl");
  log << "[demo] " << fb.candidates.size() << " low-confidence edges probed\n";

  std::vector<model::Prediction> preds_after;
  depgraph::DependencyGraph final_graph;
  {
    Stage retrain("retrain");
    const TrainSplit s = training_split(corpus::load_annotations(cfg.paths.corpus), cfg);
    training::TrainConfig tc = cfg.train;
    tc.epochs = cfg.retrain_epochs;
    std::vector<corpus::AnnotatedSample> augmented = s.train;
    augmented.insert(augmented.end(), fb.evidence_samples.begin(), fb.evidence_samples.end());
    const training::TrainResult tuned = training::fine_tune(trained.model, training::training_view(augmented, tc),
                                                            s.valid, tc);
    model::save_checkpoint(tuned.model, out_dir / "checkpoint_retrained.bin");
    write_file(out_dir / "history_retrained.jsonl", history_text(tuned.history));
    write_file(out_dir / "metrics_retrained.json",
               metrics_json(training::evaluate(tuned.model, augmented, tc.decision_threshold),
                            training::evaluate(tuned.model, s.valid, tc.decision_threshold)));
    produced("checkpoint_retrained.bin");
    produced("history_retrained.jsonl");
    produced("metrics_retrained.json");

    preds_after = extract(tuned.model, sections, cfg.band);
    write_predictions(preds_after, out_dir / "predictions_retrained.jsonl");
    produced("predictions_retrained.jsonl");
    const auto regraph = depgraph::intent_filter(depgraph::build_graph(preds_after, cfg.accept), flow).graph;
    final_graph = depgraph::merge_graphs(fb.graph, regraph);
    write_file(out_dir / "final_graph.txt", graph_text(final_graph));
    write_file(out_dir / "final_graph.dot", depgraph::to_dot(final_graph));
    produced("final_graph.txt");
    produced("final_graph.dot");
  }

  std::string formal;
  {
    Stage emit("emit");
    formal = formalgen::emit_formal_model(final_graph, flow);
    write_file(out_dir / "model.pv", formal);
    write_file(out_dir / "report.txt", emit_report_for(final_graph, cfg));
    produced("model.pv");
    produced("report.txt");
  }
  const auto parsed = formalgen::parse_formal_model(formal, "model.pv");

  ordered_json traces = ordered_json::array();
  for (const auto& r : fb.evidence) {
    PairTrace t;
    t.key = r.key();
    t.verdict = r.verdict;
    t.prob_before = max_prob(preds, t.key);
    t.prob_after = max_prob(preds_after, t.key);
    if (const auto* e = final_graph.find(t.key)) {
      t.final_confidence = e->confidence;
      t.final_status = e->status;
    }
    t.in_formal_model = parsed.graph.contains(t.key);
    summary.traces.push_back(t);
    ordered_json j;
    j["edge"] = depgraph::key_string(t.key);
    j["verdict"] = std::string(feedback::verdict_name(t.verdict));
    j["prob_before"] = t.prob_before;
    j["prob_after_retrain"] = t.prob_after;
    j["final_confidence"] = t.final_confidence;
    j["final_status"] = std::string(depgraph::status_name(t.final_status));
    j["in_formal_model"] = t.in_formal_model;
    traces.push_back(j);
  }
  ordered_json s;
  s["seed"] = seed;
  s["valid_accuracy"] = summary.metrics.micro.accuracy;
  s["valid_exact_match"] = summary.metrics.exact_match;
  s["graph_edges"] = graph.size();
  s["filtered_edges"] = filtered.graph.size();
  s["removed_edges"] = filtered.removed.size();
  s["final_edges"] = final_graph.size();
  s["queries"] = formalgen::query_count(final_graph);
  s["evidence"] = traces;
  produced("summary.json");
  ordered_json arts = ordered_json::array();
  for (const auto& a : summary.artifacts) arts.push_back(a.generic_string());
  s["artifacts"] = arts;
  write_file(out_dir / "summary.json", s.dump(2) + "\n");
  log << "[demo] wrote " << summary.artifacts.size() << " artifacts to " << out_dir.string() << "\n";
  return summary;
}

}  // namespace protodep::pipeline

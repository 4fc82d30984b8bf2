// protodep command-line tool. Every command reads files, writes files under
// --out and exits 0 ok, 2 config error, 3 data error, 4 numeric error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "protodep/errors.hpp"
#include "protodep/pipeline.hpp"

namespace pl = protodep::pipeline;

namespace {

struct Overrides {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus, extract_corpus, checkpoint, predictions, graph, flow, truth, script_template,
      store, evidence_log;
  std::optional<std::size_t> epochs, batch_size, retrain_epochs;
  std::optional<double> lr, low, high, accept;
};

pl::PipelineConfig resolve(const Overrides& o) {
  pl::PipelineConfig c = o.config.empty() ? pl::PipelineConfig{} : pl::load_config(o.config);
  const std::pair<const std::optional<std::string>*, pl::fs::path*> paths[] = {
      {&o.corpus, &c.paths.corpus},           {&o.extract_corpus, &c.paths.extract_corpus},
      {&o.checkpoint, &c.paths.checkpoint},   {&o.predictions, &c.paths.predictions},
      {&o.graph, &c.paths.graph},             {&o.flow, &c.paths.flow},
      {&o.truth, &c.paths.truth},             {&o.script_template, &c.paths.script_template},
      {&o.store, &c.paths.store},             {&o.evidence_log, &c.paths.evidence_log}};
  for (const auto& [flag, field] : paths) {
    if (*flag) *field = **flag;
  }
  if (o.seed) c.seed = o.seed;
  if (c.seed) c.train.seed = *c.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.retrain_epochs) c.retrain_epochs = *o.retrain_epochs;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.low) c.band.low = *o.low;
  if (o.high) c.band.high = *o.high;
  if (o.accept) c.accept = *o.accept;
  c.validate();
  return c;
}

int fail(int code, const std::string& what) {
  const std::string stage = pl::failing_stage();
  std::cerr << "protodep: " << (stage.empty() ? std::string("setup") : stage) << " failed: " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protodep: protocol dependency extraction and formal model generation"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("-c,--config", o.config, "JSON pipeline config");
  app.add_option("-o,--out", o.out, "output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "random seed (required for train and extract)");
  app.add_option("--corpus", o.corpus, "annotated training corpus");
  app.add_option("--extract-corpus", o.extract_corpus, "sections to extract from");
  app.add_option("--checkpoint", o.checkpoint, "model checkpoint");
  app.add_option("--predictions", o.predictions, "predictions file");
  app.add_option("--graph", o.graph, "dependency graph file");
  app.add_option("--flow", o.flow, "information-flow graph file");
  app.add_option("--truth", o.truth, "oracle truth table");
  app.add_option("--template", o.script_template, "probe script template");
  app.add_option("--store", o.store, "ground-truth store");
  app.add_option("--evidence-log", o.evidence_log, "probe log to read instead of the simulated oracle");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--retrain-epochs", o.retrain_epochs, "fine-tuning epochs in demo");
  app.add_option("--batch-size", o.batch_size, "mini-batch size");
  app.add_option("--lr", o.lr, "learning rate");
  app.add_option("--low", o.low, "low-confidence band lower edge");
  app.add_option("--high", o.high, "low-confidence band upper edge");
  app.add_option("--accept", o.accept, "graph acceptance threshold");

  auto* train = app.add_subcommand("train", "train a model; writes checkpoint.bin and history.jsonl");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; writes metrics.json");
  auto* extract = app.add_subcommand("extract", "predict every identifier pair; writes predictions.jsonl");
  auto* graph = app.add_subcommand("graph", "build the dependency graph; writes graph.txt and graph.dot");
  auto* filter = app.add_subcommand("filter", "drop edges the flow graph does not support");
  auto* feedback = app.add_subcommand("feedback", "probe low-confidence edges and apply the evidence");
  auto* emit = app.add_subcommand("emit", "write the formal model and review report");
  auto* demo = app.add_subcommand("demo", "run the whole loop on the configured corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const pl::PipelineConfig c = resolve(o);
    const pl::fs::path out = o.out;
    if (*train) {
      const auto r = pl::run_train(c, out);
      std::cout << "trained " << r.history.size() << " epochs, best epoch " << r.best_epoch << "\n";
    } else if (*eval) {
      pl::run_eval(c, out);
    } else if (*extract) {
      std::cout << pl::run_extract(c, out).size() << " predictions\n";
    } else if (*graph) {
      std::cout << pl::run_graph(c, out).size() << " edges\n";
    } else if (*filter) {
      const auto r = pl::run_filter(c, out);
      std::cout << r.graph.size() << " edges kept, " << r.removed.size() << " removed\n";
    } else if (*feedback) {
      const auto r = pl::run_feedback(c, out);
      std::cout << r.candidates.size() << " candidates, " << r.evidence.size() << " evidence records\n";
    } else if (*emit) {
      pl::run_emit(c, out);
    } else if (*demo) {
      pl::run_demo(c, out, std::cout);
    }
    return 0;
  } catch (const protodep::ConfigError& e) {
    return fail(2, e.what());
  } catch (const protodep::InputError& e) {
    return fail(3, e.what());
  } catch (const protodep::ShapeError& e) {
    return fail(3, e.what());
  } catch (const protodep::NumericError& e) {
    return fail(4, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}

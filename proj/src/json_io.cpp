#include "protodep/json_io.hpp"

#include <algorithm>
#include <initializer_list>
#include <string>

#include "protodep/errors.hpp"

namespace protodep {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; });
    if (!ok) throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

model::Confidence parse_confidence(const std::string& s) {
  for (auto c : {model::Confidence::Rejected, model::Confidence::LowConfidence, model::Confidence::Accepted}) {
    if (model::confidence_name(c) == s) return c;
  }
  throw InputError("unknown confidence class '" + s + "'");
}

}  // namespace

namespace model {

void to_json(nlohmann::json& j, const CalConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},         {"context_layers", c.context_layers},
                     {"context_heads", c.context_heads}, {"cross_layers", c.cross_layers},
                     {"cross_heads", c.cross_heads},     {"self_layers", c.self_layers},
                     {"self_heads", c.self_heads},       {"max_seq_len", c.max_seq_len},
                     {"ffn_width", c.ffn_width},         {"dropout", c.dropout},
                     {"segment_overlap", c.segment_overlap}, {"causal_context", c.causal_context}};
}

void from_json(const nlohmann::json& j, CalConfig& c) {
  reject_unknown(j,
                 {"embed_dim", "context_layers", "context_heads", "cross_layers", "cross_heads", "self_layers",
                  "self_heads", "max_seq_len", "ffn_width", "dropout", "segment_overlap", "causal_context"},
                 "model config");
  read_opt(j, "embed_dim", c.embed_dim);
  read_opt(j, "context_layers", c.context_layers);
  read_opt(j, "context_heads", c.context_heads);
  read_opt(j, "cross_layers", c.cross_layers);
  read_opt(j, "cross_heads", c.cross_heads);
  read_opt(j, "self_layers", c.self_layers);
  read_opt(j, "self_heads", c.self_heads);
  read_opt(j, "max_seq_len", c.max_seq_len);
  read_opt(j, "ffn_width", c.ffn_width);
  read_opt(j, "dropout", c.dropout);
  read_opt(j, "segment_overlap", c.segment_overlap);
  read_opt(j, "causal_context", c.causal_context);
}

void to_json(nlohmann::json& j, const Thresholds& t) { j = nlohmann::json{{"low", t.low}, {"high", t.high}}; }

void from_json(const nlohmann::json& j, Thresholds& t) {
  reject_unknown(j, {"low", "high"}, "thresholds");
  read_opt(j, "low", t.low);
  read_opt(j, "high", t.high);
}

void to_json(nlohmann::json& j, const Prediction& p) {
  nlohmann::json probs, conf;
  for (PropertyKind k : kAllProperties) {
    const std::string name(property_name(k));
    probs[name] = p.probs[index_of(k)];
    conf[name] = std::string(confidence_name(p.confidence[index_of(k)]));
  }
  j = nlohmann::json{{"doc_id", p.doc_id},
                     {"section_id", p.section_id},
                     {"source", p.source},
                     {"destination", p.destination},
                     {"probs", probs},
                     {"confidence", conf},
                     {"property_segment", p.property_segment},
                     {"segment_id", p.segment_id}};
}

void from_json(const nlohmann::json& j, Prediction& p) {
  try {
    p.doc_id = j.at("doc_id").get<std::string>();
    p.section_id = j.at("section_id").get<std::string>();
    p.source = j.at("source").get<std::string>();
    p.destination = j.at("destination").get<std::string>();
    for (PropertyKind k : kAllProperties) {
      const std::string name(property_name(k));
      const double prob = j.at("probs").at(name).get<double>();
      if (!(prob >= 0.0 && prob <= 1.0)) throw InputError("probability for " + name + " outside [0, 1]");
      p.probs[index_of(k)] = prob;
      p.confidence[index_of(k)] = parse_confidence(j.at("confidence").at(name).get<std::string>());
    }
    p.property_segment = j.at("property_segment").get<std::array<std::size_t, kNumProperties>>();
    p.segment_id = j.at("segment_id").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("prediction record: ") + e.what());
  }
}

}  // namespace model

namespace training {

namespace {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }
std::string loss_name(LossKind k) { return k == LossKind::Balanced ? "balanced" : "unweighted"; }

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed},
                     {"optimizer", optimizer_name(c.optimizer)},
                     {"loss", loss_name(c.loss)},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"decision_threshold", c.decision_threshold},
                     {"early_stop", c.early_stop},
                     {"use_refuting_evidence", c.use_refuting_evidence}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"learning_rate", "epochs", "batch_size", "seed", "optimizer", "loss", "beta1", "beta2", "adam_eps",
                  "decision_threshold", "early_stop", "use_refuting_evidence"},
                 "train config");
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "seed", c.seed);
  read_opt(j, "beta1", c.beta1);
  read_opt(j, "beta2", c.beta2);
  read_opt(j, "adam_eps", c.adam_eps);
  read_opt(j, "decision_threshold", c.decision_threshold);
  read_opt(j, "early_stop", c.early_stop);
  read_opt(j, "use_refuting_evidence", c.use_refuting_evidence);
  std::string opt = optimizer_name(c.optimizer), loss = loss_name(c.loss);
  read_opt(j, "optimizer", opt);
  read_opt(j, "loss", loss);
  if (opt == "sgd") {
    c.optimizer = OptimizerKind::Sgd;
  } else if (opt == "adam") {
    c.optimizer = OptimizerKind::Adam;
  } else {
    throw ConfigError("optimizer must be 'sgd' or 'adam', got '" + opt + "'");
  }
  if (loss == "balanced") {
    c.loss = LossKind::Balanced;
  } else if (loss == "unweighted") {
    c.loss = LossKind::Unweighted;
  } else {
    throw ConfigError("loss must be 'balanced' or 'unweighted', got '" + loss + "'");
  }
}

void to_json(nlohmann::json& j, const BinaryMetrics& m) {
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& r : m.roc) roc.push_back({r.fpr, r.tpr, r.threshold});
  j = nlohmann::json{{"tp", m.tp},
                     {"fp", m.fp},
                     {"tn", m.tn},
                     {"fn", m.fn},
                     {"accuracy", m.accuracy},
                     {"precision", m.precision},
                     {"recall", m.recall},
                     {"precision_vacuous", m.precision_vacuous},
                     {"recall_vacuous", m.recall_vacuous},
                     {"auc", m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr)},
                     {"roc", roc}};
}

void to_json(nlohmann::json& j, const Metrics& m) {
  nlohmann::json per;
  for (PropertyKind k : kAllProperties) per[std::string(property_name(k))] = m.per_property[index_of(k)];
  j = nlohmann::json{{"samples", m.samples},
                     {"threshold", m.threshold},
                     {"exact_match", m.exact_match},
                     {"micro", m.micro},
                     {"per_property", per}};
}

}  // namespace training

}  // namespace protodep

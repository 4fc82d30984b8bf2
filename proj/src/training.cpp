#include "protodep/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

#include "json.hpp"
#include "protodep/errors.hpp"

namespace protodep::training {

namespace {

using model::PairQuery;
using model::TokenId;

// Pairs are evaluated in fixed-size chunks so inference memory stays bounded.
constexpr std::size_t kInferenceChunk = 64;

void check_loss_shapes(const Matrix& probs, const Matrix& labels, const Matrix& weights) {
  if (!probs.same_shape(labels) || !probs.same_shape(weights)) {
    throw ShapeError("bce: probs " + probs.shape_string() + ", labels " + labels.shape_string() + ", weights " +
                     weights.shape_string());
  }
  if (probs.rows() == 0) throw InputError("bce: empty batch");
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double element_bce(double p, double y) {
  const double c = clamp_prob(p);
  return -(y * std::log(c) + (1.0 - y) * std::log(1.0 - c));
}

struct Encoded {
  std::vector<std::vector<TokenId>> contexts;
  std::vector<PairQuery> pairs;
};

Encoded encode_samples(const CalModel& model, std::span<const AnnotatedSample> samples) {
  Encoded enc;
  std::map<std::string, std::size_t> index;
  for (const AnnotatedSample& s : samples) {
    auto [it, fresh] = index.emplace(s.context, enc.contexts.size());
    if (fresh) {
      auto ids = model::tokenize(s.context, model.vocab, std::numeric_limits<std::size_t>::max());
      if (ids.empty()) {
        throw InputError("sample " + s.source + " -> " + s.destination + " in " + s.doc_id + "/" + s.section_id +
                         " has an empty context");
      }
      enc.contexts.push_back(std::move(ids));
    }
    enc.pairs.push_back(
        {it->second, model::query_tokens(s.source, s.destination, model.vocab, model.config.max_seq_len)});
  }
  return enc;
}

Matrix infer(const CalModel& model, const Encoded& enc) {
  Matrix out(enc.pairs.size(), kNumProperties);
  for (std::size_t begin = 0; begin < enc.pairs.size(); begin += kInferenceChunk) {
    const std::size_t end = std::min(begin + kInferenceChunk, enc.pairs.size());
    Tape tape(false);
    const std::span<const PairQuery> chunk(enc.pairs.data() + begin, end - begin);
    const Matrix& probs = model::forward_batch(tape, model, enc.contexts, chunk, {}).probs.value();
    std::copy(probs.data().begin(), probs.data().end(), out.row(begin).begin());
  }
  return out;
}

double element_accuracy(const Matrix& probs, const Matrix& labels, double threshold) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    correct += (probs.data()[i] >= threshold) == (labels.data()[i] > 0.5);
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

double loss_value(const Matrix& probs, const Matrix& labels, const ClassStats& stats, LossKind kind) {
  return kind == LossKind::Balanced ? balanced_bce(probs, labels, stats) : unweighted_bce(probs, labels);
}

struct Split {
  Encoded enc;
  Matrix labels;
};

TrainResult run_training(CalModel model, const std::vector<AnnotatedSample>& train_set,
                         const std::vector<AnnotatedSample>& valid_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  const ClassStats stats = corpus::class_stats(train_set);
  const Split tr{encode_samples(model, train_set), label_matrix(train_set)};
  const bool has_valid = !valid_set.empty();
  const Split va = has_valid ? Split{encode_samples(model, valid_set), label_matrix(valid_set)} : Split{};

  std::vector<Matrix*> params = model::tensor_list(model.params);
  OptimizerState state;
  numkit::Rng order_rng(numkit::mix_seed(config.seed, 0));
  numkit::Rng dropout_rng(numkit::mix_seed(config.seed, 1));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::tuple<double, double, double> best{-1.0, -1.0, 0.0};
  std::vector<std::size_t> context_rank(tr.enc.contexts.size());
  std::iota(context_rank.begin(), context_rank.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Samples sharing a context stay adjacent so a batch encodes few contexts.
    order_rng.shuffle(order);
    order_rng.shuffle(context_rank);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return context_rank[tr.enc.pairs[a].context] < context_rank[tr.enc.pairs[b].context];
    });
    for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += config.batch_size, ++batch) {
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      std::vector<PairQuery> pairs;
      Matrix labels(end - begin, kNumProperties);
      for (std::size_t k = begin; k < end; ++k) {
        pairs.push_back(tr.enc.pairs[order[k]]);
        std::copy_n(tr.labels.row(order[k]).begin(), kNumProperties, labels.row(k - begin).begin());
      }
      try {
        Tape tape;
        attention::BlockContext ctx;
        ctx.train = true;
        ctx.rng = &dropout_rng;
        Var probs = model::forward_batch(tape, model, tr.enc.contexts, pairs, ctx).probs;
        Var loss = config.loss == LossKind::Balanced ? balanced_bce(probs, labels, stats)
                                                     : unweighted_bce(probs, labels);
        tape.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(params.size());
        for (const Matrix* p : params) grads.push_back(tape.grad_of(*p));
        optimizer_step(params, grads, config, state);
        ++result.optimizer_steps;
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const Matrix tp = infer(model, tr.enc);
    rec.train_loss = loss_value(tp, tr.labels, stats, config.loss);
    rec.train_acc = element_accuracy(tp, tr.labels, config.decision_threshold);
    if (has_valid) {
      const Matrix vp = infer(model, va.enc);
      rec.valid_loss = loss_value(vp, va.labels, stats, config.loss);
      rec.valid_acc = element_accuracy(vp, va.labels, config.decision_threshold);
    } else {
      rec.valid_loss = rec.train_loss;
      rec.valid_acc = rec.train_acc;
    }
    result.history.push_back(rec);

    const std::tuple<double, double, double> score{rec.valid_acc, rec.train_acc, -rec.valid_loss};
    if (score > best) {
      best = score;
      result.best_epoch = epoch;
      result.model = model;
    }
    if (config.early_stop && rec.train_acc == 1.0 && rec.valid_acc == 1.0) break;
  }
  return result;
}

}  // namespace

Matrix label_matrix(std::span<const AnnotatedSample> samples) {
  Matrix out(samples.size(), kNumProperties);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < kNumProperties; ++p) out(i, p) = samples[i].labels[p] ? 1.0 : 0.0;
  }
  return out;
}

Matrix balanced_weights(const Matrix& labels, const ClassStats& stats) {
  if (stats.total == 0) throw ConfigError("class statistics are empty (N = 0)");
  if (labels.cols() > kNumProperties) throw ShapeError("labels have more than six columns: " + labels.shape_string());
  Matrix w(labels.rows(), labels.cols());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    for (std::size_t p = 0; p < labels.cols(); ++p) w(i, p) = stats.weight(p, labels(i, p) > 0.5);
  }
  return w;
}

double weighted_bce(const Matrix& probs, const Matrix& labels, const Matrix& weights) {
  check_loss_shapes(probs, labels, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    total += weights.data()[i] * element_bce(probs.data()[i], labels.data()[i]);
  }
  return total / static_cast<double>(probs.rows());
}

Var weighted_bce(Var probs, const Matrix& labels, const Matrix& weights) {
  const Matrix& p = probs.value();
  const double value = weighted_bce(p, labels, weights);
  const std::uint32_t ip = probs.id();
  const double inv_batch = 1.0 / static_cast<double>(p.rows());
  const Var ins[] = {probs};
  return probs.tape().record(Matrix(1, 1, value), ins,
                             [ip, labels, weights, inv_batch](Tape& tp, std::uint32_t self) {
                               const double g = tp.grad(self)(0, 0) * inv_batch;
                               const Matrix& pv = tp.value(ip);
                               Matrix& gp = tp.grad_buffer(ip);
                               for (std::size_t i = 0; i < pv.size(); ++i) {
                                 const double x = pv.data()[i];
                                 // Clamped elements are constant in p.
                                 if (x < kProbClamp || x > 1.0 - kProbClamp) continue;
                                 const double y = labels.data()[i];
                                 gp.data()[i] += g * weights.data()[i] * (-y / x + (1.0 - y) / (1.0 - x));
                               }
                             });
}

double balanced_bce(const Matrix& probs, const Matrix& labels, const ClassStats& stats) {
  return weighted_bce(probs, labels, balanced_weights(labels, stats));
}

Var balanced_bce(Var probs, const Matrix& labels, const ClassStats& stats) {
  return weighted_bce(probs, labels, balanced_weights(labels, stats));
}

double unweighted_bce(const Matrix& probs, const Matrix& labels) {
  return weighted_bce(probs, labels, Matrix(labels.rows(), labels.cols(), 1.0));
}

Var unweighted_bce(Var probs, const Matrix& labels) {
  return weighted_bce(probs, labels, Matrix(labels.rows(), labels.cols(), 1.0));
}

// ---------------------------------------------------------------------------

TrainConfig TrainConfig::reference_scale() {
  TrainConfig c;
  c.learning_rate = 1e-7;
  c.epochs = 100;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
    throw ConfigError("decision_threshold must lie in (0, 1)");
  }
}

void optimizer_step(std::span<Matrix* const> params, std::span<const Matrix> grads, const TrainConfig& config,
                    OptimizerState& state) {
  if (params.size() != grads.size()) throw ShapeError("optimizer_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) {
      throw ShapeError("optimizer_step: parameter " + params[i]->shape_string() + " vs gradient " +
                       grads[i].shape_string());
    }
    if (!numkit::all_finite(grads[i])) {
      throw NumericError("optimizer_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }
  const double lr = config.learning_rate;
  ++state.step;
  if (config.optimizer == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i]->data();
      auto g = grads[i].data();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    }
    return;
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.adam_eps);
    }
  }
}

TrainResult train(const std::vector<AnnotatedSample>& train_set, const std::vector<AnnotatedSample>& valid_set,
                  const model::CalConfig& model_config, const TrainConfig& config,
                  std::optional<model::Vocab> vocab) {
  config.validate();
  model_config.validate();
  if (!vocab) {
    std::vector<std::string> texts;
    for (const auto* set : {&train_set, &valid_set}) {
      for (const AnnotatedSample& s : *set) {
        texts.push_back(s.context);
        texts.push_back(s.source);
        texts.push_back(s.destination);
      }
    }
    if (texts.empty()) throw InputError("training set is empty");
    vocab = model::Vocab::build(texts);
  }
  return run_training(model::make_model(model_config, std::move(*vocab), numkit::mix_seed(config.seed, 2)),
                      train_set, valid_set, config);
}

TrainResult fine_tune(const CalModel& initial, const std::vector<AnnotatedSample>& train_set,
                      const std::vector<AnnotatedSample>& valid_set, const TrainConfig& config) {
  return run_training(initial, train_set, valid_set, config);
}

std::vector<AnnotatedSample> training_view(const std::vector<AnnotatedSample>& samples, const TrainConfig& config) {
  std::vector<AnnotatedSample> out;
  for (const AnnotatedSample& s : samples) {
    const bool refuting = s.provenance == corpus::Provenance::Evidence && !any_label(s.labels);
    if (refuting && !config.use_refuting_evidence) continue;
    out.push_back(s);
  }
  return out;
}

void write_history(const std::vector<EpochRecord>& history, std::ostream& out) {
  for (const EpochRecord& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["valid_loss"] = r.valid_loss;
    j["train_acc"] = r.train_acc;
    j["valid_acc"] = r.valid_acc;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels, std::size_t& pos,
                  std::size_t& neg) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  pos = neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw NumericError("non-finite score");
    (labels[i] ? pos : neg) += 1;
  }
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  if (pos == 0 || neg == 0) throw InputError("auc needs at least one positive and one negative label");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives, with midranks for ties, stays integral.
  double twice_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < idx.size();) {
    std::size_t hi = lo;
    while (hi + 1 < idx.size() && scores[idx[hi + 1]] == scores[idx[lo]]) ++hi;
    const double twice_midrank = static_cast<double>(lo + 1 + hi + 1);
    for (std::size_t k = lo; k <= hi; ++k) {
      if (labels[idx[k]]) twice_rank_sum += twice_midrank;
    }
    lo = hi + 1;
  }
  const double p = static_cast<double>(pos);
  const double u = (twice_rank_sum - p * (p + 1.0)) / 2.0;
  return u / (p * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  if (pos == 0 || neg == 0) throw InputError("roc_curve needs at least one positive and one negative label");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out;
  out.push_back({0.0, 0.0, std::nextafter(scores[idx.front()], std::numeric_limits<double>::infinity())});
  std::size_t tp = 0, fp = 0;
  for (std::size_t lo = 0; lo < idx.size();) {
    std::size_t hi = lo;
    while (hi < idx.size() && scores[idx[hi]] == scores[idx[lo]]) {
      (labels[idx[hi]] ? tp : fp) += 1;
      ++hi;
    }
    out.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos), scores[idx[lo]]});
    lo = hi;
  }
  return out;
}

double roc_area(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  std::size_t pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  if (scores.empty()) throw InputError("metrics need at least one element");
  BinaryMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      (predicted ? m.tp : m.fn) += 1;
    } else {
      (predicted ? m.fp : m.tn) += 1;
    }
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(scores.size());
  if (m.tp + m.fp == 0) {
    m.precision_vacuous = true;
  } else {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn == 0) {
    m.recall_vacuous = true;
  } else {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  if (pos > 0 && neg > 0) {
    m.auc = auc(scores, labels);
    m.roc = roc_curve(scores, labels);
  }
  return m;
}

Metrics compute_metrics(const Matrix& probs, const Matrix& labels, double threshold) {
  if (!probs.same_shape(labels) || probs.cols() != kNumProperties) {
    throw ShapeError("compute_metrics: probs " + probs.shape_string() + " vs labels " + labels.shape_string());
  }
  if (probs.rows() == 0) throw InputError("cannot evaluate an empty dataset");
  Metrics out;
  out.samples = probs.rows();
  out.threshold = threshold;
  std::vector<double> all_scores(probs.data().begin(), probs.data().end());
  std::vector<int> all_labels;
  for (double y : labels.data()) all_labels.push_back(y > 0.5 ? 1 : 0);
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      s.push_back(probs(i, p));
      y.push_back(all_labels[i * kNumProperties + p]);
    }
    out.per_property[p] = binary_metrics(s, y, threshold);
  }
  out.micro = binary_metrics(all_scores, all_labels, threshold);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    bool ok = true;
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      ok = ok && ((probs(i, p) >= threshold) == (all_labels[i * kNumProperties + p] == 1));
    }
    exact += ok;
  }
  out.exact_match = static_cast<double>(exact) / static_cast<double>(probs.rows());
  return out;
}

Matrix predict_probs(const CalModel& model, std::span<const AnnotatedSample> samples) {
  if (samples.empty()) return Matrix(0, kNumProperties);
  return infer(model, encode_samples(model, samples));
}

Metrics evaluate(const CalModel& model, std::span<const AnnotatedSample> samples, double threshold) {
  if (samples.empty()) throw InputError("cannot evaluate an empty dataset");
  return compute_metrics(predict_probs(model, samples), label_matrix(samples), threshold);
}

}  // namespace protodep::training

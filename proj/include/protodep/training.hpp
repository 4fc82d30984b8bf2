#pragma once

// Weight-balanced BCE, optimizers, the training loop and evaluation metrics.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "protodep/corpus.hpp"
#include "protodep/model.hpp"

namespace protodep::training {

using corpus::AnnotatedSample;
using corpus::ClassStats;
using model::CalModel;
using numkit::Matrix;
using numkit::Tape;
using numkit::Var;

inline constexpr double kProbClamp = 1e-7;

/// B×K label matrix (K ≤ 6, column p is property p) from samples.
Matrix label_matrix(std::span<const AnnotatedSample> samples);

/// Per-element weight 1 − n_(y)/N where n_(y) counts the element's own
/// label class for its property.
Matrix balanced_weights(const Matrix& labels, const ClassStats& stats);

/// (1/B)·Σ_i Σ_p w_ip·BCE(p_ip, y_ip), probabilities clamped to [ε, 1−ε].
double weighted_bce(const Matrix& probs, const Matrix& labels, const Matrix& weights);
Var weighted_bce(Var probs, const Matrix& labels, const Matrix& weights);

double balanced_bce(const Matrix& probs, const Matrix& labels, const ClassStats& stats);
Var balanced_bce(Var probs, const Matrix& labels, const ClassStats& stats);
/// Same normalisation as balanced_bce with every weight 1.
double unweighted_bce(const Matrix& probs, const Matrix& labels);
Var unweighted_bce(Var probs, const Matrix& labels);

enum class OptimizerKind { Sgd, Adam };
enum class LossKind { Balanced, Unweighted };

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  LossKind loss = LossKind::Balanced;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Binarisation threshold for accuracy during training and evaluation.
  double decision_threshold = 0.5;
  /// Stop once train and validation accuracy are both 1.
  bool early_stop = true;
  /// Keep evidence-refuted samples (all-false labels) in the training set.
  bool use_refuting_evidence = true;

  /// lr 1e-7 over 100 epochs, intended for a pretrained 768-wide backbone.
  static TrainConfig reference_scale();
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct OptimizerState {
  std::size_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// Updates params in place. Every gradient is checked before any parameter
/// moves; a non-finite entry raises NumericError and leaves params intact.
void optimizer_step(std::span<Matrix* const> params, std::span<const Matrix> grads, const TrainConfig& config,
                    OptimizerState& state);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double train_acc = 0.0;
  double valid_acc = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  CalModel model;  // best validation accuracy
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t optimizer_steps = 0;
};

/// Trains from scratch. The vocabulary defaults to every context and
/// identifier of both sets. An empty validation set selects on train accuracy.
TrainResult train(const std::vector<AnnotatedSample>& train_set, const std::vector<AnnotatedSample>& valid_set,
                  const model::CalConfig& model_config, const TrainConfig& config,
                  std::optional<model::Vocab> vocab = std::nullopt);

/// Continues from `initial`, keeping its vocabulary and configuration.
TrainResult fine_tune(const CalModel& initial, const std::vector<AnnotatedSample>& train_set,
                      const std::vector<AnnotatedSample>& valid_set, const TrainConfig& config);

/// Drops refuted-evidence samples unless the config keeps them.
std::vector<AnnotatedSample> training_view(const std::vector<AnnotatedSample>& samples, const TrainConfig& config);

void write_history(const std::vector<EpochRecord>& history, std::ostream& out);

// ---------------------------------------------------------------------------

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  /// Set when the denominator is zero and the value is reported as 1.
  bool precision_vacuous = false;
  bool recall_vacuous = false;
  /// Absent when only one class is present.
  std::optional<double> auc;
  std::vector<RocPoint> roc;
};

struct Metrics {
  std::size_t samples = 0;
  double threshold = 0.5;
  std::array<BinaryMetrics, kNumProperties> per_property{};
  /// Pooled over every (sample, property) element.
  BinaryMetrics micro;
  /// Fraction of samples whose six labels are all predicted correctly.
  double exact_match = 0.0;
};

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);
Metrics compute_metrics(const Matrix& probs, const Matrix& labels, double threshold);

/// Inference probabilities (B×6) for samples, segmenting long contexts.
Matrix predict_probs(const CalModel& model, std::span<const AnnotatedSample> samples);
Metrics evaluate(const CalModel& model, std::span<const AnnotatedSample> samples, double threshold = 0.5);

/// Mann-Whitney statistic: P(score_pos > score_neg) with ties counted 0.5.
double auc(std::span<const double> scores, std::span<const int> labels);
/// Points from (0,0) to (1,1), one per distinct threshold in descending order.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
/// Trapezoidal area under a ROC polyline.
double roc_area(std::span<const RocPoint> roc);

}  // namespace protodep::training

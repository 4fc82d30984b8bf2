#pragma once

// Dense row-major matrices, a reverse-mode tape over them, and a
// finite-difference gradient checker. Only the operations the attention
// classifier needs are provided.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace protodep::numkit {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(const Matrix& m) noexcept;
double max_abs_diff(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ · b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
/// x · w + b, with b a 1×e row broadcast over the rows of x.
Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b);

// Deterministic 64-bit generator (splitmix64 seeding, xoshiro256** stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);
  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) noexcept;

  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

enum class InitScheme { uniform_scaled, zeros, ones };

/// Fan-in is the row count: a d×e weight multiplies d-wide inputs.
Matrix seeded_init(std::size_t rows, std::size_t cols, InitScheme scheme, std::uint64_t seed);
/// As above with an explicit fan-in (embedding tables scale by their width).
Matrix seeded_init(std::size_t rows, std::size_t cols, InitScheme scheme, std::uint64_t seed,
                   std::size_t fan_in);

// ---------------------------------------------------------------------------
// Reverse-mode tape

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::uint32_t)>;

  /// A tape built with gradients off records values only (inference).
  explicit Tape(bool gradients = true) : gradients_(gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Registers `storage` as a differentiable leaf. Repeated calls with the
  /// same storage return the same Var so gradients accumulate in one place.
  Var param(const Matrix& storage);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  const Matrix& value(std::uint32_t id) const { return nodes_[id].value; }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  /// Gradient buffer of a node, zero-allocated on first use.
  Matrix& grad_buffer(std::uint32_t id);
  const Matrix& grad(std::uint32_t id) const { return nodes_[id].grad; }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape backward.
  void backward(Var scalar_loss);
  /// Gradient for a registered parameter; exact zeros if it never took part.
  Matrix grad_of(const Matrix& storage) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  bool gradients_ = true;
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, std::uint32_t> params_;
};

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1×cols row to every row of `a`.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
/// Elementwise product with a constant matrix (dropout masks).
Var mul_const(Var a, const Matrix& mask);
/// Row softmax; when `causal`, entry (i, j) with j > i is masked out.
Var softmax_rows(Var a, bool causal = false);
Var linear(Var x, Var w, Var b);
Var gelu(Var a);
Var sigmoid(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var gather_rows(Var table, std::span<const std::uint32_t> ids);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var mean_rows(Var a);
/// Column-wise maximum over rows (1×cols). Ties resolve to the lowest row;
/// the chosen row per column is written to `argmax` when provided.
Var column_max(Var a, std::vector<std::size_t>* argmax = nullptr);
Var sum_all(Var a);

double gelu_value(double x) noexcept;

// ---------------------------------------------------------------------------

struct GradCheckOptions {
  double eps = 1e-4;
  /// 0 checks every coordinate; otherwise a seeded sample of this many
  /// coordinates per parameter.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
};

/// Builds a scalar on the given tape, reading parameters via Tape::param.
using ScalarFn = std::function<Var(Tape&)>;

/// Max over checked coordinates of |analytic − central difference| / max(1, |analytic|).
double grad_check(const ScalarFn& f, std::span<Matrix* const> params,
                  const GradCheckOptions& options = {});

}  // namespace protodep::numkit

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "protodep/errors.hpp"
#include "protodep/numkit.hpp"

namespace protodep::numkit {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Matrix& m) { return ConstMap(m.data().data(), m.rows(), m.cols()); }
MutMap view(Matrix& m) { return MutMap(m.data().data(), m.rows(), m.cols()); }

void accumulate(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
  return a.tape();
}

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(const Matrix& storage) {
  if (auto it = params_.find(&storage); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{storage, {}, {}, gradients_});
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  params_.emplace(&storage, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  if (!all_finite(value)) throw NumericError("non-finite value produced on tape");
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Matrix& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var scalar_loss) {
  const Matrix& v = value(scalar_loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward needs a 1x1 loss, got " + v.shape_string());
  }
  for (Node& n : nodes_) n.grad = Matrix();
  grad_buffer(scalar_loss.id())(0, 0) = 1.0;
  for (std::size_t i = scalar_loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, static_cast<std::uint32_t>(i));
  }
}

Matrix Tape::grad_of(const Matrix& storage) const {
  auto it = params_.find(&storage);
  if (it == params_.end() || nodes_[it->second].grad.empty()) {
    return Matrix(storage.rows(), storage.cols());
  }
  return nodes_[it->second].grad;
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = matmul(a.value(), b.value());
  const std::uint32_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.record(std::move(out), ins, [ia, ib](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) view(tp.grad_buffer(ia)).noalias() += view(g) * view(tp.value(ib)).transpose();
    if (tp.needs_grad(ib)) view(tp.grad_buffer(ib)).noalias() += view(tp.value(ia)).transpose() * view(g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = matmul_nt(a.value(), b.value());
  const std::uint32_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.record(std::move(out), ins, [ia, ib](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) view(tp.grad_buffer(ia)).noalias() += view(g) * view(tp.value(ib));
    if (tp.needs_grad(ib)) view(tp.grad_buffer(ib)).noalias() += view(g).transpose() * view(tp.value(ia));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = add(a.value(), b.value());
  const std::uint32_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.record(std::move(out), ins, [ia, ib](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) accumulate(tp.grad_buffer(ia), g);
    if (tp.needs_grad(ib)) accumulate(tp.grad_buffer(ib), g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av, rv);
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += rv(0, c);
  }
  const std::uint32_t ia = a.id(), ir = row.id();
  const Var ins[] = {a, row};
  return t.record(std::move(out), ins, [ia, ir](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) accumulate(tp.grad_buffer(ia), g);
    if (tp.needs_grad(ir)) {
      Matrix& gr = tp.grad_buffer(ir);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) gr(0, c) += src[c];
      }
    }
  });
}

Var scale(Var a, double factor) {
  Matrix out = a.value();
  for (double& x : out.data()) x *= factor;
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia, factor](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += factor * g.data()[i];
  });
}

Var mul_const(Var a, const Matrix& mask) {
  const Matrix& av = a.value();
  if (!av.same_shape(mask)) shape_error("mul_const", av, mask);
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia, mask](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += mask.data()[i] * g.data()[i];
  });
}

Var softmax_rows(Var a, bool causal) {
  const Matrix& in = a.value();
  Matrix out(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const std::size_t width = causal ? std::min(in.cols(), r + 1) : in.cols();
    if (width == 0) continue;
    auto src = in.row(r);
    auto dst = out.row(r);
    const double top = *std::max_element(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(width));
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      dst[c] = std::exp(src[c] - top);
      total += dst[c];
    }
    for (std::size_t c = 0; c < width; ++c) dst[c] /= total;
  }
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

double gelu_value(double x) noexcept {
  return 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + kGeluCubic * x * x * x)));
}

Var gelu(Var a) {
  Matrix out = a.value();
  for (double& x : out.data()) x = gelu_value(x);
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& x = tp.value(ia);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.data()[i];
      const double th = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * v * (1.0 - th * th) * kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
      ga.data()[i] += d * g.data()[i];
    }
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = y.data()[i];
      ga.data()[i] += g.data()[i] * s * (1.0 - s);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain);
  const Matrix& in = x.value();
  const std::size_t n = in.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != n) shape_error("layer_norm(gain)", in, gain.value());
  if (!gain.value().same_shape(bias.value())) shape_error("layer_norm(bias)", gain.value(), bias.value());
  Matrix normed(in.rows(), n);
  std::vector<double> inv_std(in.rows());
  Matrix out(in.rows(), n);
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto src = in.row(r);
    double mean = 0.0;
    for (double v : src) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : src) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < n; ++c) {
      normed(r, c) = (src[c] - mean) * inv;
      out(r, c) = normed(r, c) * gv(0, c) + bv(0, c);
    }
  }
  const std::uint32_t ix = x.id(), ig = gain.id(), ib = bias.id();
  const Var ins[] = {x, gain, bias};
  return t.record(std::move(out), ins,
                  [ix, ig, ib, normed = std::move(normed), inv_std = std::move(inv_std)](
                      Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad(self);
                    const Matrix& gv = tp.value(ig);
                    const std::size_t n = g.cols();
                    if (tp.needs_grad(ig) || tp.needs_grad(ib)) {
                      Matrix& gg = tp.grad_buffer(ig);
                      Matrix& gb = tp.grad_buffer(ib);
                      for (std::size_t r = 0; r < g.rows(); ++r) {
                        for (std::size_t c = 0; c < n; ++c) {
                          gg(0, c) += g(r, c) * normed(r, c);
                          gb(0, c) += g(r, c);
                        }
                      }
                    }
                    if (!tp.needs_grad(ix)) return;
                    Matrix& gx = tp.grad_buffer(ix);
                    std::vector<double> dhat(n);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      double sum = 0.0, dot = 0.0;
                      for (std::size_t c = 0; c < n; ++c) {
                        dhat[c] = g(r, c) * gv(0, c);
                        sum += dhat[c];
                        dot += dhat[c] * normed(r, c);
                      }
                      const double k = inv_std[r] / static_cast<double>(n);
                      for (std::size_t c = 0; c < n; ++c) {
                        gx(r, c) += k * (static_cast<double>(n) * dhat[c] - sum - normed(r, c) * dot);
                      }
                    }
                  });
}

Var gather_rows(Var table, std::span<const std::uint32_t> ids) {
  const Matrix& tv = table.value();
  Matrix out(ids.size(), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(tv.rows()) + " rows");
    }
    auto src = tv.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const std::uint32_t it = table.id();
  std::vector<std::uint32_t> rows(ids.begin(), ids.end());
  const Var ins[] = {table};
  return table.tape().record(std::move(out), ins,
                             [it, rows = std::move(rows)](Tape& tp, std::uint32_t self) {
                               const Matrix& g = tp.grad(self);
                               Matrix& gt = tp.grad_buffer(it);
                               for (std::size_t i = 0; i < rows.size(); ++i) {
                                 auto src = g.row(i);
                                 auto dst = gt.row(rows[i]);
                                 for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                               }
                             });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Matrix& av = a.value();
  if (begin > end || end > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + av.shape_string());
  }
  Matrix out(end - begin, av.cols());
  std::copy(av.data().begin() + static_cast<std::ptrdiff_t>(begin * av.cols()),
            av.data().begin() + static_cast<std::ptrdiff_t>(end * av.cols()), out.data().begin());
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia, begin](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    const std::size_t offset = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[offset + i] += g.data()[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.value().size();
    ids.push_back(p.id());
  }
  return t.record(std::move(out), parts, [ids = std::move(ids)](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    std::size_t offset = 0;
    for (std::uint32_t id : ids) {
      const std::size_t n = tp.value(id).size();
      if (tp.needs_grad(id)) {
        Matrix& gi = tp.grad_buffer(id);
        for (std::size_t i = 0; i < n; ++i) gi.data()[i] += g.data()[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols();
    ids.push_back(p.id());
  }
  return t.record(std::move(out), parts, [ids = std::move(ids)](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    std::size_t offset = 0;
    for (std::uint32_t id : ids) {
      const std::size_t w = tp.value(id).cols();
      if (tp.needs_grad(id)) {
        Matrix& gi = tp.grad_buffer(id);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, offset + c);
        }
      }
      offset += w;
    }
  });
}

Var mean_rows(Var a) {
  const Matrix& av = a.value();
  if (av.rows() == 0) throw ShapeError("mean_rows: empty input");
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  }
  const double inv = 1.0 / static_cast<double>(av.rows());
  for (double& x : out.data()) x *= inv;
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia, inv](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) * inv;
    }
  });
}

Var column_max(Var a, std::vector<std::size_t>* argmax) {
  const Matrix& av = a.value();
  if (av.rows() == 0) throw ShapeError("column_max: empty input");
  Matrix out(1, av.cols());
  std::vector<std::size_t> best(av.cols(), 0);
  for (std::size_t c = 0; c < av.cols(); ++c) {
    out(0, c) = av(0, c);
    for (std::size_t r = 1; r < av.rows(); ++r) {
      if (av(r, c) > out(0, c)) {
        out(0, c) = av(r, c);
        best[c] = r;
      }
    }
  }
  if (argmax) *argmax = best;
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(std::move(out), ins, [ia, best = std::move(best)](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t c = 0; c < best.size(); ++c) ga(best[c], c) += g(0, c);
  });
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const std::uint32_t ia = a.id();
  const Var ins[] = {a};
  return a.tape().record(Matrix(1, 1, total), ins, [ia](Tape& tp, std::uint32_t self) {
    const double g = tp.grad(self)(0, 0);
    for (double& x : tp.grad_buffer(ia).data()) x += g;
  });
}

// ---------------------------------------------------------------------------

double grad_check(const ScalarFn& f, std::span<Matrix* const> params, const GradCheckOptions& options) {
  if (!(options.eps > 0.0 && options.eps <= 1e-2)) {
    throw ConfigError("grad_check: eps must lie in (0, 1e-2], got " + std::to_string(options.eps));
  }
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
    for (Matrix* p : params) analytic.push_back(tape.grad_of(*p));
  }
  auto evaluate = [&f] {
    Tape tape;
    const double v = f(tape).value()(0, 0);
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite objective at perturbed point");
    return v;
  };

  Rng rng(options.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    std::vector<std::size_t> coords(p.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (options.coords_per_param != 0 && coords.size() > options.coords_per_param) {
      rng.shuffle(coords);
      coords.resize(options.coords_per_param);
    }
    for (std::size_t idx : coords) {
      const double original = p.data()[idx];
      p.data()[idx] = original + options.eps;
      double plus = 0.0, minus = 0.0;
      try {
        plus = evaluate();
        p.data()[idx] = original - options.eps;
        minus = evaluate();
      } catch (...) {
        p.data()[idx] = original;
        throw;
      }
      p.data()[idx] = original;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[k].data()[idx];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace protodep::numkit

#include "protodep/attention.hpp"

#include <cmath>

#include "protodep/errors.hpp"

namespace protodep::attention {

namespace {

Var dropout(Var x, double rate, const BlockContext& ctx) {
  if (!ctx.train || rate <= 0.0) return x;
  if (ctx.rng == nullptr) throw ConfigError("dropout in training mode needs an rng");
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - rate;
  for (double& m : mask.data()) m = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
  return mul_const(x, mask);
}

Var feed_forward(Var x, const BlockParams& p, Tape& t) {
  Var hidden = gelu(linear(x, t.param(p.ffn_w1), t.param(p.ffn_b1)));
  return linear(hidden, t.param(p.ffn_w2), t.param(p.ffn_b2));
}

Var block(Var x_q, const Var* x_ctx, const BlockParams& p, const BlockContext& ctx) {
  Tape& t = x_q.tape();
  Var g1 = t.param(p.ln1_gain);
  Var b1 = t.param(p.ln1_bias);
  Var q_norm = layer_norm(x_q, g1, b1);
  Var kv_norm = x_ctx ? layer_norm(*x_ctx, g1, b1) : q_norm;
  BlockContext attn_ctx = ctx;
  if (x_ctx) attn_ctx.causal = false;
  Var attended = multi_head(q_norm, kv_norm, p.attention, attn_ctx);
  Var x1 = add(x_q, dropout(attended, p.dropout, ctx));
  Var ff = feed_forward(layer_norm(x1, t.param(p.ln2_gain), t.param(p.ln2_bias)), p, t);
  return add(x1, dropout(ff, p.dropout, ctx));
}

}  // namespace

BlockParams init_block(std::size_t dim, std::size_t heads, std::size_t ffn_width, double dropout,
                       std::uint64_t seed) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " must divide width " + std::to_string(dim));
  }
  using numkit::InitScheme;
  using numkit::mix_seed;
  using numkit::seeded_init;
  const std::size_t head_dim = dim / heads;
  std::uint64_t stream = 0;
  auto draw = [&](std::size_t r, std::size_t c, InitScheme s) {
    return seeded_init(r, c, s, mix_seed(seed, stream++));
  };
  BlockParams p;
  p.ln1_gain = draw(1, dim, InitScheme::ones);
  p.ln1_bias = draw(1, dim, InitScheme::zeros);
  for (std::size_t h = 0; h < heads; ++h) {
    HeadParams head;
    head.w_q = draw(dim, head_dim, InitScheme::uniform_scaled);
    head.w_k = draw(dim, head_dim, InitScheme::uniform_scaled);
    head.w_v = draw(dim, head_dim, InitScheme::uniform_scaled);
    p.attention.heads.push_back(std::move(head));
  }
  p.attention.w_o = draw(dim, dim, InitScheme::uniform_scaled);
  p.attention.b_o = draw(1, dim, InitScheme::zeros);
  p.ln2_gain = draw(1, dim, InitScheme::ones);
  p.ln2_bias = draw(1, dim, InitScheme::zeros);
  p.ffn_w1 = draw(dim, ffn_width, InitScheme::uniform_scaled);
  p.ffn_b1 = draw(1, ffn_width, InitScheme::zeros);
  p.ffn_w2 = draw(ffn_width, dim, InitScheme::uniform_scaled);
  p.ffn_b2 = draw(1, dim, InitScheme::zeros);
  p.dropout = dropout;
  return p;
}

AttentionResult attention_core(const Matrix& q, const Matrix& k, const Matrix& v) {
  Tape t;
  Matrix scores;
  Var out = attention_core(t.constant(q), t.constant(k), t.constant(v), false, &scores);
  return {std::move(scores), out.value()};
}

Var attention_core(Var q, Var k, Var v, bool causal, Matrix* scores) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention_core: query width " + std::to_string(q.cols()) +
                     " differs from key width " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention_core: " + std::to_string(k.rows()) + " keys but " +
                     std::to_string(v.rows()) + " values");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var weights = softmax_rows(scale(matmul_nt(q, k), inv_sqrt), causal);
  if (scores) *scores = weights.value();
  return matmul(weights, v);
}

Var multi_head(Var x_q, Var x_kv, const AttentionParams& p, const BlockContext& ctx) {
  if (x_q.cols() != x_kv.cols()) {
    throw ShapeError("multi_head: query width " + std::to_string(x_q.cols()) +
                     " differs from context width " + std::to_string(x_kv.cols()));
  }
  Tape& t = x_q.tape();
  std::vector<Var> outputs;
  outputs.reserve(p.heads.size());
  for (const HeadParams& h : p.heads) {
    Matrix scores;
    Var q = matmul(x_q, t.param(h.w_q));
    Var k = matmul(x_kv, t.param(h.w_k));
    Var v = matmul(x_kv, t.param(h.w_v));
    outputs.push_back(attention_core(q, k, v, ctx.causal, ctx.scores ? &scores : nullptr));
    if (ctx.scores) ctx.scores->push_back(std::move(scores));
  }
  Var joined = outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
  return linear(joined, t.param(p.w_o), t.param(p.b_o));
}

Matrix multi_head(const Matrix& x_q, const Matrix& x_kv, const AttentionParams& p) {
  Tape t;
  return multi_head(t.constant(x_q), t.constant(x_kv), p, BlockContext{}).value();
}

Var encoder_block(Var x, const BlockParams& p, const BlockContext& ctx) {
  return block(x, nullptr, p, ctx);
}

Var cross_block(Var x_q, Var x_ctx, const BlockParams& p, const BlockContext& ctx) {
  return block(x_q, &x_ctx, p, ctx);
}

Matrix encoder_block(const Matrix& x, const BlockParams& p) {
  Tape t;
  return encoder_block(t.constant(x), p, BlockContext{}).value();
}

Matrix cross_block(const Matrix& x_q, const Matrix& x_ctx, const BlockParams& p) {
  Tape t;
  return cross_block(t.constant(x_q), t.constant(x_ctx), p, BlockContext{}).value();
}

}  // namespace protodep::attention

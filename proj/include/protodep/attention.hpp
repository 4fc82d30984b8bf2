#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protodep/numkit.hpp"

namespace protodep::attention {

using numkit::Matrix;
using numkit::Tape;
using numkit::Var;

struct HeadParams {
  Matrix w_q;  // d × d_q
  Matrix w_k;  // d × d_k, d_k = d_q
  Matrix w_v;  // d × d_v
};

struct AttentionParams {
  std::vector<HeadParams> heads;
  Matrix w_o;  // (heads·d_v) × d
  Matrix b_o;  // 1 × d
};

/// Pre-norm transformer block: attention sub-layer then a GELU feed-forward
/// sub-layer, each wrapped in a residual connection.
struct BlockParams {
  Matrix ln1_gain, ln1_bias;
  AttentionParams attention;
  Matrix ln2_gain, ln2_bias;
  Matrix ffn_w1, ffn_b1;  // d × f, 1 × f
  Matrix ffn_w2, ffn_b2;  // f × d, 1 × d
  double dropout = 0.0;
};

/// Visits every learnable matrix of a block in a fixed order.
template <class Block, class Fn>
void for_each_tensor(Block& block, const std::string& prefix, Fn&& fn) {
  fn(prefix + ".ln1_gain", block.ln1_gain);
  fn(prefix + ".ln1_bias", block.ln1_bias);
  for (std::size_t h = 0; h < block.attention.heads.size(); ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    fn(head + ".w_q", block.attention.heads[h].w_q);
    fn(head + ".w_k", block.attention.heads[h].w_k);
    fn(head + ".w_v", block.attention.heads[h].w_v);
  }
  fn(prefix + ".w_o", block.attention.w_o);
  fn(prefix + ".b_o", block.attention.b_o);
  fn(prefix + ".ln2_gain", block.ln2_gain);
  fn(prefix + ".ln2_bias", block.ln2_bias);
  fn(prefix + ".ffn_w1", block.ffn_w1);
  fn(prefix + ".ffn_b1", block.ffn_b1);
  fn(prefix + ".ffn_w2", block.ffn_w2);
  fn(prefix + ".ffn_b2", block.ffn_b2);
}

/// Seeded initialisation; heads must divide `dim`.
BlockParams init_block(std::size_t dim, std::size_t heads, std::size_t ffn_width, double dropout,
                       std::uint64_t seed);

/// Per-call evaluation switches.
struct BlockContext {
  bool train = false;
  numkit::Rng* rng = nullptr;  // required when train && dropout > 0
  bool causal = false;         // mask future keys in self-attention
  /// When set, every head's score matrix is appended here.
  std::vector<Matrix>* scores = nullptr;
};

struct AttentionResult {
  Matrix scores;  // n1 × n2, rows sum to 1
  Matrix out;     // n1 × d_v
};

/// softmax(q·kᵀ/√d_q)·v
AttentionResult attention_core(const Matrix& q, const Matrix& k, const Matrix& v);
Var attention_core(Var q, Var k, Var v, bool causal = false, Matrix* scores = nullptr);

Var multi_head(Var x_q, Var x_kv, const AttentionParams& p, const BlockContext& ctx);
Matrix multi_head(const Matrix& x_q, const Matrix& x_kv, const AttentionParams& p);

Var encoder_block(Var x, const BlockParams& p, const BlockContext& ctx);
Var cross_block(Var x_q, Var x_ctx, const BlockParams& p, const BlockContext& ctx);
Matrix encoder_block(const Matrix& x, const BlockParams& p);
Matrix cross_block(const Matrix& x_q, const Matrix& x_ctx, const BlockParams& p);

}  // namespace protodep::attention

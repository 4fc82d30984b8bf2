#pragma once

// The cross-/self-attention classifier: tokenizer, context encoder, query
// encoder, cross-attention and self-attention stacks, and a six-way sigmoid
// head, plus document segmentation for inputs longer than the window.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "protodep/attention.hpp"
#include "protodep/property.hpp"

namespace protodep::model {

using attention::BlockContext;
using attention::BlockParams;
using numkit::Matrix;
using numkit::Tape;
using numkit::Var;

using TokenId = std::uint32_t;

/// Splits on whitespace; runs of alphanumerics, '-' and '_' form one token,
/// every other printable character is a token on its own.
std::vector<std::string> split_tokens(std::string_view text);

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kSep = 2;

  Vocab();
  /// Tokens with frequency ≥ min_freq, ordered by frequency (descending)
  /// then lexicographically, after the three special tokens.
  static Vocab build(std::span<const std::string> texts, std::size_t min_freq = 1);
  static Vocab from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// One token per line, in id order.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Unknown tokens map to UNK; the result is truncated to max_len, never padded.
std::vector<TokenId> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);

struct CalConfig {
  std::size_t embed_dim = 64;
  std::size_t context_layers = 2;
  std::size_t context_heads = 4;
  std::size_t cross_layers = 2;
  std::size_t cross_heads = 2;
  std::size_t self_layers = 2;
  std::size_t self_heads = 2;
  std::size_t max_seq_len = 128;
  std::size_t ffn_width = 256;
  double dropout = 0.1;
  std::size_t segment_overlap = 16;
  /// Causal masking inside the context encoder. Off: bidirectional encoder.
  bool causal_context = false;

  static constexpr std::size_t num_properties = kNumProperties;

  /// Layer/head/width family of a GPT-2-small backbone with 6+6 attention layers.
  static CalConfig reference_scale();
  void validate() const;
  bool operator==(const CalConfig&) const = default;
};

struct ModelParams {
  Matrix token_embedding;       // |vocab| × d
  Matrix positional_embedding;  // max_seq_len × d
  std::vector<BlockParams> context_blocks;
  Matrix context_norm_gain, context_norm_bias;
  std::vector<BlockParams> cross_blocks;
  std::vector<BlockParams> self_blocks;
  Matrix query_norm_gain, query_norm_bias;
  Matrix classifier_w;  // d × 6
  Matrix classifier_b;  // 1 × 6
};

template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn(std::string("token_embedding"), p.token_embedding);
  fn(std::string("positional_embedding"), p.positional_embedding);
  for (std::size_t i = 0; i < p.context_blocks.size(); ++i) {
    attention::for_each_tensor(p.context_blocks[i], "context" + std::to_string(i), fn);
  }
  fn(std::string("context_norm_gain"), p.context_norm_gain);
  fn(std::string("context_norm_bias"), p.context_norm_bias);
  for (std::size_t i = 0; i < p.cross_blocks.size(); ++i) {
    attention::for_each_tensor(p.cross_blocks[i], "cross" + std::to_string(i), fn);
  }
  for (std::size_t i = 0; i < p.self_blocks.size(); ++i) {
    attention::for_each_tensor(p.self_blocks[i], "self" + std::to_string(i), fn);
  }
  fn(std::string("query_norm_gain"), p.query_norm_gain);
  fn(std::string("query_norm_bias"), p.query_norm_bias);
  fn(std::string("classifier_w"), p.classifier_w);
  fn(std::string("classifier_b"), p.classifier_b);
}

ModelParams init_params(const CalConfig& config, std::size_t vocab_size, std::uint64_t seed);
std::vector<Matrix*> tensor_list(ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

/// Config, vocabulary and weights: everything inference needs.
struct CalModel {
  CalConfig config;
  Vocab vocab;
  ModelParams params;
};

CalModel make_model(const CalConfig& config, Vocab vocab, std::uint64_t seed);

/// Binary checkpoint: magic, version, config JSON, vocabulary, named
/// tensors as raw IEEE-754 doubles. Reload is bit-exact.
void save_checkpoint(const CalModel& model, const std::filesystem::path& path);
void write_checkpoint(const CalModel& model, std::ostream& out);
CalModel load_checkpoint(const std::filesystem::path& path);
CalModel read_checkpoint(std::istream& in);

// ---------------------------------------------------------------------------

struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const Segment&) const = default;
};

/// Windows of at most max_len tokens advancing by max_len − overlap.
std::vector<Segment> segment_document(std::size_t num_tokens, std::size_t max_len, std::size_t overlap);

/// Token + position embeddings through the context encoder stack.
Var encode_context(Tape& tape, std::span<const TokenId> segment, const CalModel& model,
                   const BlockContext& ctx);
Matrix encode_context(std::span<const TokenId> segment, const CalModel& model);

/// Token ids of "source SEP destination".
std::vector<TokenId> query_tokens(std::string_view source, std::string_view destination, const Vocab& vocab,
                                  std::size_t max_len);
Var embed_query(Tape& tape, std::span<const TokenId> ids, const CalModel& model);
Matrix encode_query(std::string_view source, std::string_view destination, const CalModel& model);

/// Probabilities (1×6) for one query against one encoded context.
Var cal_forward(Var ctx, Var qry, const CalModel& model, const BlockContext& block_ctx);
Probabilities cal_forward(const Matrix& ctx, const Matrix& qry, const CalModel& model);

struct PairQuery {
  std::size_t context = 0;  // index into the context list
  std::vector<TokenId> query;
};

struct BatchOutput {
  Var probs;  // pairs × 6, per-property max over segments
  std::vector<std::array<std::size_t, kNumProperties>> best_segment;
};

/// Evaluates many pairs at once. Pairs sharing a context share its encoding
/// and are stacked through the cross-attention layers (rows are independent
/// there), then split for the self-attention layers.
BatchOutput forward_batch(Tape& tape, const CalModel& model, std::span<const std::vector<TokenId>> contexts,
                          std::span<const PairQuery> pairs, const BlockContext& ctx);

// ---------------------------------------------------------------------------

enum class Confidence { Rejected, LowConfidence, Accepted };
std::string_view confidence_name(Confidence c) noexcept;

struct Thresholds {
  double low = 0.3;
  double high = 0.7;
  void validate() const;
  /// [0, low) rejected, [low, high) low confidence, [high, 1] accepted.
  Confidence classify(double prob) const noexcept;
};

struct Prediction {
  std::string doc_id;
  std::string section_id;
  std::string source;
  std::string destination;
  Probabilities probs{};
  std::array<std::size_t, kNumProperties> property_segment{};
  /// Segment that produced the highest probability overall.
  std::size_t segment_id = 0;
  std::array<Confidence, kNumProperties> confidence{};

  bool operator==(const Prediction&) const = default;
};

struct SegmentMerge {
  Probabilities probs{};
  std::array<std::size_t, kNumProperties> property_segment{};
  std::size_t segment_id = 0;
};

/// Per-property max over segments; ties go to the lowest segment index.
SegmentMerge merge_segments(std::span<const Probabilities> per_segment);

Prediction predict_pair(std::string_view doc, std::string_view source, std::string_view destination,
                        const CalModel& model, const Thresholds& thresholds);
/// One prediction per ordered pair (s, d), s ≠ d, ordered by (s index, d index).
std::vector<Prediction> predict_all_pairs(std::string_view doc, std::span<const std::string> identifiers,
                                          const CalModel& model, const Thresholds& thresholds);

/// Mean of the cross-attention score matrices over layers and heads (m × n).
Matrix export_attention_map(const Matrix& ctx, const Matrix& qry, const CalModel& model);

struct AttentionMap {
  std::vector<std::string> query_tokens;
  std::vector<std::string> context_tokens;
  Matrix scores;
};

/// Attention map of one pair over the first segment of `doc`.
AttentionMap attention_map_for_pair(std::string_view doc, std::string_view source, std::string_view destination,
                                    const CalModel& model);
/// Tab-separated grid with a header row of context tokens and a leading
/// column of query tokens.
void write_attention_map(const AttentionMap& map, std::ostream& out);

}  // namespace protodep::model

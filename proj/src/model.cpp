#include "protodep/model.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "protodep/errors.hpp"
#include "protodep/json_io.hpp"

namespace protodep::model {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '-' || c == '_' || c >= 0x80;
}

const std::array<std::string, 3> kSpecials = {"<pad>", "<unk>", "<sep>"};

BlockContext with_causal(BlockContext ctx, bool causal) {
  ctx.causal = causal;
  return ctx;
}

Var cross_stack(Var qry, Var ctx, const CalModel& model, const BlockContext& bctx) {
  const BlockContext c = with_causal(bctx, false);
  for (const BlockParams& b : model.params.cross_blocks) qry = attention::cross_block(qry, ctx, b, c);
  return qry;
}

Var classify(Var qry, const CalModel& model, const BlockContext& bctx) {
  Tape& t = qry.tape();
  const ModelParams& p = model.params;
  BlockContext c = with_causal(bctx, false);
  c.scores = nullptr;
  for (const BlockParams& b : p.self_blocks) qry = attention::encoder_block(qry, b, c);
  Var normed = layer_norm(qry, t.param(p.query_norm_gain), t.param(p.query_norm_bias));
  Var logits = linear(mean_rows(normed), t.param(p.classifier_w), t.param(p.classifier_b));
  return sigmoid(logits);
}

// Little-endian binary helpers for the checkpoint container.
void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  char b[8];
  if (!in.read(b, bytes)) throw InputError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::string get_string(std::istream& in) {
  const std::uint64_t n = get_uint(in, 8);
  if (n > (1ULL << 32)) throw InputError("checkpoint string length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw InputError("checkpoint truncated");
  return s;
}

constexpr char kMagic[8] = {'P', 'D', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// Tokenizer and vocabulary

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      word.push_back(ch);
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

Vocab::Vocab() {
  for (const std::string& s : kSpecials) {
    index_.emplace(s, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(s);
  }
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t min_freq) {
  if (texts.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const std::string& t : texts) {
    for (std::string& tok : split_tokens(t)) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= std::max<std::size_t>(min_freq, 1)) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [tok, n] : kept) {
    if (v.index_.contains(tok)) continue;
    v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kSpecials.size() || !std::equal(kSpecials.begin(), kSpecials.end(), tokens.begin())) {
    throw InputError("vocabulary must start with <pad>, <unk>, <sep>");
  }
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  for (std::string& t : tokens) {
    if (!v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size())).second) {
      throw InputError("duplicate vocabulary token '" + t + "'");
    }
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.contains(std::string(token)); }

void Vocab::write(std::ostream& out) const {
  for (const std::string& t : tokens_) out << t << '\n';
}

Vocab Vocab::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

std::vector<TokenId> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  std::vector<TokenId> ids;
  for (const std::string& tok : split_tokens(text)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(tok));
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Configuration and parameters

CalConfig CalConfig::reference_scale() {
  CalConfig c;
  c.embed_dim = 768;
  c.context_layers = 12;
  c.context_heads = 12;
  c.cross_layers = 6;
  c.cross_heads = 6;
  c.self_layers = 6;
  c.self_heads = 6;
  c.max_seq_len = 1024;
  c.ffn_width = 3072;
  c.dropout = 0.1;
  c.segment_overlap = 128;
  return c;
}

void CalConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(context_layers, "context_layers");
  positive(context_heads, "context_heads");
  positive(cross_layers, "cross_layers");
  positive(cross_heads, "cross_heads");
  positive(self_layers, "self_layers");
  positive(self_heads, "self_heads");
  positive(ffn_width, "ffn_width");
  if (max_seq_len < 8) throw ConfigError("max_seq_len must be at least 8");
  for (std::size_t h : {context_heads, cross_heads, self_heads}) {
    if (embed_dim % h != 0) {
      throw ConfigError("head count " + std::to_string(h) + " does not divide embed_dim " +
                        std::to_string(embed_dim));
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (segment_overlap >= max_seq_len) throw ConfigError("segment_overlap must be smaller than max_seq_len");
}

ModelParams init_params(const CalConfig& config, std::size_t vocab_size, std::uint64_t seed) {
  config.validate();
  using numkit::InitScheme;
  using numkit::mix_seed;
  using numkit::seeded_init;
  const std::size_t d = config.embed_dim;
  std::uint64_t stream = 0;
  auto next_seed = [&] { return mix_seed(seed, stream++); };

  ModelParams p;
  p.token_embedding = seeded_init(vocab_size, d, InitScheme::uniform_scaled, next_seed(), d);
  p.positional_embedding = seeded_init(config.max_seq_len, d, InitScheme::uniform_scaled, next_seed(), d);
  for (std::size_t i = 0; i < config.context_layers; ++i) {
    p.context_blocks.push_back(
        attention::init_block(d, config.context_heads, config.ffn_width, config.dropout, next_seed()));
  }
  p.context_norm_gain = Matrix(1, d, 1.0);
  p.context_norm_bias = Matrix(1, d, 0.0);
  for (std::size_t i = 0; i < config.cross_layers; ++i) {
    p.cross_blocks.push_back(
        attention::init_block(d, config.cross_heads, config.ffn_width, config.dropout, next_seed()));
  }
  for (std::size_t i = 0; i < config.self_layers; ++i) {
    p.self_blocks.push_back(
        attention::init_block(d, config.self_heads, config.ffn_width, config.dropout, next_seed()));
  }
  p.query_norm_gain = Matrix(1, d, 1.0);
  p.query_norm_bias = Matrix(1, d, 0.0);
  p.classifier_w = seeded_init(d, kNumProperties, InitScheme::uniform_scaled, next_seed());
  p.classifier_b = Matrix(1, kNumProperties, 0.0);
  return p;
}

std::vector<Matrix*> tensor_list(ModelParams& params) {
  std::vector<Matrix*> out;
  for_each_tensor(params, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

CalModel make_model(const CalConfig& config, Vocab vocab, std::uint64_t seed) {
  CalModel m;
  m.config = config;
  m.params = init_params(config, vocab.size(), seed);
  m.vocab = std::move(vocab);
  return m;
}

void write_checkpoint(const CalModel& model, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_string(out, nlohmann::json(model.config).dump());
  put_u64(out, model.vocab.size());
  for (const std::string& t : model.vocab.tokens()) put_string(out, t);
  std::size_t count = 0;
  for_each_tensor(model.params, [&](const std::string&, const Matrix&) { ++count; });
  put_u64(out, count);
  for_each_tensor(model.params, [&](const std::string& name, const Matrix& m) {
    put_string(out, name);
    put_u64(out, m.rows());
    put_u64(out, m.cols());
    for (double x : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  });
}

void save_checkpoint(const CalModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  write_checkpoint(model, out);
}

CalModel read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw InputError("not a protodep checkpoint");
  const auto version = get_uint(in, 4);
  if (version != kCheckpointVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
  CalModel model;
  try {
    model.config = nlohmann::json::parse(get_string(in)).get<CalConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint config: ") + e.what());
  }
  const std::uint64_t vocab_size = get_uint(in, 8);
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(get_string(in));
  model.vocab = Vocab::from_tokens(std::move(tokens));
  model.params = init_params(model.config, model.vocab.size(), 0);

  std::size_t expected = 0;
  for_each_tensor(model.params, [&](const std::string&, Matrix&) { ++expected; });
  if (get_uint(in, 8) != expected) throw InputError("checkpoint tensor count does not match its config");
  for_each_tensor(model.params, [&](const std::string& name, Matrix& m) {
    const std::string stored = get_string(in);
    const auto rows = get_uint(in, 8);
    const auto cols = get_uint(in, 8);
    if (stored != name || rows != m.rows() || cols != m.cols()) {
      throw InputError("checkpoint tensor '" + stored + "' does not match expected '" + name + "' " +
                       m.shape_string());
    }
    for (double& x : m.data()) x = std::bit_cast<double>(get_uint(in, 8));
    if (!numkit::all_finite(m)) throw NumericError("checkpoint tensor '" + name + "' holds non-finite values");
  });
  return model;
}

CalModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Forward passes

std::vector<Segment> segment_document(std::size_t num_tokens, std::size_t max_len, std::size_t overlap) {
  if (max_len == 0 || overlap >= max_len) {
    throw ConfigError("segment overlap " + std::to_string(overlap) + " must be smaller than window " +
                      std::to_string(max_len));
  }
  std::vector<Segment> out;
  const std::size_t stride = max_len - overlap;
  for (std::size_t begin = 0; begin < num_tokens; begin += stride) {
    const std::size_t end = std::min(begin + max_len, num_tokens);
    out.push_back({begin, end});
    if (end == num_tokens) break;
  }
  return out;
}

Var encode_context(Tape& tape, std::span<const TokenId> segment, const CalModel& model, const BlockContext& ctx) {
  const ModelParams& p = model.params;
  if (segment.empty()) throw ShapeError("encode_context: empty segment");
  if (segment.size() > model.config.max_seq_len) {
    throw ShapeError("encode_context: segment of " + std::to_string(segment.size()) +
                     " tokens exceeds max_seq_len " + std::to_string(model.config.max_seq_len));
  }
  Var x = add(gather_rows(tape.param(p.token_embedding), segment),
              slice_rows(tape.param(p.positional_embedding), 0, segment.size()));
  const BlockContext c = with_causal(ctx, model.config.causal_context);
  for (const BlockParams& b : p.context_blocks) x = attention::encoder_block(x, b, c);
  return layer_norm(x, tape.param(p.context_norm_gain), tape.param(p.context_norm_bias));
}

Matrix encode_context(std::span<const TokenId> segment, const CalModel& model) {
  Tape t(false);
  return encode_context(t, segment, model, BlockContext{}).value();
}

std::vector<TokenId> query_tokens(std::string_view source, std::string_view destination, const Vocab& vocab,
                                  std::size_t max_len) {
  std::vector<TokenId> ids = tokenize(source, vocab, max_len);
  ids.push_back(Vocab::kSep);
  for (TokenId id : tokenize(destination, vocab, max_len)) ids.push_back(id);
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

Var embed_query(Tape& tape, std::span<const TokenId> ids, const CalModel& model) {
  const ModelParams& p = model.params;
  if (ids.empty() || ids.size() > model.config.max_seq_len) {
    throw ShapeError("embed_query: query of " + std::to_string(ids.size()) + " tokens");
  }
  return add(gather_rows(tape.param(p.token_embedding), ids),
             slice_rows(tape.param(p.positional_embedding), 0, ids.size()));
}

Matrix encode_query(std::string_view source, std::string_view destination, const CalModel& model) {
  Tape t(false);
  const auto ids = query_tokens(source, destination, model.vocab, model.config.max_seq_len);
  return embed_query(t, ids, model).value();
}

Var cal_forward(Var ctx, Var qry, const CalModel& model, const BlockContext& block_ctx) {
  return classify(cross_stack(qry, ctx, model, block_ctx), model, block_ctx);
}

Probabilities cal_forward(const Matrix& ctx, const Matrix& qry, const CalModel& model) {
  Tape t(false);
  const Matrix& out = cal_forward(t.constant(ctx), t.constant(qry), model, BlockContext{}).value();
  Probabilities probs{};
  std::copy(out.data().begin(), out.data().end(), probs.begin());
  return probs;
}

BatchOutput forward_batch(Tape& tape, const CalModel& model, std::span<const std::vector<TokenId>> contexts,
                          std::span<const PairQuery> pairs, const BlockContext& ctx) {
  if (pairs.empty()) throw InputError("forward_batch: no pairs");
  std::vector<std::vector<std::size_t>> groups(contexts.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].context >= contexts.size()) throw InputError("forward_batch: context index out of range");
    groups[pairs[i].context].push_back(i);
  }

  std::vector<std::vector<Var>> per_segment(pairs.size());
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    const auto& members = groups[c];
    if (members.empty()) continue;
    const auto segments =
        segment_document(contexts[c].size(), model.config.max_seq_len, model.config.segment_overlap);
    if (segments.empty()) throw InputError("forward_batch: empty context");

    std::vector<Var> queries;
    std::vector<std::size_t> offsets{0};
    for (std::size_t i : members) {
      queries.push_back(embed_query(tape, pairs[i].query, model));
      offsets.push_back(offsets.back() + pairs[i].query.size());
    }
    Var stacked = queries.size() == 1 ? queries.front() : concat_rows(queries);
    const std::span<const TokenId> ids(contexts[c]);
    for (const Segment& seg : segments) {
      Var encoded = encode_context(tape, ids.subspan(seg.begin, seg.end - seg.begin), model, ctx);
      Var refined = cross_stack(stacked, encoded, model, ctx);
      for (std::size_t k = 0; k < members.size(); ++k) {
        Var rows = members.size() == 1 ? refined : slice_rows(refined, offsets[k], offsets[k + 1]);
        per_segment[members[k]].push_back(classify(rows, model, ctx));
      }
    }
  }

  BatchOutput out;
  std::vector<Var> rows;
  rows.reserve(pairs.size());
  for (auto& segs : per_segment) {
    std::array<std::size_t, kNumProperties> best{};
    if (segs.size() == 1) {
      rows.push_back(segs.front());
    } else {
      std::vector<std::size_t> argmax;
      rows.push_back(column_max(concat_rows(segs), &argmax));
      std::copy(argmax.begin(), argmax.end(), best.begin());
    }
    out.best_segment.push_back(best);
  }
  out.probs = rows.size() == 1 ? rows.front() : concat_rows(rows);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

std::string_view confidence_name(Confidence c) noexcept {
  switch (c) {
    case Confidence::Rejected:
      return "rejected";
    case Confidence::LowConfidence:
      return "low_confidence";
    case Confidence::Accepted:
      return "accepted";
  }
  return "rejected";
}

void Thresholds::validate() const {
  if (!(low >= 0.0 && low < high && high <= 1.0)) {
    throw ConfigError("thresholds must satisfy 0 <= low < high <= 1");
  }
}

Confidence Thresholds::classify(double prob) const noexcept {
  if (prob >= high) return Confidence::Accepted;
  if (prob >= low) return Confidence::LowConfidence;
  return Confidence::Rejected;
}

SegmentMerge merge_segments(std::span<const Probabilities> per_segment) {
  if (per_segment.empty()) throw InputError("merge_segments: no segments");
  SegmentMerge m;
  m.probs = per_segment.front();
  for (std::size_t s = 1; s < per_segment.size(); ++s) {
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      if (per_segment[s][p] > m.probs[p]) {
        m.probs[p] = per_segment[s][p];
        m.property_segment[p] = s;
      }
    }
  }
  const auto top = std::max_element(m.probs.begin(), m.probs.end()) - m.probs.begin();
  m.segment_id = m.property_segment[static_cast<std::size_t>(top)];
  return m;
}

namespace {

std::vector<Prediction> predict_pairs(std::string_view doc,
                                      const std::vector<std::pair<std::string, std::string>>& pairs,
                                      const CalModel& model, const Thresholds& thresholds) {
  thresholds.validate();
  std::vector<std::vector<TokenId>> contexts{tokenize(doc, model.vocab, static_cast<std::size_t>(-1))};
  if (contexts.front().empty()) throw InputError("cannot predict on an empty document");
  std::vector<PairQuery> queries;
  for (const auto& [s, d] : pairs) {
    queries.push_back({0, query_tokens(s, d, model.vocab, model.config.max_seq_len)});
  }
  Tape tape(false);
  BatchOutput batch = forward_batch(tape, model, contexts, queries, BlockContext{});
  const Matrix& probs = batch.probs.value();

  std::vector<Prediction> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Prediction pred;
    pred.source = pairs[i].first;
    pred.destination = pairs[i].second;
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      pred.probs[p] = probs(i, p);
      pred.confidence[p] = thresholds.classify(pred.probs[p]);
    }
    pred.property_segment = batch.best_segment[i];
    const auto top = std::max_element(pred.probs.begin(), pred.probs.end()) - pred.probs.begin();
    pred.segment_id = pred.property_segment[static_cast<std::size_t>(top)];
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace

Prediction predict_pair(std::string_view doc, std::string_view source, std::string_view destination,
                        const CalModel& model, const Thresholds& thresholds) {
  return predict_pairs(doc, {{std::string(source), std::string(destination)}}, model, thresholds).front();
}

std::vector<Prediction> predict_all_pairs(std::string_view doc, std::span<const std::string> identifiers,
                                          const CalModel& model, const Thresholds& thresholds) {
  if (identifiers.size() < 2) throw InputError("predict_all_pairs needs at least two identifiers");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& s : identifiers) {
    for (const std::string& d : identifiers) {
      if (s != d) pairs.emplace_back(s, d);
    }
  }
  return predict_pairs(doc, pairs, model, thresholds);
}

Matrix export_attention_map(const Matrix& ctx, const Matrix& qry, const CalModel& model) {
  if (model.params.cross_blocks.empty()) throw ConfigError("model has no cross-attention layers");
  Tape t(false);
  std::vector<Matrix> scores;
  BlockContext bctx;
  bctx.scores = &scores;
  Var context = t.constant(ctx);
  Var q = t.constant(qry);
  for (const BlockParams& b : model.params.cross_blocks) q = attention::cross_block(q, context, b, bctx);
  Matrix mean(qry.rows(), ctx.rows());
  for (const Matrix& s : scores) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] += s.data()[i];
  }
  for (double& x : mean.data()) x /= static_cast<double>(scores.size());
  return mean;
}

AttentionMap attention_map_for_pair(std::string_view doc, std::string_view source, std::string_view destination,
                                    const CalModel& model) {
  const auto ids = tokenize(doc, model.vocab, model.config.max_seq_len);
  if (ids.empty()) throw InputError("cannot build an attention map for an empty document");
  const auto qids = query_tokens(source, destination, model.vocab, model.config.max_seq_len);
  Tape t(false);
  const Matrix ctx = encode_context(t, ids, model, BlockContext{}).value();
  const Matrix qry = embed_query(t, qids, model).value();

  AttentionMap map;
  map.scores = export_attention_map(ctx, qry, model);
  auto doc_tokens = split_tokens(doc);
  doc_tokens.resize(ids.size());
  map.context_tokens = std::move(doc_tokens);
  map.query_tokens = split_tokens(source);
  map.query_tokens.push_back("<sep>");
  for (auto& tok : split_tokens(destination)) map.query_tokens.push_back(std::move(tok));
  map.query_tokens.resize(qids.size());
  return map;
}

void write_attention_map(const AttentionMap& map, std::ostream& out) {
  out << "query\\context";
  for (const std::string& t : map.context_tokens) out << '\t' << t;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < map.scores.rows(); ++r) {
    out << (r < map.query_tokens.size() ? map.query_tokens[r] : std::string("?"));
    for (std::size_t c = 0; c < map.scores.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.6f", map.scores(r, c));
      out << '\t' << buf;
    }
    out << '\n';
  }
}

}  // namespace protodep::model

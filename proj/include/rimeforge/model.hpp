#pragma once

// Tiny decoder-only transformer that serves as rewriter and dual-mode
// embedder from one parameter set. Pre-norm blocks (RMS norm with learned
// gains), causal multi-head attention, tanh feed-forward, untied output
// projection. Embeddings are the L2-normalized final-norm hidden state at
// the <disc_emb> / <gen_emb> position.
//
// There are exactly two forward implementations:
//   - Decoder: incremental, KV-cached; used for generation, encoding and
//     teacher-forced scoring outside of training.
//   - TapeModel: tape-recorded whole-sequence forward for gradients.
// Both call the same kernels with per-row fixed-order arithmetic, so a
// hidden state computed on either path is bit-identical.

#include <cmath>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rimeforge/kernels.hpp"
#include "rimeforge/rng.hpp"
#include "rimeforge/tape.hpp"
#include "rimeforge/tensor.hpp"
#include "rimeforge/vocab.hpp"

namespace rimeforge {

inline constexpr double kRmsEps = 1e-6;

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int max_seq = 96;
  int vocab_size = 0;  // set from the Vocab
  int rollout_budget = 64;

  void validate() const {
    require(d_model > 0 && n_heads > 0 && n_layers > 0 && max_seq > 0, Err::BadConfig,
            "model dims must be positive");
    require(d_model % n_heads == 0, Err::BadConfig, "d_model must be divisible by n_heads");
    require(vocab_size > 0, Err::BadConfig, "vocab_size unset");
    require(rollout_budget >= 0 && rollout_budget < max_seq, Err::BadConfig,
            "rollout_budget must fit in max_seq");
  }

  bool operator==(const ModelConfig&) const = default;
};

// Parameter layout, in checkpoint order.
inline std::vector<std::pair<std::string, std::vector<int64_t>>> param_layout(
    const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<int64_t>>> out;
  out.push_back({"tok_emb", {c.vocab_size, c.d_model}});
  out.push_back({"pos_emb", {c.max_seq, c.d_model}});
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string b = "blk" + std::to_string(l) + ".";
    out.push_back({b + "attn_gain", {1, c.d_model}});
    out.push_back({b + "wq", {c.d_model, c.d_model}});
    out.push_back({b + "wk", {c.d_model, c.d_model}});
    out.push_back({b + "wv", {c.d_model, c.d_model}});
    out.push_back({b + "wo", {c.d_model, c.d_model}});
    out.push_back({b + "ffn_gain", {1, c.d_model}});
    out.push_back({b + "w1", {c.d_model, 4 * c.d_model}});
    out.push_back({b + "w2", {4 * c.d_model, c.d_model}});
  }
  out.push_back({"final_gain", {1, c.d_model}});
  out.push_back({"out_proj", {c.d_model, c.vocab_size}});
  return out;
}

inline int64_t param_count(const ModelConfig& c) {
  int64_t n = 0;
  for (const auto& [name, shape] : param_layout(c)) n += shape_numel(shape);
  return n;
}

template <typename T>
struct Model {
  ModelConfig cfg;
  Vocab vocab;
  ParamStore<T> params;

  template <typename U>
  Model<U> cast() const {
    return Model<U>{cfg, vocab, params.template cast<U>()};
  }
};

// Initialization scheme: each weight matrix is uniform in (-s, s) with
// s = 1/sqrt(fan_in) (fan_in = first dimension for projections, d_model for
// the embedding tables), halved for out_proj so initial logits are near
// zero; norm gains start at 1. Every matrix draws from its own rng stream
// keyed by (seed, matrix name), so the layout order does not affect values.
template <typename T>
Model<T> init_model(const ModelConfig& cfg, const Vocab& vocab, uint64_t seed) {
  ModelConfig c = cfg;
  c.vocab_size = vocab.size();
  c.validate();
  Model<T> m{c, vocab, {}};
  for (const auto& [name, shape] : param_layout(c)) {
    Tensor<T> t(shape);
    if (name.ends_with("gain")) {
      for (T& v : t.data) v = T{1};
    } else {
      double fan_in = static_cast<double>(shape[0]);
      if (name == "tok_emb" || name == "pos_emb") fan_in = c.d_model;
      double s = 1.0 / std::sqrt(fan_in);
      if (name == "out_proj") s *= 0.5;
      Rng rng(seed, hash_str(name.c_str()));
      for (T& v : t.data) v = static_cast<T>(rng.uniform(-s, s));
    }
    m.params.add(name, std::move(t));
  }
  return m;
}

// --- incremental decoder ---------------------------------------------------

template <typename T>
class Decoder {
 public:
  explicit Decoder(const Model<T>& m) : m_(m), d_(m.cfg.d_model) {
    kcache_.resize(static_cast<size_t>(m.cfg.n_layers));
    vcache_.resize(static_cast<size_t>(m.cfg.n_layers));
    for (auto& c : kcache_) c.reserve(static_cast<size_t>(m.cfg.max_seq * d_));
    for (auto& c : vcache_) c.reserve(static_cast<size_t>(m.cfg.max_seq * d_));
  }

  int64_t size() const { return pos_; }

  void push(int token) {
    require(pos_ < m_.cfg.max_seq, Err::SequenceTooLong,
            "sequence exceeds max_seq=" + std::to_string(m_.cfg.max_seq));
    require(token >= 0 && token < m_.cfg.vocab_size, Err::DataError, "token id out of range");
    const auto& tok = m_.params["tok_emb"];
    const auto& pos = m_.params["pos_emb"];
    std::vector<T> h(static_cast<size_t>(d_));
    for (int64_t j = 0; j < d_; ++j)
      h[static_cast<size_t>(j)] = tok.at(token, j) + pos.at(pos_, j);

    const int heads = m_.cfg.n_heads;
    const int64_t dh = d_ / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<T> a(static_cast<size_t>(d_)), q(static_cast<size_t>(d_)),
        attn(static_cast<size_t>(d_)), tmp(static_cast<size_t>(4 * d_));
    for (int l = 0; l < m_.cfg.n_layers; ++l) {
      const std::string b = "blk" + std::to_string(l) + ".";
      scaled_norm(h.data(), a.data(), m_.params[b + "attn_gain"]);
      auto& kc = kcache_[static_cast<size_t>(l)];
      auto& vc = vcache_[static_cast<size_t>(l)];
      kc.resize(static_cast<size_t>((pos_ + 1) * d_));
      vc.resize(static_cast<size_t>((pos_ + 1) * d_));
      rowmat(a.data(), m_.params[b + "wq"], q.data());
      rowmat(a.data(), m_.params[b + "wk"], kc.data() + pos_ * d_);
      rowmat(a.data(), m_.params[b + "wv"], vc.data() + pos_ * d_);
      for (int hd = 0; hd < heads; ++hd) {
        const int64_t c0 = hd * dh;
        kernels::attn_row(q.data() + c0, kc.data(), vc.data(), d_, c0, pos_, dh, inv_sqrt_dh,
                          attn.data() + c0, static_cast<T*>(nullptr));
      }
      rowmat(attn.data(), m_.params[b + "wo"], a.data());
      for (int64_t j = 0; j < d_; ++j) h[static_cast<size_t>(j)] += a[static_cast<size_t>(j)];
      scaled_norm(h.data(), a.data(), m_.params[b + "ffn_gain"]);
      rowmat(a.data(), m_.params[b + "w1"], tmp.data());
      for (int64_t j = 0; j < 4 * d_; ++j) tmp[static_cast<size_t>(j)] = std::tanh(tmp[static_cast<size_t>(j)]);
      rowmatg(tmp.data(), m_.params[b + "w2"], a.data());
      for (int64_t j = 0; j < d_; ++j) h[static_cast<size_t>(j)] += a[static_cast<size_t>(j)];
    }
    last_hidden_.resize(static_cast<size_t>(d_));
    scaled_norm(h.data(), last_hidden_.data(), m_.params["final_gain"]);
    ++pos_;
  }

  void push(std::span<const int> tokens) {
    for (int t : tokens) push(t);
  }

  // Final-normed hidden state of the most recently pushed token.
  const std::vector<T>& last_hidden() const { return last_hidden_; }

  std::vector<T> last_logits() const {
    std::vector<T> out(static_cast<size_t>(m_.cfg.vocab_size), T{0});
    kernels::matmul_acc(last_hidden_.data(), m_.params["out_proj"].data.data(), out.data(), 1, d_,
                        m_.cfg.vocab_size);
    return out;
  }

 private:
  void scaled_norm(const T* x, T* y, const Tensor<T>& gain) {
    kernels::rms_normalize_row(x, y, d_, kRmsEps);
    for (int64_t j = 0; j < d_; ++j) y[j] *= gain.data[j];
  }
  void rowmat(const T* x, const Tensor<T>& w, T* y) {
    std::memset(y, 0, sizeof(T) * static_cast<size_t>(w.shape[1]));
    kernels::matmul_acc(x, w.data.data(), y, 1, w.shape[0], w.shape[1]);
  }
  void rowmatg(const T* x, const Tensor<T>& w, T* y) { rowmat(x, w, y); }

  const Model<T>& m_;
  int64_t d_;
  int64_t pos_ = 0;
  std::vector<std::vector<T>> kcache_, vcache_;
  std::vector<T> last_hidden_;
};

// --- embeddings and rollouts -------------------------------------------------

enum class EmbedMode { Disc, Gen };

struct Embedding {
  std::vector<double> v;
  EmbedMode mode = EmbedMode::Disc;
  std::string item_id;

  double dot(const Embedding& o) const {
    double s = 0;
    for (size_t i = 0; i < v.size(); ++i) s += v[i] * o.v[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct RewriteRollout {
  std::vector<int> tokens;
  std::vector<double> logprobs;  // temperature-1 policy log-probs, one per token
  bool format_ok = false;

  int64_t length() const { return static_cast<int64_t>(tokens.size()); }
  double sum_logprob() const {
    double s = 0;
    for (double lp : logprobs) s += lp;
    return s;
  }
  double mean_logprob() const {
    return tokens.empty() ? 0.0 : sum_logprob() / static_cast<double>(tokens.size());
  }
};

template <typename T>
Embedding embedding_from_hidden(const std::vector<T>& h, EmbedMode mode, std::string item_id) {
  std::vector<T> unit(h.size());
  kernels::l2_normalize_row(h.data(), unit.data(), static_cast<int64_t>(h.size()));
  Embedding e;
  e.v.assign(unit.begin(), unit.end());
  e.mode = mode;
  e.item_id = std::move(item_id);
  return e;
}

template <typename T>
Embedding encode_disc(const Model<T>& m, std::vector<int> tokens, std::string item_id = {}) {
  if (tokens.empty() || tokens.back() != Vocab::kDiscEmb) tokens.push_back(Vocab::kDiscEmb);
  Decoder<T> dec(m);
  dec.push(tokens);
  return embedding_from_hidden(dec.last_hidden(), EmbedMode::Disc, std::move(item_id));
}

template <typename T>
Embedding encode_gen(const Model<T>& m, const std::vector<int>& input,
                     std::span<const int> rollout, std::string item_id = {}) {
  Decoder<T> dec(m);
  dec.push(input);
  dec.push(rollout);
  dec.push(Vocab::kGenEmb);
  return embedding_from_hidden(dec.last_hidden(), EmbedMode::Gen, std::move(item_id));
}

// Log-softmax of a logits row, computed in double.
template <typename T>
std::vector<double> logits_to_logprobs(const std::vector<T>& logits) {
  std::vector<double> d(logits.begin(), logits.end());
  std::vector<double> out(d.size());
  kernels::log_softmax_row(d.data(), out.data(), static_cast<int64_t>(d.size()));
  return out;
}

// Autoregressive rewrite generation. sample_temp > 0 samples from the
// tempered distribution; sample_temp == 0 is the greedy (argmax) limit.
// Recorded log-probs are always those of the temperature-1 policy.
template <typename T>
RewriteRollout generate_rewrite(const Model<T>& m, const std::vector<int>& input, int budget,
                                double sample_temp, Rng rng) {
  require(sample_temp >= 0, Err::BadConfig, "sample_temp must be >= 0");
  require(static_cast<int64_t>(input.size()) + budget + 1 <= m.cfg.max_seq, Err::SequenceTooLong,
          "input + rollout budget exceeds max_seq");
  RewriteRollout out;
  Decoder<T> dec(m);
  dec.push(input);
  for (int step = 0; step < budget; ++step) {
    const std::vector<T> logits = dec.last_logits();
    const std::vector<double> logprobs = logits_to_logprobs(logits);
    int tok;
    if (sample_temp == 0.0) {
      tok = 0;
      for (size_t j = 1; j < logits.size(); ++j)
        if (logits[j] > logits[static_cast<size_t>(tok)]) tok = static_cast<int>(j);
    } else {
      std::vector<double> t(logits.size());
      for (size_t j = 0; j < logits.size(); ++j) t[j] = static_cast<double>(logits[j]) / sample_temp;
      std::vector<double> probs(t.size());
      kernels::softmax_row(t.data(), probs.data(), static_cast<int64_t>(t.size()));
      const double u = rng.next_double();
      double cum = 0;
      tok = static_cast<int>(probs.size()) - 1;
      for (size_t j = 0; j < probs.size(); ++j) {
        cum += probs[j];
        if (u < cum) {
          tok = static_cast<int>(j);
          break;
        }
      }
    }
    out.tokens.push_back(tok);
    out.logprobs.push_back(logprobs[static_cast<size_t>(tok)]);
    if (tok == Vocab::kEos) break;
    dec.push(tok);
  }
  out.format_ok = matches_rewrite_template(out.tokens, m.vocab);
  return out;
}

// Teacher-forced log-probs of exactly `rollout` appended after `input`.
template <typename T>
std::vector<double> rollout_logprob(const Model<T>& m, const std::vector<int>& input,
                                    std::span<const int> rollout) {
  require(static_cast<int64_t>(input.size() + rollout.size()) <= m.cfg.max_seq,
          Err::SequenceTooLong, "input + rollout exceeds max_seq");
  std::vector<double> out;
  out.reserve(rollout.size());
  Decoder<T> dec(m);
  dec.push(input);
  for (int tok : rollout) {
    const std::vector<double> lp = logits_to_logprobs(dec.last_logits());
    out.push_back(lp[static_cast<size_t>(tok)]);
    if (out.size() == rollout.size()) break;
    dec.push(tok);
  }
  return out;
}

// --- tape-recorded forward (training path) -----------------------------------

template <typename T>
class TapeModel {
 public:
  using Var = typename Tape<T>::Var;

  TapeModel(Tape<T>& tape, const Model<T>& m) : tape_(tape), m_(m) {
    for (const auto& name : m.params.names) vars_[name] = tape.param(name, m.params[name]);
  }

  const Model<T>& model() const { return m_; }

  // Final-normed hidden states [S, d] of the whole sequence.
  Var hidden(std::span<const int> tokens) {
    require(static_cast<int64_t>(tokens.size()) <= m_.cfg.max_seq, Err::SequenceTooLong,
            "sequence exceeds max_seq");
    std::vector<int64_t> tok_ids(tokens.begin(), tokens.end());
    std::vector<int64_t> pos_ids(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) pos_ids[i] = static_cast<int64_t>(i);
    Var h = tape_.add(tape_.gather_rows(vars_.at("tok_emb"), tok_ids),
                      tape_.gather_rows(vars_.at("pos_emb"), pos_ids));
    for (int l = 0; l < m_.cfg.n_layers; ++l) {
      const std::string b = "blk" + std::to_string(l) + ".";
      Var a = tape_.mul_rowvec(tape_.rms_normalize_rows(h, kRmsEps), vars_.at(b + "attn_gain"));
      Var attn = tape_.attention(tape_.matmul(a, vars_.at(b + "wq")),
                                 tape_.matmul(a, vars_.at(b + "wk")),
                                 tape_.matmul(a, vars_.at(b + "wv")), m_.cfg.n_heads);
      h = tape_.add(h, tape_.matmul(attn, vars_.at(b + "wo")));
      Var f = tape_.mul_rowvec(tape_.rms_normalize_rows(h, kRmsEps), vars_.at(b + "ffn_gain"));
      h = tape_.add(h, tape_.matmul(tape_.tanh_op(tape_.matmul(f, vars_.at(b + "w1"))),
                                    vars_.at(b + "w2")));
    }
    return tape_.mul_rowvec(tape_.rms_normalize_rows(h, kRmsEps), vars_.at("final_gain"));
  }

  // Logits for the selected rows of a hidden matrix -> [P, vocab].
  Var logits_at(Var hidden_mat, std::vector<int64_t> positions) {
    return tape_.matmul(tape_.gather_rows(hidden_mat, std::move(positions)), vars_.at("out_proj"));
  }

  // L2-normalized embedding read at one position -> [1, d].
  Var embedding_at(Var hidden_mat, int64_t pos) {
    return tape_.l2_normalize_rows(tape_.gather_rows(hidden_mat, {pos}));
  }

  Tape<T>& tape() { return tape_; }

 private:
  Tape<T>& tape_;
  const Model<T>& m_;
  std::map<std::string, Var> vars_;
};

// --- checkpoint io -----------------------------------------------------------
//
// Layout (all integers little-endian):
//   magic "RIMEFORGE1" | u32 version | i32 d_model,n_heads,n_layers,max_seq,
//   rollout_budget | u32 first_content | u32 n_suffix + u32 ids |
//   u32 vocab_size + (u16 len + bytes) per token name |
//   u32 n_params + per param (u16 name len + bytes, u8 rank, u32 dims...) |
//   f32 values for every parameter in declared order |
//   u64 FNV-1a checksum of all preceding bytes.

namespace detail {

inline void put_u16(std::string& b, uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& b, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(b, u);
}

struct ByteReader {
  const std::string& b;
  size_t pos = 0;
  void need(size_t n) const {
    require(pos + n <= b.size(), Err::IoError, "checkpoint truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint8_t>(b[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(b[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = b.substr(pos, n);
    pos += n;
    return s;
  }
};

inline uint64_t fnv1a64(const char* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<uint8_t>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

inline constexpr const char* kCheckpointMagic = "RIMEFORGE1";

template <typename T>
std::string serialize_checkpoint(const Model<T>& m) {
  std::string b;
  b.append(kCheckpointMagic);
  detail::put_u32(b, 1);
  for (int v : {m.cfg.d_model, m.cfg.n_heads, m.cfg.n_layers, m.cfg.max_seq, m.cfg.rollout_budget})
    detail::put_u32(b, static_cast<uint32_t>(v));
  detail::put_u32(b, static_cast<uint32_t>(m.vocab.first_content));
  detail::put_u32(b, static_cast<uint32_t>(m.vocab.suffix.size()));
  for (int s : m.vocab.suffix) detail::put_u32(b, static_cast<uint32_t>(s));
  detail::put_u32(b, static_cast<uint32_t>(m.vocab.size()));
  for (const auto& n : m.vocab.names) {
    detail::put_u16(b, static_cast<uint16_t>(n.size()));
    b.append(n);
  }
  detail::put_u32(b, static_cast<uint32_t>(m.params.size()));
  for (size_t i = 0; i < m.params.size(); ++i) {
    detail::put_u16(b, static_cast<uint16_t>(m.params.names[i].size()));
    b.append(m.params.names[i]);
    const auto& shape = m.params.values[i].shape;
    b.push_back(static_cast<char>(shape.size()));
    for (int64_t d : shape) detail::put_u32(b, static_cast<uint32_t>(d));
  }
  for (const auto& v : m.params.values)
    for (T x : v.data) detail::put_f32(b, static_cast<float>(x));
  detail::put_u64(b, detail::fnv1a64(b.data(), b.size()));
  return b;
}

template <typename T>
void save_checkpoint(const Model<T>& m, const std::string& path) {
  const std::string b = serialize_checkpoint(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), Err::IoError, "cannot open checkpoint for write: " + path);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  require(f.good(), Err::IoError, "checkpoint write failed: " + path);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open checkpoint: " + path);
  std::string b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(b.size() > 18, Err::IoError, "checkpoint too small: " + path);
  const uint64_t want = detail::fnv1a64(b.data(), b.size() - 8);
  detail::ByteReader tail{b, b.size() - 8};
  require(tail.u64() == want, Err::IoError, "checkpoint checksum mismatch: " + path);

  detail::ByteReader r{b};
  require(r.str(10) == kCheckpointMagic, Err::IoError, "bad checkpoint magic: " + path);
  require(r.u32() == 1, Err::IoError, "unsupported checkpoint version");
  Model<T> m;
  m.cfg.d_model = static_cast<int>(r.u32());
  m.cfg.n_heads = static_cast<int>(r.u32());
  m.cfg.n_layers = static_cast<int>(r.u32());
  m.cfg.max_seq = static_cast<int>(r.u32());
  m.cfg.rollout_budget = static_cast<int>(r.u32());
  const int first_content = static_cast<int>(r.u32());
  const uint32_t n_suffix = r.u32();
  std::vector<int> suffix;
  for (uint32_t i = 0; i < n_suffix; ++i) suffix.push_back(static_cast<int>(r.u32()));
  const uint32_t vocab_size = r.u32();
  for (uint32_t i = 0; i < vocab_size; ++i) {
    const uint16_t len = r.u16();
    m.vocab.add(r.str(len));
  }
  m.vocab.suffix = std::move(suffix);
  m.vocab.first_content = first_content;
  m.cfg.vocab_size = m.vocab.size();
  const uint32_t n_params = r.u32();
  std::vector<std::pair<std::string, std::vector<int64_t>>> layout;
  for (uint32_t i = 0; i < n_params; ++i) {
    const uint16_t len = r.u16();
    std::string name = r.str(len);
    const uint8_t rank = static_cast<uint8_t>(r.str(1)[0]);
    std::vector<int64_t> shape;
    for (uint8_t d = 0; d < rank; ++d) shape.push_back(static_cast<int64_t>(r.u32()));
    layout.push_back({std::move(name), std::move(shape)});
  }
  for (auto& [name, shape] : layout) {
    Tensor<T> t(shape);
    for (auto& v : t.data) v = static_cast<T>(r.f32());
    m.params.add(name, std::move(t));
  }
  m.cfg.validate();
  return m;
}

// Loads a checkpoint and verifies it matches the expected architecture.
template <typename T>
Model<T> load_checkpoint_expecting(const std::string& path, const ModelConfig& expected) {
  Model<T> m = load_checkpoint<T>(path);
  ModelConfig want = expected;
  want.vocab_size = m.cfg.vocab_size;  // vocab is carried by the checkpoint
  require(m.cfg == want, Err::CheckpointMismatch,
          "checkpoint architecture disagrees with configuration: " + path);
  return m;
}

}  // namespace rimeforge

#pragma once

// Flat key-value run configuration with dotted sections.
//
// Grammar: one `key = value` per line; `#` starts a comment; blank lines
// ignored. Keys are dotted paths (task.*, model.*, sft.*, rl.*, eval.*, or
// the bare keys `seed` and `precision`). Unknown keys are hard errors.
// Booleans are `true`/`false`. canonical_text() renders every key in a fixed
// order with full float precision; its hash identifies the configuration.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "rimeforge/grpo.hpp"
#include "rimeforge/model.hpp"
#include "rimeforge/synthtask.hpp"

namespace rimeforge {

struct SftConfig {
  double lambda = 1.0;
  double tau = 0.02;
  int batch_size = 16;   // micro-batch; in-batch negatives
  int accum_steps = 2;   // effective batch = batch_size * accum_steps
  double lr = 5e-5;
  int epochs = 3;
  bool include_intra = true;
  bool symmetric = false;
  bool gen_over_gold = true;
  std::string optimizer = "adam";
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

  void validate() const {
    require(lambda >= 0, Err::ConfigError, "sft.lambda must be >= 0");
    require(tau > 0, Err::ConfigError, "sft.tau must be > 0");
    require(batch_size >= 2, Err::ConfigError, "sft.batch_size must be >= 2");
    require(accum_steps >= 1, Err::ConfigError, "sft.accum_steps must be >= 1");
    require(lr > 0 && epochs >= 1, Err::ConfigError, "sft.lr/epochs must be positive");
  }
};

struct RlRunConfig {
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double advantage_eps = 1e-8;
  double lr = 5e-6;
  int steps = 200;
  int queries_per_step = 4;
  double sample_temp = 1.0;
  int pos_rollouts = 2;
  int neg_targets = 2;
  int neg_rollouts = 2;
  bool single_negative_disc = false;
  std::string optimizer = "sgd";
  int checkpoint_every = 0;  // steps between checkpoints; 0 = final only
  bool interleave_joint = false;

  RlConfig to_rl_config() const {
    RlConfig c;
    c.group_size = group_size;
    c.clip_eps = clip_eps;
    c.kl_beta = kl_beta;
    c.advantage_eps = advantage_eps;
    c.lr = lr;
    c.steps = steps;
    c.queries_per_step = queries_per_step;
    c.sample_temp = sample_temp;
    c.reward.pos_rollouts = pos_rollouts;
    c.reward.neg_targets = neg_targets;
    c.reward.neg_rollouts = neg_rollouts;
    c.reward.sample_temp = sample_temp;
    c.reward.single_negative_disc = single_negative_disc;
    c.interleave_joint = interleave_joint;
    c.validate();
    return c;
  }
};

struct EvalConfig {
  std::string modes = "disc-disc,disc-gen,gen-disc,gen-gen";
  int rank_depth = 10;
};

struct RunConfig {
  TaskConfig task;
  ModelConfig model;  // vocab_size derived from the task language
  SftConfig sft;
  RlRunConfig rl;
  EvalConfig eval;
  uint64_t seed = 1;
  std::string precision = "f32";  // f32 | f64

  void validate() const {
    task.validate();
    sft.validate();
    rl.to_rl_config();
    require(precision == "f32" || precision == "f64", Err::ConfigError,
            "precision must be f32 or f64");
    require(sft.batch_size <= task.pairs_per_group, Err::ConfigError,
            "sft.batch_size must not exceed task.pairs_per_group");
    require(rl.neg_targets + 1 <= task.pairs_per_group, Err::ConfigError,
            "rl.neg_targets needs enough in-group pairs");
    ModelConfig probe = model;
    probe.vocab_size = make_task_lang(task).vocab.size();
    probe.validate();
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(Err::ConfigError, "boolean expected for " + key + ", got '" + v + "'");
}

}  // namespace detail

inline void apply_config_kv(RunConfig& c, const std::string& key, const std::string& val) {
  auto i = [&] { return std::stoi(val); };
  auto d = [&] { return std::stod(val); };
  auto b = [&] { return detail::parse_bool(val, key); };
  if (key == "task.n_groups") c.task.n_groups = i();
  else if (key == "task.pairs_per_group") c.task.pairs_per_group = i();
  else if (key == "task.attr_slots") c.task.attr_slots = i();
  else if (key == "task.attr_values") c.task.attr_values = i();
  else if (key == "task.noise_rate") c.task.noise_rate = d();
  else if (key == "task.rewrite_filler") c.task.rewrite_filler = i();
  else if (key == "task.eval_queries") c.task.eval_queries = i();
  else if (key == "task.eval_corpus") c.task.eval_corpus = i();
  else if (key == "task.eval_fraction") c.task.eval_fraction = d();
  else if (key == "task.partial_keys") c.task.partial_keys = b();
  else if (key == "task.seed") c.task.seed = std::stoull(val);
  else if (key == "model.d_model") c.model.d_model = i();
  else if (key == "model.n_heads") c.model.n_heads = i();
  else if (key == "model.n_layers") c.model.n_layers = i();
  else if (key == "model.max_seq") c.model.max_seq = i();
  else if (key == "model.rollout_budget") c.model.rollout_budget = i();
  else if (key == "sft.lambda") c.sft.lambda = d();
  else if (key == "sft.tau") c.sft.tau = d();
  else if (key == "sft.batch_size") c.sft.batch_size = i();
  else if (key == "sft.accum_steps") c.sft.accum_steps = i();
  else if (key == "sft.lr") c.sft.lr = d();
  else if (key == "sft.epochs") c.sft.epochs = i();
  else if (key == "sft.include_intra") c.sft.include_intra = b();
  else if (key == "sft.symmetric") c.sft.symmetric = b();
  else if (key == "sft.gen_over_gold") c.sft.gen_over_gold = b();
  else if (key == "sft.optimizer") c.sft.optimizer = val;
  else if (key == "sft.checkpoint_every") c.sft.checkpoint_every = i();
  else if (key == "rl.group_size") c.rl.group_size = i();
  else if (key == "rl.clip_eps") c.rl.clip_eps = d();
  else if (key == "rl.kl_beta") c.rl.kl_beta = d();
  else if (key == "rl.advantage_eps") c.rl.advantage_eps = d();
  else if (key == "rl.lr") c.rl.lr = d();
  else if (key == "rl.steps") c.rl.steps = i();
  else if (key == "rl.queries_per_step") c.rl.queries_per_step = i();
  else if (key == "rl.sample_temp") c.rl.sample_temp = d();
  else if (key == "rl.pos_rollouts") c.rl.pos_rollouts = i();
  else if (key == "rl.neg_targets") c.rl.neg_targets = i();
  else if (key == "rl.neg_rollouts") c.rl.neg_rollouts = i();
  else if (key == "rl.single_negative_disc") c.rl.single_negative_disc = b();
  else if (key == "rl.optimizer") c.rl.optimizer = val;
  else if (key == "rl.checkpoint_every") c.rl.checkpoint_every = i();
  else if (key == "rl.interleave_joint") c.rl.interleave_joint = b();
  else if (key == "eval.modes") c.eval.modes = val;
  else if (key == "eval.rank_depth") c.eval.rank_depth = i();
  else if (key == "seed") c.seed = std::stoull(val);
  else if (key == "precision") c.precision = val;
  else fail(Err::ConfigError, "unknown config key: " + key);
}

inline std::string canonical_config_text(const RunConfig& c) {
  using detail::fmt_double;
  std::ostringstream os;
  auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << "\n"; };
  kv("task.n_groups", std::to_string(c.task.n_groups));
  kv("task.pairs_per_group", std::to_string(c.task.pairs_per_group));
  kv("task.attr_slots", std::to_string(c.task.attr_slots));
  kv("task.attr_values", std::to_string(c.task.attr_values));
  kv("task.noise_rate", fmt_double(c.task.noise_rate));
  kv("task.rewrite_filler", std::to_string(c.task.rewrite_filler));
  kv("task.eval_queries", std::to_string(c.task.eval_queries));
  kv("task.eval_corpus", std::to_string(c.task.eval_corpus));
  kv("task.eval_fraction", fmt_double(c.task.eval_fraction));
  kv("task.partial_keys", c.task.partial_keys ? "true" : "false");
  kv("task.seed", std::to_string(c.task.seed));
  kv("model.d_model", std::to_string(c.model.d_model));
  kv("model.n_heads", std::to_string(c.model.n_heads));
  kv("model.n_layers", std::to_string(c.model.n_layers));
  kv("model.max_seq", std::to_string(c.model.max_seq));
  kv("model.rollout_budget", std::to_string(c.model.rollout_budget));
  kv("sft.lambda", fmt_double(c.sft.lambda));
  kv("sft.tau", fmt_double(c.sft.tau));
  kv("sft.batch_size", std::to_string(c.sft.batch_size));
  kv("sft.accum_steps", std::to_string(c.sft.accum_steps));
  kv("sft.lr", fmt_double(c.sft.lr));
  kv("sft.epochs", std::to_string(c.sft.epochs));
  kv("sft.include_intra", c.sft.include_intra ? "true" : "false");
  kv("sft.symmetric", c.sft.symmetric ? "true" : "false");
  kv("sft.gen_over_gold", c.sft.gen_over_gold ? "true" : "false");
  kv("sft.optimizer", c.sft.optimizer);
  kv("sft.checkpoint_every", std::to_string(c.sft.checkpoint_every));
  kv("rl.group_size", std::to_string(c.rl.group_size));
  kv("rl.clip_eps", fmt_double(c.rl.clip_eps));
  kv("rl.kl_beta", fmt_double(c.rl.kl_beta));
  kv("rl.advantage_eps", fmt_double(c.rl.advantage_eps));
  kv("rl.lr", fmt_double(c.rl.lr));
  kv("rl.steps", std::to_string(c.rl.steps));
  kv("rl.queries_per_step", std::to_string(c.rl.queries_per_step));
  kv("rl.sample_temp", fmt_double(c.rl.sample_temp));
  kv("rl.pos_rollouts", std::to_string(c.rl.pos_rollouts));
  kv("rl.neg_targets", std::to_string(c.rl.neg_targets));
  kv("rl.neg_rollouts", std::to_string(c.rl.neg_rollouts));
  kv("rl.single_negative_disc", c.rl.single_negative_disc ? "true" : "false");
  kv("rl.optimizer", c.rl.optimizer);
  kv("rl.checkpoint_every", std::to_string(c.rl.checkpoint_every));
  kv("rl.interleave_joint", c.rl.interleave_joint ? "true" : "false");
  kv("eval.modes", c.eval.modes);
  kv("eval.rank_depth", std::to_string(c.eval.rank_depth));
  kv("seed", std::to_string(c.seed));
  kv("precision", c.precision);
  return os.str();
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    require(eq != std::string::npos, Err::ConfigError,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));
    require(!key.empty() && !val.empty(), Err::ConfigError,
            "config line " + std::to_string(lineno) + ": empty key or value");
    try {
      apply_config_kv(c, key, val);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(Err::ConfigError, "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), Err::ConfigError, "cannot open config: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

inline uint64_t config_hash(const RunConfig& c) {
  const std::string t = canonical_config_text(c);
  return detail::fnv1a64(t.data(), t.size());
}

// "disc-disc,gen-gen,..." -> (query mode, target mode) pairs.
inline std::vector<std::pair<EmbedMode, EmbedMode>> parse_modes(const std::string& spec) {
  auto one_mode = [](const std::string& s) {
    if (s == "disc") return EmbedMode::Disc;
    if (s == "gen") return EmbedMode::Gen;
    fail(Err::ConfigError, "unknown embedding mode: " + s);
  };
  std::vector<std::pair<EmbedMode, EmbedMode>> out;
  std::istringstream is(spec);
  std::string part;
  while (std::getline(is, part, ',')) {
    if (part.empty()) continue;
    const size_t dash = part.find('-');
    require(dash != std::string::npos, Err::ConfigError, "mode pathway needs query-target: " + part);
    out.push_back({one_mode(part.substr(0, dash)), one_mode(part.substr(dash + 1))});
  }
  require(!out.empty(), Err::ConfigError, "no pathways in mode spec: " + spec);
  return out;
}

}  // namespace rimeforge

#pragma once

// Group Relative Policy Optimization over rewrite rollouts: K rollouts per
// query from the old policy, group-normalized advantages, sequence-level
// clipped importance ratios, and a per-token exp(lr)-lr-1 KL estimate against
// a frozen reference. The returned loss is the negated objective, so
// minimizing it maximizes the clipped surrogate minus the KL penalty.
//
// One optimizer epoch per sampling round, with the old policy refreshed at
// every step; old log-probs are recomputed bit-identically by the tape, so
// ratios are exactly one at evaluation time and updates are plain policy
// gradients with an always-on KL regularizer.

#include <cmath>
#include <string>
#include <vector>

#include "rimeforge/model.hpp"
#include "rimeforge/optimizer.hpp"
#include "rimeforge/rewards.hpp"
#include "rimeforge/tape.hpp"

namespace rimeforge {

struct RlConfig {
  int group_size = 8;          // K
  double clip_eps = 0.2;       // epsilon
  double kl_beta = 0.04;       // beta
  double advantage_eps = 1e-8; // numerical floor for the reward std
  double lr = 5e-6;
  int steps = 200;
  int queries_per_step = 4;
  double sample_temp = 1.0;
  RewardParams reward;
  bool interleave_joint = false;  // optional joint-loss steps between RL steps

  void validate() const {
    require(group_size >= 2, Err::BadConfig, "group size K must be >= 2");
    require(clip_eps > 0 && clip_eps < 1, Err::BadConfig, "clip eps must lie in (0,1)");
    require(kl_beta >= 0, Err::BadConfig, "KL beta must be >= 0");
    require(advantage_eps >= 0, Err::BadConfig, "advantage eps must be >= 0");
    require(queries_per_step >= 1, Err::BadConfig, "queries_per_step >= 1");
  }
};

struct PolicyGroup {
  std::vector<int> query_input;
  std::vector<RewriteRollout> rollouts;          // K rollouts; logprobs are the old policy's
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<std::vector<double>> ref_logprobs; // per rollout, same lengths
};

template <typename T>
PolicyGroup sample_group(const Model<T>& params_old, const std::vector<int>& query_input, int k,
                         double sample_temp, Rng rng) {
  require(k >= 2, Err::BadConfig, "group size K must be >= 2");
  PolicyGroup g;
  g.query_input = query_input;
  for (int i = 0; i < k; ++i)
    g.rollouts.push_back(generate_rewrite(params_old, query_input, params_old.cfg.rollout_budget,
                                          sample_temp, rng.split(static_cast<uint64_t>(i))));
  return g;
}

// A_k = (R_k - mean) / (population std + eps).
inline std::vector<double> advantages(const std::vector<double>& rewards, double advantage_eps) {
  const double n = static_cast<double>(rewards.size());
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / (sd + advantage_eps));
  return out;
}

struct GrpoStats {
  double clip_fraction = 0;  // rollouts whose ratio left [1-eps, 1+eps]
  double mean_kl = 0;
  double mean_ratio = 0;
};

// Negated Eq.-style objective over a batch of groups. Old/ref log-probs are
// consumed as constants; gradients flow only through the current policy's
// teacher-forced log-probs.
template <typename T>
typename Tape<T>::Var grpo_loss(TapeModel<T>& tm, const std::vector<PolicyGroup>& groups,
                                const RlConfig& cfg, GrpoStats* stats = nullptr) {
  cfg.validate();
  Tape<T>& tape = tm.tape();
  using Var = typename Tape<T>::Var;
  require(!groups.empty(), Err::BadConfig, "grpo_loss: no groups");

  Var total{};
  double clip_hits = 0, kl_sum = 0, ratio_sum = 0;
  int64_t n_rollouts = 0;
  for (const PolicyGroup& g : groups) {
    require(g.advantages.size() == g.rollouts.size() && g.rewards.size() == g.rollouts.size(),
            Err::StaleGroup, "grpo_loss: group missing rewards or advantages");
    const bool need_ref = cfg.kl_beta != 0.0;
    require(!need_ref || g.ref_logprobs.size() == g.rollouts.size(), Err::StaleGroup,
            "grpo_loss: group missing reference log-probs");
    Var surr_sum{};
    Var kl_token_sum{};
    int64_t kl_tokens = 0;
    for (size_t k = 0; k < g.rollouts.size(); ++k) {
      const RewriteRollout& r = g.rollouts[k];
      require(r.logprobs.size() == r.tokens.size(), Err::StaleGroup,
              "grpo_loss: rollout missing old-policy log-probs");
      const double a_k = g.advantages[k];
      Var term{};
      if (r.tokens.empty()) {
        // zero-length rollout: ratio is an empty product, identically one
        term = tape.input(Tensor<T>::scalar(static_cast<T>(a_k)));
        ratio_sum += 1.0;
      } else {
        std::vector<int> seq = g.query_input;
        seq.insert(seq.end(), r.tokens.begin(), r.tokens.end());
        seq.pop_back();  // the final token is predicted, never consumed
        Var hidden = tm.hidden(seq);
        std::vector<int64_t> positions(r.tokens.size()), targets(r.tokens.size());
        for (size_t j = 0; j < r.tokens.size(); ++j) {
          positions[j] = static_cast<int64_t>(g.query_input.size()) - 1 + static_cast<int64_t>(j);
          targets[j] = r.tokens[j];
        }
        Var picked = tape.pick(tape.row_log_softmax(tm.logits_at(hidden, positions)), targets);
        // accumulate the old sum through the same T-precision values the tape
        // produces, so an unchanged policy yields a ratio of exactly one
        double old_sum = 0;
        for (double lp : r.logprobs) old_sum += static_cast<double>(static_cast<T>(lp));
        Var ratio = tape.exp_op(tape.affine(tape.sum_all(picked), 1.0, -old_sum));
        Var clipped = tape.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        term = tape.min2(tape.scale(ratio, a_k), tape.scale(clipped, a_k));
        const double ratio_v = tape.scalar(ratio);
        ratio_sum += ratio_v;
        if (ratio_v < 1.0 - cfg.clip_eps || ratio_v > 1.0 + cfg.clip_eps) clip_hits += 1.0;
        if (need_ref) {
          require(g.ref_logprobs[k].size() == r.tokens.size(), Err::StaleGroup,
                  "grpo_loss: reference log-prob length mismatch");
          Tensor<T> ref({static_cast<int64_t>(r.tokens.size())});
          for (size_t j = 0; j < r.tokens.size(); ++j)
            ref.data[j] = static_cast<T>(g.ref_logprobs[k][j]);
          Var lr = tape.sub(tape.input(std::move(ref)), picked);
          Var kl_vec = tape.sub(tape.exp_op(lr), tape.affine(lr, 1.0, 1.0));
          Var kl = tape.sum_all(kl_vec);
          kl_token_sum = kl_token_sum.valid() ? tape.add(kl_token_sum, kl) : kl;
          kl_tokens += static_cast<int64_t>(r.tokens.size());
        }
      }
      surr_sum = surr_sum.valid() ? tape.add(surr_sum, term) : term;
      ++n_rollouts;
    }
    // negated objective: -(mean_k surr - beta * token-mean KL)
    Var obj = tape.scale(surr_sum, -1.0 / static_cast<double>(g.rollouts.size()));
    if (kl_token_sum.valid() && kl_tokens > 0) {
      Var kl_mean = tape.scale(kl_token_sum, 1.0 / static_cast<double>(kl_tokens));
      kl_sum += tape.scalar(kl_mean);
      obj = tape.add(obj, tape.scale(kl_mean, cfg.kl_beta));
    }
    total = total.valid() ? tape.add(total, obj) : obj;
  }
  Var loss = tape.scale(total, 1.0 / static_cast<double>(groups.size()));
  if (stats) {
    stats->clip_fraction = n_rollouts ? clip_hits / static_cast<double>(n_rollouts) : 0.0;
    stats->mean_kl = kl_sum / static_cast<double>(groups.size());
    stats->mean_ratio = n_rollouts ? ratio_sum / static_cast<double>(n_rollouts) : 0.0;
  }
  return loss;
}

// One query's retrieval triple for RL: the query plus its positive and
// in-group negative targets.
struct RlQuery {
  std::vector<int> query_input;
  std::vector<int> pos_input;
  std::vector<std::vector<int>> neg_inputs;
};

struct StepReport {
  int64_t step = 0;
  double mean_reward = 0;
  double mean_format = 0;
  double mean_gap = 0;
  double mean_process = 0;
  double mean_advantage = 0;
  double clip_fraction = 0;
  double mean_kl = 0;
  double mean_rollout_len = 0;
  double loss = 0;
};

// One RL step: sample groups from the current policy snapshot, score them,
// take one gradient step on the grpo loss. All randomness comes from the
// caller-provided per-step rng, so a run is reproducible from (seed, step).
template <typename T>
StepReport rl_step(Model<T>& model, Optimizer<T>& opt, const Model<T>& ref_model,
                   const std::vector<RlQuery>& queries, const RlConfig& cfg, Rng rng,
                   int64_t step_index = 0) {
  cfg.validate();
  require(!queries.empty(), Err::BadConfig, "rl_step: no queries");
  const Model<T> old_policy = model;  // pi_old snapshot for this step

  std::vector<PolicyGroup> groups;
  StepReport rep;
  rep.step = step_index;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    const RlQuery& q = queries[qi];
    Rng qrng = rng.split(hash_str("query") + qi);
    RewardContext ctx = build_reward_context(old_policy, q.query_input, q.pos_input, q.neg_inputs,
                                             cfg.reward, qrng.split(hash_str("ctx")));
    PolicyGroup g = sample_group(old_policy, q.query_input, cfg.group_size, cfg.sample_temp,
                                 qrng.split(hash_str("group")));
    for (const RewriteRollout& r : g.rollouts) {
      RewardBreakdown br =
          total_reward(r, ctx, old_policy, q.query_input, cfg.reward.single_negative_disc);
      g.breakdowns.push_back(br);
      g.rewards.push_back(br.total);
      g.ref_logprobs.push_back(rollout_logprob(ref_model, q.query_input, r.tokens));
      rep.mean_reward += br.total;
      rep.mean_format += br.format;
      rep.mean_gap += br.gap;
      rep.mean_process += br.process;
      rep.mean_rollout_len += static_cast<double>(r.tokens.size());
    }
    g.advantages = advantages(g.rewards, cfg.advantage_eps);
    for (double a : g.advantages) rep.mean_advantage += a;
    groups.push_back(std::move(g));
  }
  const double n = static_cast<double>(queries.size() * static_cast<size_t>(cfg.group_size));
  rep.mean_reward /= n;
  rep.mean_format /= n;
  rep.mean_gap /= n;
  rep.mean_process /= n;
  rep.mean_advantage /= n;
  rep.mean_rollout_len /= n;

  Tape<T> tape;
  TapeModel<T> tm(tape, model);
  GrpoStats stats;
  auto loss = grpo_loss(tm, groups, cfg, &stats);
  rep.loss = tape.scalar(loss);
  require(std::isfinite(rep.loss), Err::NonFiniteLoss, "grpo loss is not finite");
  rep.clip_fraction = stats.clip_fraction;
  rep.mean_kl = stats.mean_kl;
  tape.backward(loss);
  opt.step(model.params, tape.param_grads(model.params));
  return rep;
}

}  // namespace rimeforge

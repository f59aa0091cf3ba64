#pragma once

// Reward stack for the RL stage: binary format reward over the rewrite
// template, similarity-gap reward between positive and negative targets in
// the generative space, and a binary process reward that pays out when the
// generative gap beats the discriminative gap for the same triple. Rewards
// are plain scalars; no gradients flow through them.

#include <string>
#include <vector>

#include "rimeforge/model.hpp"
#include "rimeforge/rng.hpp"
#include "rimeforge/vocab.hpp"

namespace rimeforge {

struct RewardBreakdown {
  double format = 0;   // {0,1}
  double gap = 0;      // [-2, 2]
  double process = 0;  // {0,1}
  double total = 0;    // format + gap + process, exactly
};

inline double format_reward(const std::vector<int>& rollout_tokens, const Vocab& v) {
  return matches_rewrite_template(rollout_tokens, v) ? 1.0 : 0.0;
}

inline double format_reward(const RewriteRollout& r, const Vocab& v) {
  return format_reward(r.tokens, v);
}

// Cached per-query state shared by all K rollouts of the query's group.
// Target rollouts are sampled fresh each RL step from the current policy.
struct RewardContext {
  Embedding q_disc, tpos_disc;
  std::vector<Embedding> tneg_disc;  // one per negative target
  std::vector<Embedding> tpos_gen;   // one per positive-target rollout
  std::vector<Embedding> tneg_gen;   // pooled over every negative target rollout
};

// Mean positive similarity minus mean negative similarity, both against the
// query's generative embedding for the rollout being scored.
inline double gap_reward(const RewardContext& ctx, const Embedding& q_gen) {
  require(!ctx.tpos_gen.empty() && !ctx.tneg_gen.empty(), Err::EmptyRolloutSet,
          "gap_reward: positive and negative target rollouts required");
  double pos = 0;
  for (const Embedding& e : ctx.tpos_gen) pos += q_gen.dot(e);
  pos /= static_cast<double>(ctx.tpos_gen.size());
  double neg = 0;
  for (const Embedding& e : ctx.tneg_gen) neg += q_gen.dot(e);
  neg /= static_cast<double>(ctx.tneg_gen.size());
  return pos - neg;
}

// Discriminative anchor gap. Defaults to the mean over the negative set so
// both gaps average the same negatives; single_negative compares against the
// first negative only.
inline double disc_gap(const RewardContext& ctx, bool single_negative = false) {
  require(!ctx.tneg_disc.empty(), Err::EmptyRolloutSet, "disc_gap: negative targets required");
  const double pos = ctx.q_disc.dot(ctx.tpos_disc);
  if (single_negative) return pos - ctx.q_disc.dot(ctx.tneg_disc.front());
  double neg = 0;
  for (const Embedding& e : ctx.tneg_disc) neg += ctx.q_disc.dot(e);
  return pos - neg / static_cast<double>(ctx.tneg_disc.size());
}

// 1 iff the generative gap strictly exceeds the discriminative gap.
inline double process_reward(const RewardContext& ctx, double gap_gen,
                             bool single_negative = false) {
  return gap_gen > disc_gap(ctx, single_negative) ? 1.0 : 0.0;
}

struct RewardParams {
  int pos_rollouts = 2;   // rollouts per positive target
  int neg_targets = 2;    // in-group negative targets
  int neg_rollouts = 2;   // rollouts per negative target
  double sample_temp = 1.0;
  bool single_negative_disc = false;
};

// Builds the per-query cache: disc anchors plus fresh gen embeddings for the
// positive and negative target rollouts, all under `policy`.
template <typename T>
RewardContext build_reward_context(const Model<T>& policy, const std::vector<int>& query_input,
                                   const std::vector<int>& pos_input,
                                   const std::vector<std::vector<int>>& neg_inputs,
                                   const RewardParams& rp, Rng rng) {
  require(!neg_inputs.empty(), Err::EmptyRolloutSet, "reward context needs >= 1 negative target");
  RewardContext ctx;
  ctx.q_disc = encode_disc(policy, query_input);
  ctx.tpos_disc = encode_disc(policy, pos_input);
  for (const auto& neg : neg_inputs) ctx.tneg_disc.push_back(encode_disc(policy, neg));
  for (int i = 0; i < rp.pos_rollouts; ++i) {
    RewriteRollout r = generate_rewrite(policy, pos_input, policy.cfg.rollout_budget,
                                        rp.sample_temp, rng.split(hash_str("pos") + i));
    ctx.tpos_gen.push_back(encode_gen(policy, pos_input, r.tokens));
  }
  for (size_t j = 0; j < neg_inputs.size(); ++j)
    for (int i = 0; i < rp.neg_rollouts; ++i) {
      RewriteRollout r =
          generate_rewrite(policy, neg_inputs[j], policy.cfg.rollout_budget, rp.sample_temp,
                           rng.split(hash_str("neg") + j * 1024 + i));
      ctx.tneg_gen.push_back(encode_gen(policy, neg_inputs[j], r.tokens));
    }
  return ctx;
}

// All three components for one rollout; the query's generative embedding is
// conditioned on exactly this rollout.
template <typename T>
RewardBreakdown total_reward(const RewriteRollout& rollout, const RewardContext& ctx,
                             const Model<T>& policy, const std::vector<int>& query_input,
                             bool single_negative_disc = false) {
  RewardBreakdown r;
  r.format = format_reward(rollout, policy.vocab);
  const Embedding q_gen = encode_gen(policy, query_input, rollout.tokens);
  r.gap = gap_reward(ctx, q_gen);
  r.process = process_reward(ctx, r.gap, single_negative_disc);
  r.total = r.format + r.gap + r.process;
  return r;
}

}  // namespace rimeforge

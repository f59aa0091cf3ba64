#pragma once

// Training drivers for the two stages. Both are deterministic functions of
// (dataset, config, seed): every random draw comes from a stream keyed by
// purpose and step index, so runs are reproducible and an RL run can resume
// from any step without replaying earlier ones.

#include <functional>
#include <string>
#include <vector>

#include "rimeforge/config.hpp"
#include "rimeforge/grpo.hpp"
#include "rimeforge/model.hpp"
#include "rimeforge/objectives.hpp"
#include "rimeforge/optimizer.hpp"
#include "rimeforge/synthtask.hpp"

namespace rimeforge {

struct SftLogRow {
  int64_t step = 0;
  int epoch = 0;
  double disc = 0, gen = 0, intra = 0, cm_total = 0, rewrite = 0, joint = 0;
};

inline OptimizerConfig make_optimizer_config(const std::string& name, double lr) {
  OptimizerConfig oc;
  oc.kind = optimizer_kind_from(name);
  oc.lr = lr;
  return oc;
}

// Joint SFT over homogeneous batches with gradient accumulation. The
// callback fires once per micro-batch with the loss report, and once per
// epoch end with the current model for checkpointing.
template <typename T>
Model<T> run_sft(
    const Dataset& ds, const RunConfig& cfg,
    const std::function<void(const SftLogRow&)>& on_step = {},
    const std::function<void(int epoch, const Model<T>&)>& on_epoch = {}) {
  ModelConfig mc = cfg.model;
  mc.vocab_size = ds.lang.vocab.size();
  Model<T> model = init_model<T>(mc, ds.lang.vocab, cfg.seed);
  Optimizer<T> opt(make_optimizer_config(cfg.sft.optimizer, cfg.sft.lr));
  LossOptions opts;
  opts.include_intra = cfg.sft.include_intra;
  opts.symmetric = cfg.sft.symmetric;
  opts.gen_over_gold = cfg.sft.gen_over_gold;

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.sft.epochs; ++epoch) {
    auto batches =
        make_batches(ds, cfg.sft.batch_size, Rng(cfg.seed, hash_str("sft_epoch") + epoch));
    size_t bi = 0;
    while (bi < batches.size()) {
      const size_t take = std::min<size_t>(static_cast<size_t>(cfg.sft.accum_steps),
                                           batches.size() - bi);
      GradMap<T> accum;
      for (size_t a = 0; a < take; ++a, ++bi) {
        ContrastBatch batch = batches[bi];
        batch.tau = cfg.sft.tau;
        batch.lambda = cfg.sft.lambda;
        Tape<T> tape;
        TapeModel<T> tm(tape, model);
        BatchLossBuilder<T> builder(tm, batch, opts);
        LossReport<T> r = builder.joint(cfg.sft.lambda);
        require(std::isfinite(r.joint_v), Err::NonFiniteLoss,
                "sft: non-finite joint loss at step " + std::to_string(step));
        tape.backward(r.joint);
        GradMap<T> g = tape.param_grads(model.params);
        if (accum.empty()) {
          accum = std::move(g);
        } else {
          for (size_t p = 0; p < accum.size(); ++p)
            for (int64_t i = 0; i < accum[p].numel(); ++i) accum[p].data[i] += g[p].data[i];
        }
        if (on_step)
          on_step({step, epoch, r.disc_v, r.gen_v, r.intra_v, r.cm_total_v, r.rewrite_v,
                   r.joint_v});
        ++step;
      }
      const double inv = 1.0 / static_cast<double>(take);
      for (auto& g : accum)
        for (T& v : g.data) v = static_cast<T>(static_cast<double>(v) * inv);
      opt.step(model.params, accum);
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  return model;
}

// Deterministic query schedule for one RL step: queries_per_step training
// pairs plus in-group negatives, drawn from (seed, step).
inline std::vector<size_t> rl_query_indices(const Dataset& ds, const RunConfig& cfg,
                                            int64_t step) {
  Rng rng(cfg.seed, hash_str("rl_queries") + static_cast<uint64_t>(step));
  std::vector<size_t> out;
  const size_t n = ds.train_queries.size();
  for (int i = 0; i < cfg.rl.queries_per_step; ++i)
    out.push_back(static_cast<size_t>(rng.next_below(n)));
  return out;
}

inline std::vector<RlQuery> rl_queries_for_step(const Dataset& ds, const RunConfig& cfg,
                                                int64_t step) {
  std::vector<RlQuery> queries;
  Rng rng(cfg.seed, hash_str("rl_negatives") + static_cast<uint64_t>(step));
  for (size_t idx : rl_query_indices(ds, cfg, step)) {
    const int group = ds.train_queries[idx].group;
    const size_t group_base = static_cast<size_t>(group) * static_cast<size_t>(cfg.task.pairs_per_group);
    RlQuery q;
    q.query_input = model_input(ds.train_queries[idx]);
    q.pos_input = model_input(ds.train_targets[idx]);
    // in-group negatives, distinct from the positive
    std::vector<size_t> candidates;
    for (int p = 0; p < cfg.task.pairs_per_group; ++p) {
      const size_t cand = group_base + static_cast<size_t>(p);
      if (cand != idx) candidates.push_back(cand);
    }
    for (int nn = 0; nn < cfg.rl.neg_targets && !candidates.empty(); ++nn) {
      const size_t pick = static_cast<size_t>(rng.next_below(candidates.size()));
      q.neg_inputs.push_back(model_input(ds.train_targets[candidates[pick]]));
      candidates.erase(candidates.begin() + static_cast<long>(pick));
    }
    require(!q.neg_inputs.empty(), Err::DataError, "rl: no in-group negatives available");
    queries.push_back(std::move(q));
  }
  return queries;
}

// Refine-RL from an SFT checkpoint. `init` seeds the policy (the SFT model,
// or a mid-run RL checkpoint when resuming from start_step > 0); `ref` is
// the frozen reference for the KL term. Steps are numbered absolutely, so a
// resumed run continues the original stream.
template <typename T>
Model<T> run_rl(
    const Dataset& ds, const Model<T>& init, const Model<T>& ref, const RunConfig& cfg,
    int64_t start_step = 0,
    const std::function<void(const StepReport&)>& on_step = {},
    const std::function<void(int64_t step, const Model<T>&)>& on_checkpoint = {}) {
  Model<T> model = init;
  Optimizer<T> opt(make_optimizer_config(cfg.rl.optimizer, cfg.rl.lr));
  const RlConfig rlc = cfg.rl.to_rl_config();
  LossOptions joint_opts;
  joint_opts.include_intra = cfg.sft.include_intra;
  for (int64_t s = start_step; s < cfg.rl.steps; ++s) {
    auto queries = rl_queries_for_step(ds, cfg, s);
    StepReport rep = rl_step(model, opt, ref, queries, rlc,
                             Rng(cfg.seed, hash_str("rl_step") + static_cast<uint64_t>(s)), s);
    if (cfg.rl.interleave_joint) {
      // optional joint-loss step between RL updates (off by default)
      auto batches = make_batches(ds, cfg.sft.batch_size,
                                  Rng(cfg.seed, hash_str("rl_joint") + static_cast<uint64_t>(s)));
      ContrastBatch batch = batches.front();
      batch.tau = cfg.sft.tau;
      Tape<T> tape;
      TapeModel<T> tm(tape, model);
      BatchLossBuilder<T> builder(tm, batch, joint_opts);
      LossReport<T> r = builder.joint(cfg.sft.lambda);
      tape.backward(r.joint);
      opt.step(model.params, tape.param_grads(model.params));
    }
    if (on_step) on_step(rep);
    if (cfg.rl.checkpoint_every > 0 && (s + 1) % cfg.rl.checkpoint_every == 0 && on_checkpoint)
      on_checkpoint(s + 1, model);
  }
  return model;
}

}  // namespace rimeforge

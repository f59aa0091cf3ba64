#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rimeforge/gradcheck.hpp"
#include "rimeforge/grpo.hpp"
#include "rimeforge/synthtask.hpp"

using namespace rimeforge;

namespace {

TaskConfig task_cfg() {
  TaskConfig t;
  t.n_groups = 2;
  t.pairs_per_group = 8;
  t.attr_slots = 2;
  t.attr_values = 4;
  t.eval_queries = 4;
  t.eval_corpus = 8;
  t.seed = 9;
  return t;
}

ModelConfig model_cfg() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.max_seq = 48;
  c.rollout_budget = 10;
  return c;
}

struct Fx {
  Dataset ds = gen_corpus(task_cfg());
  Model<double> model = init_model<double>(model_cfg(), ds.lang.vocab, 13);
  std::vector<int> query() const { return model_input(ds.train_queries[0]); }
  RlQuery rl_query(size_t i = 0) const {
    return {model_input(ds.train_queries[i]), model_input(ds.train_targets[i]),
            {model_input(ds.train_targets[i + 1]), model_input(ds.train_targets[i + 2])}};
  }
};

}  // namespace

TEST_CASE("advantages: closed forms and invariances", "[grpo]") {
  REQUIRE(RlConfig{}.group_size == 8);
  REQUIRE(RlConfig{}.clip_eps == 0.2);
  REQUIRE(RlConfig{}.kl_beta == 0.04);

  auto a = advantages({0.0, 2.0}, 0.0);
  REQUIRE(a[0] == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(a[1] == Catch::Approx(1.0).margin(1e-12));

  auto z = advantages({1.5, 1.5, 1.5}, 1e-8);
  for (double v : z) REQUIRE(v == Catch::Approx(0.0).margin(1e-12));

  Rng rng(8, 0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int k = 2 + static_cast<int>(rng.next_below(7));
    std::vector<double> rewards(static_cast<size_t>(k));
    for (double& r : rewards) r = rng.uniform(-3, 3);
    auto adv = advantages(rewards, 1e-8);
    double mean = 0, sd = 0;
    for (double v : adv) mean += v;
    mean /= k;
    for (double r : rewards) sd += 1;  // touch to silence unused warnings
    REQUIRE(std::abs(mean) < 1e-9);

    // shift invariance
    std::vector<double> shifted = rewards;
    for (double& r : shifted) r += 17.25;
    auto adv2 = advantages(shifted, 1e-8);
    for (size_t i = 0; i < adv.size(); ++i) REQUIRE(std::abs(adv[i] - adv2[i]) < 1e-12);

    // positive scale invariance at eps = 0 (skip near-constant groups)
    double var = 0, mu = 0;
    for (double r : rewards) mu += r;
    mu /= k;
    for (double r : rewards) var += (r - mu) * (r - mu);
    if (var > 1e-6) {
      std::vector<double> scaled = rewards;
      for (double& r : scaled) r *= 3.5;
      auto a0 = advantages(rewards, 0.0), a1 = advantages(scaled, 0.0);
      for (size_t i = 0; i < a0.size(); ++i) REQUIRE(std::abs(a0[i] - a1[i]) < 1e-9);
    }
  }
}

TEST_CASE("sample_group: determinism and K precondition", "[grpo]") {
  Fx fx;
  PolicyGroup a = sample_group(fx.model, fx.query(), 4, 1.0, Rng(3, 3));
  PolicyGroup b = sample_group(fx.model, fx.query(), 4, 1.0, Rng(3, 3));
  REQUIRE(a.rollouts.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    REQUIRE(a.rollouts[i].tokens == b.rollouts[i].tokens);
    REQUIRE(a.rollouts[i].logprobs == b.rollouts[i].logprobs);
  }
  REQUIRE_THROWS_AS(sample_group(fx.model, fx.query(), 1, 1.0, Rng(3, 3)), Error);
}

TEST_CASE("grpo_loss: unit ratios give minus mean advantage", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 4;
  cfg.kl_beta = 0.0;
  PolicyGroup g = sample_group(fx.model, fx.query(), 4, 1.0, Rng(21, 0));
  g.rewards = {1.0, 3.0, -0.5, 0.25};
  g.advantages = advantages(g.rewards, 1e-8);

  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  GrpoStats stats;
  auto loss = grpo_loss(tm, {g}, cfg, &stats);
  double mean_adv = 0;
  for (double a : g.advantages) mean_adv += a;
  mean_adv /= 4.0;
  REQUIRE(tape.scalar(loss) == Catch::Approx(-mean_adv).margin(1e-12));
  REQUIRE(stats.mean_ratio == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(stats.clip_fraction == 0.0);
}

TEST_CASE("grpo_loss: zero KL when the policy equals the reference", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 2;
  cfg.kl_beta = 0.5;
  PolicyGroup g = sample_group(fx.model, fx.query(), 2, 1.0, Rng(5, 0));
  g.rewards = {0.5, 1.5};
  g.advantages = advantages(g.rewards, 1e-8);
  for (const auto& r : g.rollouts)
    g.ref_logprobs.push_back(rollout_logprob(fx.model, fx.query(), r.tokens));

  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  GrpoStats stats;
  grpo_loss(tm, {g}, cfg, &stats);
  REQUIRE(std::abs(stats.mean_kl) < 1e-10);
}

TEST_CASE("grpo_loss: clip arithmetic at ratio 10", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 2;
  cfg.kl_beta = 0.0;
  cfg.clip_eps = 0.2;
  PolicyGroup g = sample_group(fx.model, fx.query(), 2, 1.0, Rng(6, 0));
  REQUIRE(!g.rollouts[0].tokens.empty());
  // shift the stored old log-probs so the sequence ratio is exactly 10
  const double shift = std::log(10.0) / static_cast<double>(g.rollouts[0].tokens.size());
  for (double& lp : g.rollouts[0].logprobs) lp -= shift;
  g.rewards = {2.0, 0.0};
  g.advantages = {2.0, 0.0};  // hand-set: positive advantage on the shifted rollout

  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  GrpoStats stats;
  auto loss = grpo_loss(tm, {g}, cfg, &stats);
  // term_0 = (1 + eps) * A_0 = 2.4, term_1 = 0; loss = -(2.4 + 0)/2
  REQUIRE(tape.scalar(loss) == Catch::Approx(-1.2).margin(1e-6));
  REQUIRE(stats.clip_fraction == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("grpo_loss: clipped surrogate bounded on-policy", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 4;
  cfg.kl_beta = 0.0;
  PolicyGroup g = sample_group(fx.model, fx.query(), 4, 1.0, Rng(31, 0));
  g.rewards = {0.0, 1.0, 2.0, -1.0};
  g.advantages = advantages(g.rewards, 1e-8);
  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  auto loss = grpo_loss(tm, {g}, cfg, nullptr);
  // with unit ratios each |term| = |A_k| <= (1+eps)|A_k|
  double bound = 0;
  for (double a : g.advantages) bound += (1 + cfg.clip_eps) * std::abs(a);
  REQUIRE(std::abs(tape.scalar(loss)) <= bound / 4.0 + 1e-12);
}

TEST_CASE("grpo_loss: zero gradient when advantages vanish and beta is zero", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 3;
  cfg.kl_beta = 0.0;
  PolicyGroup g = sample_group(fx.model, fx.query(), 3, 1.0, Rng(7, 0));
  g.rewards = {1.0, 1.0, 1.0};
  g.advantages = advantages(g.rewards, 1e-8);
  for (double a : g.advantages) REQUIRE(a == 0.0);

  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  auto loss = grpo_loss(tm, {g}, cfg, nullptr);
  tape.backward(loss);
  auto grads = tape.param_grads(fx.model.params);
  for (const auto& t : grads)
    for (double v : t.data) REQUIRE(v == 0.0);
}

TEST_CASE("grpo_loss: stale groups rejected", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 2;
  PolicyGroup g = sample_group(fx.model, fx.query(), 2, 1.0, Rng(8, 0));
  Tape<double> tape;
  TapeModel<double> tm(tape, fx.model);
  REQUIRE_THROWS_AS(grpo_loss(tm, {g}, cfg, nullptr), Error);  // no rewards/advantages

  g.rewards = {1.0, 2.0};
  g.advantages = advantages(g.rewards, 1e-8);
  // beta > 0 but no reference log-probs
  Tape<double> tape2;
  TapeModel<double> tm2(tape2, fx.model);
  REQUIRE_THROWS_AS(grpo_loss(tm2, {g}, cfg, nullptr), Error);

  // missing old log-probs on a rollout
  for (const auto& r : g.rollouts)
    g.ref_logprobs.push_back(rollout_logprob(fx.model, fx.query(), r.tokens));
  g.rollouts[0].logprobs.clear();
  Tape<double> tape3;
  TapeModel<double> tm3(tape3, fx.model);
  REQUIRE_THROWS_AS(grpo_loss(tm3, {g}, cfg, nullptr), Error);
}

TEST_CASE("grpo_loss: gradient matches finite differences off-policy", "[grpo][fd]") {
  TaskConfig tc = task_cfg();
  ModelConfig mc;
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.n_layers = 1;
  mc.max_seq = 40;
  mc.rollout_budget = 8;
  Dataset ds = gen_corpus(tc);
  Model<double> model = init_model<double>(mc, ds.lang.vocab, 99);

  RlConfig cfg;
  cfg.group_size = 2;
  cfg.kl_beta = 0.04;
  std::vector<PolicyGroup> groups;
  Rng rng(17, 0);
  for (int qi = 0; qi < 2; ++qi) {
    PolicyGroup g =
        sample_group(model, model_input(ds.train_queries[static_cast<size_t>(qi)]), 2, 1.0,
                     rng.split(qi));
    // fake old/ref log-probs so ratios sit well away from 1 and the clip kinks
    const double targets[2] = {0.45, -0.5};  // e^0.45 = 1.57, e^-0.5 = 0.61
    for (size_t k = 0; k < g.rollouts.size(); ++k) {
      auto& r = g.rollouts[k];
      if (r.tokens.empty()) continue;
      const double shift = targets[k] / static_cast<double>(r.tokens.size());
      for (double& lp : r.logprobs) lp -= shift;
      std::vector<double> ref = rollout_logprob(model, g.query_input, r.tokens);
      for (double& lp : ref) lp += 0.1 / static_cast<double>(ref.size());
      g.ref_logprobs.push_back(ref);
    }
    g.rewards = {1.0 + qi, -0.5};
    g.advantages = advantages(g.rewards, 1e-8);
    groups.push_back(std::move(g));
  }

  auto eval = [&](const ParamStore<double>& p) {
    Model<double> m{model.cfg, model.vocab, p};
    Tape<double> tape;
    TapeModel<double> tm(tape, m);
    return tape.scalar(grpo_loss(tm, groups, cfg, nullptr));
  };
  auto grad = [&](const ParamStore<double>& p) {
    Model<double> m{model.cfg, model.vocab, p};
    Tape<double> tape;
    TapeModel<double> tm(tape, m);
    auto loss = grpo_loss(tm, groups, cfg, nullptr);
    tape.backward(loss);
    return tape.param_grads(p);
  };
  auto res = grad_check(eval, grad, model.params, 1e-5, 30, 1234);
  INFO("worst: " << res.worst_param << "[" << res.worst_index << "]");
  REQUIRE(res.max_rel_error < 1e-5);
}

TEST_CASE("rl_step: identical rollouts with reference-equal policy leave params fixed",
          "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 2;
  cfg.sample_temp = 0.0;  // greedy: all K rollouts identical -> all advantages zero
  cfg.lr = 0.1;
  Model<double> model = fx.model;
  Optimizer<double> opt({OptimizerKind::Sgd, cfg.lr});
  Model<double> ref = fx.model;
  StepReport rep = rl_step(model, opt, ref, {fx.rl_query()}, cfg, Rng(91, 0), 0);
  REQUIRE(rep.mean_advantage == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(rep.mean_kl == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(rep.clip_fraction == 0.0);
  for (size_t p = 0; p < model.params.size(); ++p)
    REQUIRE(model.params.values[p].data == fx.model.params.values[p].data);
}

TEST_CASE("rl_step: deterministic under a fixed rng", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 3;
  cfg.lr = 1e-3;
  auto run = [&] {
    Model<double> model = fx.model;
    Optimizer<double> opt({OptimizerKind::Sgd, cfg.lr});
    Model<double> ref = fx.model;
    for (int s = 0; s < 2; ++s)
      rl_step(model, opt, ref, {fx.rl_query(0), fx.rl_query(3)}, cfg, Rng(123, 1000 + s), s);
    return model.params;
  };
  auto a = run(), b = run();
  for (size_t p = 0; p < a.size(); ++p) REQUIRE(a.values[p].data == b.values[p].data);
}

TEST_CASE("rl_step: report fields are populated and bounded", "[grpo]") {
  Fx fx;
  RlConfig cfg;
  cfg.group_size = 4;
  cfg.lr = 1e-4;
  Model<double> model = fx.model;
  Optimizer<double> opt({OptimizerKind::Sgd, cfg.lr});
  StepReport rep = rl_step(model, opt, fx.model, {fx.rl_query()}, cfg, Rng(5, 5), 7);
  REQUIRE(rep.step == 7);
  REQUIRE(rep.clip_fraction >= 0.0);
  REQUIRE(rep.clip_fraction <= 1.0);
  REQUIRE(rep.mean_rollout_len >= 0.0);
  REQUIRE(rep.mean_rollout_len <= model.cfg.rollout_budget);
  REQUIRE(std::isfinite(rep.loss));
  REQUIRE(rep.mean_format >= 0.0);
  REQUIRE(rep.mean_format <= 1.0);
  REQUIRE(rep.mean_process >= 0.0);
  REQUIRE(rep.mean_process <= 1.0);
  REQUIRE(rep.mean_gap >= -2.0);
  REQUIRE(rep.mean_gap <= 2.0);
}

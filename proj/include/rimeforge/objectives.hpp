#pragma once

// SFT-stage losses: discriminative/generative InfoNCE, intra-mode cross
// losses, their node-level sum, the rewrite language-modeling loss and the
// joint objective. Everything is built on one tape so component nodes are
// shared and the reported sums are node identities, not re-computations.
//
// Gradients reach generation only through the language-modeling term; the
// contrastive terms differentiate through the embedding read, never through
// discrete sampling.

#include <string>
#include <vector>

#include "rimeforge/model.hpp"
#include "rimeforge/tape.hpp"

namespace rimeforge {

struct ContrastItem {
  std::vector<int> q_input, t_input;
  std::vector<int> q_gold, t_gold;
  std::string q_id, t_id;
  // On-policy rollouts, used instead of gold text when gen_over_gold is off.
  std::vector<int> q_rollout, t_rollout;
  bool has_rollouts = false;
};

struct ContrastBatch {
  std::vector<ContrastItem> items;
  int group_id = -1;
  double tau = 0.02;
  double lambda = 1.0;

  int64_t size() const { return static_cast<int64_t>(items.size()); }
};

struct LossOptions {
  bool include_intra = true;
  bool symmetric = false;     // also add the transposed (target->query) direction
  bool gen_over_gold = true;  // gen embeddings condition on gold text vs sampled rollouts
};

// InfoNCE over stacked unit-row matrices: -(1/N) sum_i log softmax_j(Q_i.T_j/tau)[i].
template <typename T>
typename Tape<T>::Var info_nce(Tape<T>& tape, typename Tape<T>::Var q, typename Tape<T>::Var t,
                               double tau, bool symmetric = false) {
  require(tau > 0, Err::NonPositiveTemperature, "info_nce: tau must be > 0");
  const auto& Q = tape.val(q);
  const auto& Tm = tape.val(t);
  require(Q.rank() == 2 && Tm.rank() == 2 && Q.shape == Tm.shape, Err::DimensionMismatch,
          "info_nce: Q and T must be [N,d] with equal shapes");
  const int64_t n = Q.shape[0];
  std::vector<int64_t> diag(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) diag[static_cast<size_t>(i)] = i;
  auto one_direction = [&](typename Tape<T>::Var a, typename Tape<T>::Var b) {
    auto scores = tape.scale(tape.matmul_nt(a, b), 1.0 / tau);
    auto picked = tape.pick(tape.row_log_softmax(scores), diag);
    return tape.scale(tape.sum_all(picked), -1.0 / static_cast<double>(n));
  };
  auto loss = one_direction(q, t);
  if (symmetric) loss = tape.add(loss, one_direction(t, q));
  return loss;
}

template <typename T>
struct LossReport {
  using Var = typename Tape<T>::Var;
  Var disc{}, gen{}, intra{}, cm_total{}, rewrite{}, joint{};
  double disc_v = 0, gen_v = 0, intra_v = 0, cm_total_v = 0, rewrite_v = 0, joint_v = 0;
};

// Builds every loss of a batch once, sharing embeddings and forwards between
// terms. The gen-context forward serves the gen embedding and the rewrite LM
// loss from the same hidden states.
template <typename T>
class BatchLossBuilder {
 public:
  using Var = typename Tape<T>::Var;

  BatchLossBuilder(TapeModel<T>& tm, const ContrastBatch& batch, LossOptions opts = {})
      : tm_(tm), tape_(tm.tape()), batch_(batch), opts_(opts) {
    require(batch.size() >= 1, Err::DimensionMismatch, "empty batch");
  }

  Var disc_loss() {
    if (!disc_.valid()) {
      ensure_disc();
      disc_ = info_nce(tape_, disc_q_, disc_t_, batch_.tau, opts_.symmetric);
    }
    return disc_;
  }

  Var gen_loss() {
    if (!gen_.valid()) {
      ensure_gen();
      gen_ = info_nce(tape_, gen_q_, gen_t_, batch_.tau, opts_.symmetric);
    }
    return gen_;
  }

  // Two cross-mode InfoNCE terms: disc queries vs gen targets and gen queries
  // vs disc targets.
  Var intra_loss() {
    if (!intra_.valid()) {
      ensure_disc();
      ensure_gen();
      intra_ = tape_.add(info_nce(tape_, disc_q_, gen_t_, batch_.tau, opts_.symmetric),
                         info_nce(tape_, gen_q_, disc_t_, batch_.tau, opts_.symmetric));
    }
    return intra_;
  }

  // Node-level sum of the alignment losses.
  Var cm_loss() {
    if (!cm_.valid()) {
      Var s = tape_.add(disc_loss(), gen_loss());
      cm_ = opts_.include_intra ? tape_.add(s, intra_loss()) : s;
    }
    return cm_;
  }

  // Mean per-token NLL of the gold rewrite tokens, query and target sides,
  // PAD targets masked out.
  Var rewrite_loss() {
    if (!rewrite_.valid()) {
      ensure_gen();
      Var total{};
      int64_t count = 0;
      for (size_t i = 0; i < lm_terms_.size(); ++i) {
        total = total.valid() ? tape_.add(total, lm_terms_[i]) : lm_terms_[i];
        count += lm_counts_[i];
      }
      require(count > 0, Err::EmptyGold, "rewrite_lm_loss: no gold tokens to score");
      rewrite_ = tape_.scale(total, -1.0 / static_cast<double>(count));
    }
    return rewrite_;
  }

  LossReport<T> joint(double lambda) {
    require(lambda >= 0, Err::BadConfig, "lambda must be >= 0");
    LossReport<T> r;
    r.disc = disc_loss();
    r.gen = gen_loss();
    if (opts_.include_intra) r.intra = intra_loss();
    r.cm_total = cm_loss();
    r.rewrite = rewrite_loss();
    r.joint = tape_.add(tape_.scale(r.rewrite, lambda), r.cm_total);
    r.disc_v = tape_.scalar(r.disc);
    r.gen_v = tape_.scalar(r.gen);
    r.intra_v = opts_.include_intra ? tape_.scalar(r.intra) : 0.0;
    r.cm_total_v = tape_.scalar(r.cm_total);
    r.rewrite_v = tape_.scalar(r.rewrite);
    r.joint_v = tape_.scalar(r.joint);
    return r;
  }

 private:
  void ensure_disc() {
    if (disc_q_.valid()) return;
    std::vector<Var> qs, ts;
    for (const ContrastItem& it : batch_.items) {
      qs.push_back(disc_embedding(it.q_input));
      ts.push_back(disc_embedding(it.t_input));
    }
    disc_q_ = tape_.stack_rows(qs);
    disc_t_ = tape_.stack_rows(ts);
  }

  Var disc_embedding(const std::vector<int>& input) {
    std::vector<int> seq = input;
    if (seq.empty() || seq.back() != Vocab::kDiscEmb) seq.push_back(Vocab::kDiscEmb);
    Var h = tm_.hidden(seq);
    return tm_.embedding_at(h, static_cast<int64_t>(seq.size()) - 1);
  }

  void ensure_gen() {
    if (gen_q_.valid()) return;
    std::vector<Var> qs, ts;
    for (const ContrastItem& it : batch_.items) {
      qs.push_back(gen_side(it.q_input, it.q_gold, it.q_rollout, it.has_rollouts));
      ts.push_back(gen_side(it.t_input, it.t_gold, it.t_rollout, it.has_rollouts));
    }
    gen_q_ = tape_.stack_rows(qs);
    gen_t_ = tape_.stack_rows(ts);
  }

  // One forward over [input, text, <gen_emb>] yields both the gen embedding
  // (last position) and the LM logits for the gold tokens (gold supervision
  // is always over the gold text, regardless of what conditions the
  // embedding).
  Var gen_side(const std::vector<int>& input, const std::vector<int>& gold,
               const std::vector<int>& rollout, bool has_rollouts) {
    const std::vector<int>* text = &gold;
    if (!opts_.gen_over_gold) {
      require(has_rollouts, Err::MissingRollout, "gen embeddings over rollouts requested");
      text = &rollout;
    }
    std::vector<int> seq = input;
    seq.insert(seq.end(), text->begin(), text->end());
    seq.push_back(Vocab::kGenEmb);
    Var h = tm_.hidden(seq);

    if (opts_.gen_over_gold) {
      collect_lm(h, static_cast<int64_t>(input.size()), gold);
    } else {
      // Separate teacher-forced pass over the gold text for the LM term.
      std::vector<int> gseq = input;
      gseq.insert(gseq.end(), gold.begin(), gold.end());
      collect_lm(tm_.hidden(gseq), static_cast<int64_t>(input.size()), gold);
    }
    return tm_.embedding_at(h, static_cast<int64_t>(seq.size()) - 1);
  }

  void collect_lm(Var hidden, int64_t input_len, const std::vector<int>& gold) {
    std::vector<int64_t> positions, targets;
    for (size_t j = 0; j < gold.size(); ++j) {
      if (gold[j] == Vocab::kPad) continue;  // masked
      positions.push_back(input_len - 1 + static_cast<int64_t>(j));
      targets.push_back(gold[j]);
    }
    if (positions.empty()) return;
    Var lsm = tape_.row_log_softmax(tm_.logits_at(hidden, positions));
    lm_terms_.push_back(tape_.sum_all(tape_.pick(lsm, targets)));
    lm_counts_.push_back(static_cast<int64_t>(positions.size()));
  }

  TapeModel<T>& tm_;
  Tape<T>& tape_;
  const ContrastBatch& batch_;
  LossOptions opts_;
  Var disc_q_{}, disc_t_{}, gen_q_{}, gen_t_{};
  Var disc_{}, gen_{}, intra_{}, cm_{}, rewrite_{};
  std::vector<Var> lm_terms_;
  std::vector<int64_t> lm_counts_;
};

// Single-loss entry points (each builds what it needs and no more).

template <typename T>
typename Tape<T>::Var gen_info_nce(TapeModel<T>& tm, const ContrastBatch& b, LossOptions o = {}) {
  BatchLossBuilder<T> builder(tm, b, o);
  return builder.gen_loss();
}

template <typename T>
typename Tape<T>::Var intra_mode_loss(TapeModel<T>& tm, const ContrastBatch& b,
                                      LossOptions o = {}) {
  BatchLossBuilder<T> builder(tm, b, o);
  return builder.intra_loss();
}

template <typename T>
typename Tape<T>::Var cm_info_nce(TapeModel<T>& tm, const ContrastBatch& b, LossOptions o = {}) {
  BatchLossBuilder<T> builder(tm, b, o);
  return builder.cm_loss();
}

template <typename T>
typename Tape<T>::Var rewrite_lm_loss(TapeModel<T>& tm, const ContrastBatch& b,
                                      LossOptions o = {}) {
  BatchLossBuilder<T> builder(tm, b, o);
  return builder.rewrite_loss();
}

template <typename T>
LossReport<T> joint_loss(TapeModel<T>& tm, const ContrastBatch& b, double lambda,
                         LossOptions o = {}) {
  BatchLossBuilder<T> builder(tm, b, o);
  return builder.joint(lambda);
}

}  // namespace rimeforge

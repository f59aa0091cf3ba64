#pragma once

// Brute-force embedding index, ranked-retrieval metrics over binary
// relevance, and the four query/target embedding-mode evaluation pathways.
// Scoring is exact dot product over unit rows; ties resolve to the earlier
// corpus insertion. Queries with an empty relevant set score 0, stay in the
// mean, and emit a warning.

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rimeforge/model.hpp"
#include "rimeforge/parallel.hpp"
#include "rimeforge/rng.hpp"
#include "rimeforge/synthtask.hpp"

namespace rimeforge {

struct EmbeddingIndex {
  EmbedMode mode = EmbedMode::Disc;
  int64_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;

  void add(const Embedding& e) {
    require(e.mode == mode, Err::DataError, "index mode mismatch");
    if (dim == 0) dim = static_cast<int64_t>(e.v.size());
    require(static_cast<int64_t>(e.v.size()) == dim, Err::DimensionMismatch,
            "index row dimension mismatch");
    for (const auto& id : ids)
      require(id != e.item_id, Err::DataError, "duplicate index id: " + e.item_id);
    ids.push_back(e.item_id);
    rows.push_back(e.v);
  }

  int64_t size() const { return static_cast<int64_t>(ids.size()); }
};

struct ScoredId {
  std::string id;
  double score = 0;
};

inline std::vector<ScoredId> rank(const Embedding& query, const EmbeddingIndex& index,
                                  int64_t k) {
  require(index.size() > 0, Err::EmptyIndex, "rank: empty index");
  require(static_cast<int64_t>(query.v.size()) == index.dim, Err::DimensionMismatch,
          "rank: query dimension mismatch");
  require(k >= 1, Err::BadConfig, "rank: k >= 1 required");
  std::vector<int64_t> order(static_cast<size_t>(index.size()));
  std::vector<double> scores(static_cast<size_t>(index.size()));
  for (int64_t i = 0; i < index.size(); ++i) {
    order[static_cast<size_t>(i)] = i;
    double s = 0;
    const auto& row = index.rows[static_cast<size_t>(i)];
    for (int64_t j = 0; j < index.dim; ++j) s += query.v[static_cast<size_t>(j)] * row[static_cast<size_t>(j)];
    scores[static_cast<size_t>(i)] = s;
  }
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  std::vector<ScoredId> out;
  const int64_t take = std::min<int64_t>(k, index.size());
  out.reserve(static_cast<size_t>(take));
  for (int64_t r = 0; r < take; ++r)
    out.push_back({index.ids[static_cast<size_t>(order[static_cast<size_t>(r)])],
                   scores[static_cast<size_t>(order[static_cast<size_t>(r)])]});
  return out;
}

struct QueryRanking {
  std::string query_id;
  std::vector<std::string> ranked_ids;
};

using RelevanceJudgments = std::map<std::string, std::set<std::string>>;

namespace detail {

inline const std::set<std::string>& judged(const RelevanceJudgments& j, const std::string& id) {
  auto it = j.find(id);
  require(it != j.end(), Err::UnjudgedQuery, "no judgments for query: " + id);
  if (it->second.empty())
    std::cerr << "warning: query " << id << " has an empty relevant set; scored 0\n";
  return it->second;
}

}  // namespace detail

inline double hit_at_k(const std::vector<QueryRanking>& rankings, const RelevanceJudgments& j,
                       int64_t k) {
  double hits = 0;
  for (const auto& r : rankings) {
    const auto& rel = detail::judged(j, r.query_id);
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(r.ranked_ids.size()); ++i)
      if (rel.count(r.ranked_ids[static_cast<size_t>(i)])) {
        hits += 1;
        break;
      }
  }
  return hits / static_cast<double>(rankings.size());
}

inline double recall_at_k(const std::vector<QueryRanking>& rankings, const RelevanceJudgments& j,
                          int64_t k) {
  double total = 0;
  for (const auto& r : rankings) {
    const auto& rel = detail::judged(j, r.query_id);
    if (rel.empty()) continue;  // contributes 0
    int64_t found = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(r.ranked_ids.size()); ++i)
      if (rel.count(r.ranked_ids[static_cast<size_t>(i)])) ++found;
    total += static_cast<double>(found) / static_cast<double>(rel.size());
  }
  return total / static_cast<double>(rankings.size());
}

inline double precision_at_k(const std::vector<QueryRanking>& rankings,
                             const RelevanceJudgments& j, int64_t k) {
  double total = 0;
  for (const auto& r : rankings) {
    const auto& rel = detail::judged(j, r.query_id);
    int64_t found = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(r.ranked_ids.size()); ++i)
      if (rel.count(r.ranked_ids[static_cast<size_t>(i)])) ++found;
    total += static_cast<double>(found) / static_cast<double>(k);
  }
  return total / static_cast<double>(rankings.size());
}

// Binary-gain NDCG with 1/log2(rank+1) discounts; the ideal DCG places
// min(|relevant|, k) items at the top.
inline double ndcg_at_k(const std::vector<QueryRanking>& rankings, const RelevanceJudgments& j,
                        int64_t k) {
  double total = 0;
  for (const auto& r : rankings) {
    const auto& rel = detail::judged(j, r.query_id);
    if (rel.empty()) continue;
    double dcg = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(r.ranked_ids.size()); ++i)
      if (rel.count(r.ranked_ids[static_cast<size_t>(i)]))
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0;
    const int64_t ideal = std::min<int64_t>(k, static_cast<int64_t>(rel.size()));
    for (int64_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    total += dcg / idcg;
  }
  return total / static_cast<double>(rankings.size());
}

// --- four-pathway evaluation --------------------------------------------------

struct MetricRow {
  double hit1 = 0, recall1 = 0, recall10 = 0, precision1 = 0, ndcg5 = 0, ndcg10 = 0;
  int64_t n_queries = 0;
};

struct PathwayReport {
  EmbedMode query_mode = EmbedMode::Disc;
  EmbedMode target_mode = EmbedMode::Disc;
  MetricRow overall;
  std::map<std::string, MetricRow> by_modality;  // keyed by query pseudo-modality
  double mean_query_tokens = 0;                  // generated tokens per query
  double chance_hit1 = 0;                        // expected Hit@1 of a random ranking
};

struct ModeReport {
  std::vector<PathwayReport> pathways;
};

inline const char* mode_name(EmbedMode m) { return m == EmbedMode::Disc ? "disc" : "gen"; }

inline EmbedMode mode_from(const std::string& s) {
  if (s == "disc") return EmbedMode::Disc;
  if (s == "gen") return EmbedMode::Gen;
  fail(Err::ConfigError, "unknown embedding mode: " + s);
}

struct EvalOptions {
  int rank_depth = 10;
  int threads = 0;  // 0: worker_threads()
};

// Encodes every item in `items` in the requested mode. Gen mode generates a
// greedy rollout first (deterministic offline encoding); the per-item rollout
// lengths are returned through `gen_tokens` when non-null.
template <typename T>
std::vector<Embedding> encode_items(const Model<T>& m, const std::vector<TaskItem>& items,
                                    EmbedMode mode, std::vector<int64_t>* gen_tokens = nullptr,
                                    int threads = 0) {
  std::vector<Embedding> out(items.size());
  if (gen_tokens) gen_tokens->assign(items.size(), 0);
  parallel_for(
      static_cast<int64_t>(items.size()),
      [&](int64_t i) {
        const TaskItem& item = items[static_cast<size_t>(i)];
        const std::vector<int> input = model_input(item);
        if (mode == EmbedMode::Disc) {
          out[static_cast<size_t>(i)] = encode_disc(m, input, item.id);
        } else {
          RewriteRollout r = generate_rewrite(m, input, m.cfg.rollout_budget, 0.0, Rng(0, 0));
          if (gen_tokens) (*gen_tokens)[static_cast<size_t>(i)] = r.length();
          out[static_cast<size_t>(i)] = encode_gen(m, input, r.tokens, item.id);
        }
      },
      threads > 0 ? threads : worker_threads());
  return out;
}

template <typename T>
ModeReport evaluate_modes(const Model<T>& m, const EvalSet& eval,
                          const std::vector<std::pair<EmbedMode, EmbedMode>>& modes,
                          EvalOptions opts = {}) {
  require(!eval.queries.empty() && !eval.corpus.empty(), Err::DataError, "empty eval set");
  RelevanceJudgments judgments;
  for (size_t qi = 0; qi < eval.queries.size(); ++qi)
    judgments[eval.queries[qi].id] = {eval.relevant[qi].begin(), eval.relevant[qi].end()};
  double chance = 0;
  for (size_t qi = 0; qi < eval.queries.size(); ++qi)
    chance += static_cast<double>(eval.relevant[qi].size()) /
              static_cast<double>(eval.corpus.size());
  chance /= static_cast<double>(eval.queries.size());

  // Encode each side at most once per mode, shared across pathways.
  std::map<int, std::vector<Embedding>> corpus_emb, query_emb;
  std::map<int, std::vector<int64_t>> query_tokens;
  for (const auto& [qm, tm] : modes) {
    if (!corpus_emb.count(static_cast<int>(tm)))
      corpus_emb[static_cast<int>(tm)] = encode_items(m, eval.corpus, tm, nullptr, opts.threads);
    if (!query_emb.count(static_cast<int>(qm))) {
      std::vector<int64_t> toks;
      query_emb[static_cast<int>(qm)] = encode_items(m, eval.queries, qm, &toks, opts.threads);
      query_tokens[static_cast<int>(qm)] = std::move(toks);
    }
  }

  ModeReport report;
  for (const auto& [qm, tm] : modes) {
    EmbeddingIndex index;
    index.mode = tm;
    for (const Embedding& e : corpus_emb[static_cast<int>(tm)]) index.add(e);

    const auto& qembs = query_emb[static_cast<int>(qm)];
    std::vector<QueryRanking> rankings(eval.queries.size());
    parallel_for(
        static_cast<int64_t>(eval.queries.size()),
        [&](int64_t i) {
          auto scored = rank(qembs[static_cast<size_t>(i)], index, opts.rank_depth);
          QueryRanking qr;
          qr.query_id = eval.queries[static_cast<size_t>(i)].id;
          for (auto& s : scored) qr.ranked_ids.push_back(std::move(s.id));
          rankings[static_cast<size_t>(i)] = std::move(qr);
        },
        opts.threads > 0 ? opts.threads : worker_threads());

    auto fill_row = [&](const std::vector<QueryRanking>& rs) {
      MetricRow row;
      row.n_queries = static_cast<int64_t>(rs.size());
      if (rs.empty()) return row;
      row.hit1 = hit_at_k(rs, judgments, 1);
      row.recall1 = recall_at_k(rs, judgments, 1);
      row.recall10 = recall_at_k(rs, judgments, 10);
      row.precision1 = precision_at_k(rs, judgments, 1);
      row.ndcg5 = ndcg_at_k(rs, judgments, 5);
      row.ndcg10 = ndcg_at_k(rs, judgments, 10);
      return row;
    };

    PathwayReport pr;
    pr.query_mode = qm;
    pr.target_mode = tm;
    pr.overall = fill_row(rankings);
    pr.chance_hit1 = chance;
    if (qm == EmbedMode::Gen) {
      double total = 0;
      for (int64_t t : query_tokens[static_cast<int>(qm)]) total += static_cast<double>(t);
      pr.mean_query_tokens = total / static_cast<double>(eval.queries.size());
    }
    for (int mod = 0; mod < kNumModalities; ++mod) {
      std::vector<QueryRanking> sub;
      for (size_t i = 0; i < eval.queries.size(); ++i)
        if (eval.queries[i].modality == mod) sub.push_back(rankings[i]);
      if (!sub.empty()) pr.by_modality[kModalityNames[mod]] = fill_row(sub);
    }
    report.pathways.push_back(std::move(pr));
  }
  return report;
}

inline nlohmann::json metric_row_json(const MetricRow& r) {
  return {{"Hit@1", r.hit1},       {"Recall@1", r.recall1},   {"Recall@10", r.recall10},
          {"Precision@1", r.precision1}, {"NDCG@5", r.ndcg5}, {"NDCG@10", r.ndcg10},
          {"queries", r.n_queries}};
}

inline nlohmann::json mode_report_json(const ModeReport& report) {
  nlohmann::json out;
  out["pathways"] = nlohmann::json::array();
  for (const PathwayReport& p : report.pathways) {
    nlohmann::json jp;
    jp["query_mode"] = mode_name(p.query_mode);
    jp["target_mode"] = mode_name(p.target_mode);
    jp["metrics"] = metric_row_json(p.overall);
    jp["mean_query_tokens"] = p.mean_query_tokens;
    jp["chance_hit1"] = p.chance_hit1;
    for (const auto& [mod, row] : p.by_modality) jp["per_modality"][mod] = metric_row_json(row);
    out["pathways"].push_back(std::move(jp));
  }
  return out;
}

// --- embedding dump file -------------------------------------------------------
// Layout: magic "RIMEEMB1" | u32 dim | u32 count | u8 mode | f32 LE rows.

inline constexpr const char* kEmbeddingMagic = "RIMEEMB1";

inline void save_embeddings(const EmbeddingIndex& index, const std::string& path) {
  std::string b;
  b.append(kEmbeddingMagic);
  detail::put_u32(b, static_cast<uint32_t>(index.dim));
  detail::put_u32(b, static_cast<uint32_t>(index.size()));
  b.push_back(index.mode == EmbedMode::Disc ? '\0' : '\x01');
  for (const auto& row : index.rows)
    for (double v : row) detail::put_f32(b, static_cast<float>(v));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), Err::IoError, "cannot write embeddings: " + path);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  require(f.good(), Err::IoError, "embedding write failed: " + path);
}

inline EmbeddingIndex load_embeddings(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open embeddings: " + path);
  std::string b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::ByteReader r{b};
  require(r.str(8) == kEmbeddingMagic, Err::IoError, "bad embedding magic: " + path);
  EmbeddingIndex index;
  index.dim = static_cast<int64_t>(r.u32());
  const uint32_t count = r.u32();
  index.mode = r.str(1)[0] == '\0' ? EmbedMode::Disc : EmbedMode::Gen;
  for (uint32_t i = 0; i < count; ++i) {
    std::vector<double> row(static_cast<size_t>(index.dim));
    for (auto& v : row) v = static_cast<double>(r.f32());
    index.ids.push_back("row" + std::to_string(i));
    index.rows.push_back(std::move(row));
  }
  return index;
}

}  // namespace rimeforge

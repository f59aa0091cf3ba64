#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rimeforge/synthtask.hpp"

using namespace rimeforge;

namespace {

TaskConfig small_cfg() {
  TaskConfig c;
  c.n_groups = 4;
  c.pairs_per_group = 16;
  c.attr_slots = 3;
  c.attr_values = 4;
  c.noise_rate = 0.3;
  c.eval_queries = 24;
  c.eval_corpus = 48;
  c.seed = 42;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("synthtask: generation is a pure function of config", "[synthtask]") {
  Dataset a = gen_corpus(small_cfg());
  Dataset b = gen_corpus(small_cfg());
  REQUIRE(a.train_queries.size() == b.train_queries.size());
  for (size_t i = 0; i < a.train_queries.size(); ++i) {
    REQUIRE(a.train_queries[i].surface == b.train_queries[i].surface);
    REQUIRE(a.train_targets[i].gold_rewrite == b.train_targets[i].gold_rewrite);
  }
  TaskConfig other = small_cfg();
  other.seed = 43;
  Dataset c = gen_corpus(other);
  bool differs = false;
  for (size_t i = 0; i < a.train_queries.size() && !differs; ++i)
    differs = a.train_queries[i].surface != c.train_queries[i].surface ||
              a.train_queries[i].latents != c.train_queries[i].latents;
  REQUIRE(differs);
}

TEST_CASE("synthtask: train and eval attribute combinations are disjoint", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  std::set<std::vector<int>> train_combos, eval_combos;
  for (const auto& it : ds.train_queries) train_combos.insert(it.latents);
  for (const auto& it : ds.eval.queries) eval_combos.insert(it.latents);
  for (const auto& it : ds.eval.corpus) eval_combos.insert(it.latents);
  for (const auto& c : eval_combos) REQUIRE_FALSE(train_combos.count(c));
}

TEST_CASE("synthtask: every gold rewrite matches the template grammar", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  auto check = [&](const TaskItem& it) {
    REQUIRE(matches_rewrite_template(it.gold_rewrite, ds.lang.vocab));
  };
  for (const auto& it : ds.train_queries) check(it);
  for (const auto& it : ds.train_targets) check(it);
  for (const auto& it : ds.eval.queries) check(it);
  for (const auto& it : ds.eval.corpus) check(it);
}

TEST_CASE("synthtask: canonical decode inverts the surface cipher", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  auto check = [&](const TaskItem& it) {
    REQUIRE(decode_surface(ds.lang, ds.cfg, it.surface) == it.latents);
  };
  for (const auto& it : ds.train_queries) check(it);
  for (const auto& it : ds.train_targets) check(it);
  for (const auto& it : ds.eval.corpus) check(it);
}

TEST_CASE("synthtask: surface generator emits only content tokens", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  for (const auto& it : ds.train_queries)
    for (int t : it.surface) REQUIRE(ds.lang.vocab.is_content(t));
}

TEST_CASE("synthtask: every eval query has at least one relevant item", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  REQUIRE(ds.eval.relevant.size() == ds.eval.queries.size());
  for (const auto& rel : ds.eval.relevant) REQUIRE(!rel.empty());
}

TEST_CASE("synthtask: batches are homogeneous and partition one epoch", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  auto batches = make_batches(ds, 8, Rng(1, hash_str("epoch0")));
  std::multiset<std::string> seen;
  for (const auto& b : batches) {
    REQUIRE(b.items.size() >= 2);
    for (const auto& it : b.items) {
      // group token is surface[0] behind the BOS
      REQUIRE(it.q_input[1] == ds.lang.group_tok(b.group_id));
      REQUIRE(it.t_input[1] == ds.lang.group_tok(b.group_id));
      seen.insert(it.q_id);
    }
  }
  REQUIRE(seen.size() == ds.train_queries.size());
  for (const auto& q : ds.train_queries) REQUIRE(seen.count(q.id) == 1);

  auto batches2 = make_batches(ds, 8, Rng(1, hash_str("epoch1")));
  std::multiset<std::string> seen2;
  bool order_differs = false;
  for (size_t i = 0; i < batches2.size(); ++i)
    for (size_t j = 0; j < batches2[i].items.size(); ++j) {
      seen2.insert(batches2[i].items[j].q_id);
      order_differs = order_differs || batches2[i].items[j].q_id != batches[i].items[j].q_id;
    }
  REQUIRE(order_differs);
  REQUIRE(seen == seen2);
}

TEST_CASE("synthtask: batch size above group size is an error", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  REQUIRE_THROWS_AS(make_batches(ds, ds.cfg.pairs_per_group + 1, Rng(1, 2)), Error);
}

TEST_CASE("synthtask: oracle ranking is ideal", "[synthtask]") {
  Dataset ds = gen_corpus(small_cfg());
  for (size_t qi = 0; qi < ds.eval.queries.size(); ++qi) {
    const auto& q = ds.eval.queries[qi];
    auto ranked = oracle_rank(ds.cfg, q, ds.eval.corpus);
    REQUIRE(ranked.size() == ds.eval.corpus.size());
    // all relevant ids occupy the top |relevant| slots
    std::set<std::string> rel(ds.eval.relevant[qi].begin(), ds.eval.relevant[qi].end());
    for (size_t r = 0; r < rel.size(); ++r) REQUIRE(rel.count(ranked[r]) == 1);
  }
}

TEST_CASE("synthtask: dataset files round-trip and are rerun-identical", "[synthtask]") {
  namespace fs = std::filesystem;
  const std::string dir = "synthtask_io_test";
  fs::create_directories(dir);
  Dataset ds = gen_corpus(small_cfg());
  write_dataset(ds, dir);
  const std::string train1 = slurp(dir + "/train.tsv");
  Dataset back = read_dataset(dir);
  REQUIRE(back.train_queries.size() == ds.train_queries.size());
  for (size_t i = 0; i < ds.train_queries.size(); ++i) {
    REQUIRE(back.train_queries[i].id == ds.train_queries[i].id);
    REQUIRE(back.train_queries[i].surface == ds.train_queries[i].surface);
    REQUIRE(back.train_queries[i].latents == ds.train_queries[i].latents);
    REQUIRE(back.train_targets[i].gold_rewrite == ds.train_targets[i].gold_rewrite);
  }
  REQUIRE(back.eval.relevant == ds.eval.relevant);
  write_dataset(back, dir);
  REQUIRE(slurp(dir + "/train.tsv") == train1);
  fs::remove_all(dir);
}

TEST_CASE("synthtask: partial keys widen judgments for odd groups", "[synthtask]") {
  TaskConfig c = small_cfg();
  c.partial_keys = true;
  auto key_even = group_key(c, 2), key_odd = group_key(c, 3);
  REQUIRE(key_even.size() == 3);
  REQUIRE(key_odd.size() == 2);
  std::vector<int> a{1, 2, 3}, b{1, 2, 0};
  REQUIRE(latents_match_on(a, b, key_odd));
  REQUIRE_FALSE(latents_match_on(a, b, key_even));
}

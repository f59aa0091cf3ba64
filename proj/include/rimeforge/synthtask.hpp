#pragma once

// Synthetic retrieval tasks over four pseudo-modality token sublanguages.
//
// Each item carries a latent attribute vector. The surface encodes it with a
// per-modality chained substitution cipher: visiting slots in a
// modality-specific order, each emitted symbol is alphabet[(value + previous
// symbol) mod V], with distractor tokens injected between slots. A symbol
// alone pins down nothing — its meaning depends on the previous non-distractor
// symbol and on how many real symbols precede it — so recovering the
// attributes takes a sequential scan, which is exactly what the gold rewrite
// (canonical attribute statement) supervises.
//
// Train and eval splits are disjoint at the level of attribute combinations.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rimeforge/objectives.hpp"
#include "rimeforge/rng.hpp"
#include "rimeforge/vocab.hpp"

namespace rimeforge {

inline constexpr int kNumModalities = 4;
inline constexpr int kDistractorsPerModality = 4;
inline constexpr int kFillerTokens = 4;
inline constexpr const char* kModalityNames[kNumModalities] = {"img", "vid", "doc", "txt"};

struct TaskConfig {
  int n_groups = 8;
  int pairs_per_group = 128;
  int attr_slots = 3;
  int attr_values = 8;
  double noise_rate = 0.25;
  int rewrite_filler = 0;  // extra filler tokens inside the gold rewrite
  int eval_queries = 256;
  int eval_corpus = 512;
  double eval_fraction = 0.25;  // share of attribute combos reserved for eval
  bool partial_keys = false;    // odd groups judge on the first attr_slots-1 slots
  uint64_t seed = 1;

  void validate() const {
    require(n_groups >= 1 && pairs_per_group >= 2, Err::BadConfig, "task: need groups and pairs");
    require(attr_slots >= 1 && attr_values >= 2, Err::BadConfig, "task: attribute space too small");
    require(noise_rate >= 0.0 && noise_rate < 1.0, Err::BadConfig, "task: noise_rate in [0,1)");
    require(rewrite_filler >= 0, Err::BadConfig, "task: rewrite_filler >= 0");
    require(eval_queries >= 1 && eval_corpus >= 1, Err::BadConfig, "task: eval sizes");
    require(eval_fraction > 0.0 && eval_fraction < 1.0, Err::BadConfig, "task: eval_fraction");
  }
};

struct TaskItem {
  std::string id;
  int group = 0;
  int modality = 0;
  std::vector<int> surface;       // [group tok, modality tok, cipher tokens...]
  std::vector<int> latents;
  std::vector<int> gold_rewrite;  // passes the rewrite-template grammar
};

// Vocabulary plus the id anchors of each token family.
struct TaskLang {
  Vocab vocab;
  int n_groups = 0, attr_slots = 0, attr_values = 0;
  int grp0 = 0, mod0 = 0, canon0 = 0, surf0 = 0, distract0 = 0, filler0 = 0;

  int group_tok(int g) const { return grp0 + g; }
  int mod_tok(int m) const { return mod0 + m; }
  int canon_tok(int slot, int val) const { return canon0 + slot * attr_values + val; }
  int surf_tok(int m, int c) const { return surf0 + m * attr_values + c; }
  int distract_tok(int m, int j) const { return distract0 + m * kDistractorsPerModality + j; }
  int filler_tok(int j) const { return filler0 + j; }

  bool is_distractor(int t) const {
    return t >= distract0 && t < distract0 + kNumModalities * kDistractorsPerModality;
  }
  int surf_index(int t, int m) const {
    const int base = surf0 + m * attr_values;
    require(t >= base && t < base + attr_values, Err::DataError, "not a surface token");
    return t - base;
  }
  int modality_of_marker(int t) const {
    require(t >= mod0 && t < mod0 + kNumModalities, Err::DataError, "not a modality marker");
    return t - mod0;
  }
};

inline TaskLang make_task_lang(const TaskConfig& cfg) {
  cfg.validate();
  TaskLang lang;
  lang.vocab = make_base_vocab();
  lang.n_groups = cfg.n_groups;
  lang.attr_slots = cfg.attr_slots;
  lang.attr_values = cfg.attr_values;
  lang.grp0 = lang.vocab.size();
  for (int g = 0; g < cfg.n_groups; ++g) lang.vocab.add("g" + std::to_string(g));
  lang.mod0 = lang.vocab.size();
  for (const char* m : kModalityNames) lang.vocab.add(m);
  lang.canon0 = lang.vocab.size();
  for (int s = 0; s < cfg.attr_slots; ++s)
    for (int v = 0; v < cfg.attr_values; ++v)
      lang.vocab.add("c" + std::to_string(s) + "v" + std::to_string(v));
  lang.surf0 = lang.vocab.size();
  for (int m = 0; m < kNumModalities; ++m)
    for (int c = 0; c < cfg.attr_values; ++c)
      lang.vocab.add(std::string("s") + kModalityNames[m] + "_" + std::to_string(c));
  lang.distract0 = lang.vocab.size();
  for (int m = 0; m < kNumModalities; ++m)
    for (int j = 0; j < kDistractorsPerModality; ++j)
      lang.vocab.add(std::string("x") + kModalityNames[m] + "_" + std::to_string(j));
  lang.filler0 = lang.vocab.size();
  for (int j = 0; j < kFillerTokens; ++j) lang.vocab.add("f" + std::to_string(j));
  return lang;
}

// Slot visit order and cipher base per modality.
inline int cipher_slot(int modality, int visit, int slots) { return (visit + modality) % slots; }
inline int cipher_base(int modality, int values) { return (3 * modality + 1) % values; }

// Modality pairing of a group: query side and target side.
inline int group_query_modality(int g) { return g % kNumModalities; }
inline int group_target_modality(int g) {
  return (g + g / kNumModalities) % kNumModalities;
}

// Judgment key of a group: the attribute slots that define relevance.
inline std::vector<int> group_key(const TaskConfig& cfg, int g) {
  std::vector<int> key;
  const int n = (cfg.partial_keys && (g % 2 == 1) && cfg.attr_slots > 1) ? cfg.attr_slots - 1
                                                                         : cfg.attr_slots;
  for (int s = 0; s < n; ++s) key.push_back(s);
  return key;
}

inline bool latents_match_on(const std::vector<int>& a, const std::vector<int>& b,
                             const std::vector<int>& key) {
  for (int s : key)
    if (a[static_cast<size_t>(s)] != b[static_cast<size_t>(s)]) return false;
  return true;
}

inline std::vector<int> encode_surface(const TaskLang& lang, const TaskConfig& cfg, int group,
                                       int modality, const std::vector<int>& attrs, Rng& rng) {
  std::vector<int> out{lang.group_tok(group), lang.mod_tok(modality)};
  int c = cipher_base(modality, cfg.attr_values);
  for (int i = 0; i < cfg.attr_slots; ++i) {
    if (rng.next_bernoulli(cfg.noise_rate))
      out.push_back(lang.distract_tok(modality, static_cast<int>(rng.next_below(kDistractorsPerModality))));
    const int v = attrs[static_cast<size_t>(cipher_slot(modality, i, cfg.attr_slots))];
    c = (v + c) % cfg.attr_values;
    out.push_back(lang.surf_tok(modality, c));
  }
  if (rng.next_bernoulli(cfg.noise_rate))
    out.push_back(lang.distract_tok(modality, static_cast<int>(rng.next_below(kDistractorsPerModality))));
  return out;
}

// Canonical decode: the inverse transduction the rewrite teaches.
inline std::vector<int> decode_surface(const TaskLang& lang, const TaskConfig& cfg,
                                       const std::vector<int>& surface) {
  require(surface.size() >= 2, Err::DataError, "surface too short");
  const int m = lang.modality_of_marker(surface[1]);
  std::vector<int> attrs(static_cast<size_t>(cfg.attr_slots), -1);
  int prev = cipher_base(m, cfg.attr_values);
  int visit = 0;
  for (size_t i = 2; i < surface.size(); ++i) {
    const int t = surface[i];
    if (lang.is_distractor(t)) continue;
    require(visit < cfg.attr_slots, Err::DataError, "surface has too many symbols");
    const int c = lang.surf_index(t, m);
    attrs[static_cast<size_t>(cipher_slot(m, visit, cfg.attr_slots))] =
        (c - prev + cfg.attr_values) % cfg.attr_values;
    prev = c;
    ++visit;
  }
  require(visit == cfg.attr_slots, Err::DataError, "surface has too few symbols");
  return attrs;
}

inline std::vector<int> make_gold_rewrite(const TaskLang& lang, const TaskConfig& cfg,
                                          const std::vector<int>& attrs) {
  std::vector<int> r{Vocab::kThinkOpen};
  for (int s = 0; s < cfg.attr_slots; ++s)
    r.push_back(lang.canon_tok(s, attrs[static_cast<size_t>(s)]));
  for (int j = 0; j < cfg.rewrite_filler; ++j)
    r.push_back(lang.filler_tok((attrs[0] + j) % kFillerTokens));
  r.push_back(Vocab::kThinkClose);
  for (int s : lang.vocab.suffix) r.push_back(s);
  r.push_back(Vocab::kEos);
  return r;
}

// Model input for an item: BOS then the surface.
inline std::vector<int> model_input(const TaskItem& item) {
  std::vector<int> in{Vocab::kBos};
  in.insert(in.end(), item.surface.begin(), item.surface.end());
  return in;
}

struct EvalSet {
  std::vector<TaskItem> queries;
  std::vector<TaskItem> corpus;
  // relevant corpus ids per query, in corpus insertion order
  std::vector<std::vector<std::string>> relevant;
};

struct Dataset {
  TaskConfig cfg;
  TaskLang lang;
  std::vector<TaskItem> train_queries;  // aligned with train_targets (i <-> i)
  std::vector<TaskItem> train_targets;
  EvalSet eval;
};

namespace detail {

inline std::vector<int> combo_to_attrs(int64_t combo, int slots, int values) {
  std::vector<int> attrs(static_cast<size_t>(slots));
  for (int s = 0; s < slots; ++s) {
    attrs[static_cast<size_t>(s)] = static_cast<int>(combo % values);
    combo /= values;
  }
  return attrs;
}

inline TaskItem make_item(const TaskLang& lang, const TaskConfig& cfg, std::string id, int group,
                          int modality, const std::vector<int>& attrs, Rng rng) {
  TaskItem item;
  item.id = std::move(id);
  item.group = group;
  item.modality = modality;
  item.latents = attrs;
  item.surface = encode_surface(lang, cfg, group, modality, attrs, rng);
  item.gold_rewrite = make_gold_rewrite(lang, cfg, attrs);
  return item;
}

}  // namespace detail

inline Dataset gen_corpus(const TaskConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.cfg = cfg;
  ds.lang = make_task_lang(cfg);
  const TaskLang& lang = ds.lang;

  // Disjoint train/eval attribute combinations.
  int64_t n_combos = 1;
  for (int s = 0; s < cfg.attr_slots; ++s) n_combos *= cfg.attr_values;
  require(n_combos >= 8, Err::BadConfig, "attribute space too small to split");
  std::vector<int64_t> combos(static_cast<size_t>(n_combos));
  for (int64_t i = 0; i < n_combos; ++i) combos[static_cast<size_t>(i)] = i;
  Rng split_rng(cfg.seed, hash_str("combo_split"));
  for (int64_t i = n_combos - 1; i > 0; --i)
    std::swap(combos[static_cast<size_t>(i)],
              combos[split_rng.next_below(static_cast<uint64_t>(i + 1))]);
  const int64_t n_eval =
      std::max<int64_t>(4, static_cast<int64_t>(static_cast<double>(n_combos) * cfg.eval_fraction));
  std::vector<int64_t> eval_combos(combos.begin(), combos.begin() + n_eval);
  std::vector<int64_t> train_combos(combos.begin() + n_eval, combos.end());

  // Train pairs per homogeneous group.
  for (int g = 0; g < cfg.n_groups; ++g) {
    Rng grng(cfg.seed, hash_str("train_group") + static_cast<uint64_t>(g));
    const int qm = group_query_modality(g), tm = group_target_modality(g);
    for (int p = 0; p < cfg.pairs_per_group; ++p) {
      const auto attrs = detail::combo_to_attrs(
          train_combos[grng.next_below(train_combos.size())], cfg.attr_slots, cfg.attr_values);
      const std::string tag = std::to_string(g) + "_" + std::to_string(p);
      ds.train_queries.push_back(
          detail::make_item(lang, cfg, "q" + tag, g, qm, attrs, grng.split(2 * p)));
      ds.train_targets.push_back(
          detail::make_item(lang, cfg, "t" + tag, g, tm, attrs, grng.split(2 * p + 1)));
    }
  }

  // Eval queries, then a corpus that covers every query combination.
  Rng qrng(cfg.seed, hash_str("eval_queries"));
  for (int k = 0; k < cfg.eval_queries; ++k) {
    const int g = static_cast<int>(qrng.next_below(static_cast<uint64_t>(cfg.n_groups)));
    const auto attrs = detail::combo_to_attrs(eval_combos[qrng.next_below(eval_combos.size())],
                                              cfg.attr_slots, cfg.attr_values);
    ds.eval.queries.push_back(detail::make_item(lang, cfg, "eq" + std::to_string(k), g,
                                                group_query_modality(g), attrs, qrng.split(k)));
  }
  Rng crng(cfg.seed, hash_str("eval_corpus"));
  std::vector<std::vector<int>> corpus_attrs;
  for (const TaskItem& q : ds.eval.queries) {
    bool seen = false;
    for (const auto& a : corpus_attrs) seen = seen || a == q.latents;
    if (!seen) corpus_attrs.push_back(q.latents);
  }
  require(static_cast<int>(corpus_attrs.size()) <= cfg.eval_corpus, Err::BadConfig,
          "eval_corpus too small to cover query combinations");
  while (static_cast<int>(corpus_attrs.size()) < cfg.eval_corpus)
    corpus_attrs.push_back(detail::combo_to_attrs(eval_combos[crng.next_below(eval_combos.size())],
                                                  cfg.attr_slots, cfg.attr_values));
  for (int k = 0; k < cfg.eval_corpus; ++k) {
    const int g = static_cast<int>(crng.next_below(static_cast<uint64_t>(cfg.n_groups)));
    ds.eval.corpus.push_back(detail::make_item(lang, cfg, "ec" + std::to_string(k), g,
                                               group_target_modality(g), corpus_attrs[static_cast<size_t>(k)],
                                               crng.split(k)));
  }
  for (const TaskItem& q : ds.eval.queries) {
    const auto key = group_key(cfg, q.group);
    std::vector<std::string> rel;
    for (const TaskItem& c : ds.eval.corpus)
      if (latents_match_on(q.latents, c.latents, key)) rel.push_back(c.id);
    require(!rel.empty(), Err::DataError, "eval query without relevant items: " + q.id);
    ds.eval.relevant.push_back(std::move(rel));
  }
  return ds;
}

// Homogeneous batches: every batch is drawn from a single group; one epoch
// covers every training pair exactly once. A trailing remainder of one pair
// is absorbed into the previous batch so no batch has N=1.
inline std::vector<ContrastBatch> make_batches(const Dataset& ds, int batch_size, Rng rng) {
  require(batch_size >= 2, Err::BadConfig, "batch_size must be >= 2");
  require(batch_size <= ds.cfg.pairs_per_group, Err::GroupTooSmall,
          "batch_size exceeds pairs_per_group");
  std::vector<ContrastBatch> batches;
  for (int g = 0; g < ds.cfg.n_groups; ++g) {
    std::vector<int> order;
    for (int p = 0; p < ds.cfg.pairs_per_group; ++p) order.push_back(g * ds.cfg.pairs_per_group + p);
    Rng grng = rng.split(static_cast<uint64_t>(g));
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[grng.next_below(i + 1)]);
    size_t at = 0;
    while (at < order.size()) {
      size_t take = std::min<size_t>(static_cast<size_t>(batch_size), order.size() - at);
      if (order.size() - at - take == 1) ++take;  // avoid a trailing N=1 batch
      ContrastBatch b;
      b.group_id = g;
      for (size_t i = 0; i < take; ++i) {
        const int idx = order[at + i];
        const TaskItem& q = ds.train_queries[static_cast<size_t>(idx)];
        const TaskItem& t = ds.train_targets[static_cast<size_t>(idx)];
        b.items.push_back({model_input(q), model_input(t), q.gold_rewrite, t.gold_rewrite, q.id, t.id});
      }
      at += take;
      batches.push_back(std::move(b));
    }
  }
  Rng brng = rng.split(hash_str("batch_order"));
  for (size_t i = batches.size() - 1; i > 0; --i)
    std::swap(batches[i], batches[brng.next_below(i + 1)]);
  return batches;
}

// Ground-truth ranking: exact latent-key matches first (corpus order), then
// the rest. Used as the ideal-reference oracle in metric tests.
inline std::vector<std::string> oracle_rank(const TaskConfig& cfg, const TaskItem& query,
                                            const std::vector<TaskItem>& corpus) {
  const auto key = group_key(cfg, query.group);
  std::vector<std::string> hits, rest;
  for (const TaskItem& c : corpus)
    (latents_match_on(query.latents, c.latents, key) ? hits : rest).push_back(c.id);
  hits.insert(hits.end(), rest.begin(), rest.end());
  return hits;
}

// --- dataset files -----------------------------------------------------------
// Line-oriented text, one item per line:
//   id <tab> group <tab> modality <tab> surface tokens <tab> latents <tab> rewrite tokens
// train.tsv holds query/target lines alternating (a pair per two lines).

inline std::string item_to_line(const TaskLang& lang, const TaskItem& item) {
  std::ostringstream os;
  os << item.id << '\t' << item.group << '\t' << kModalityNames[item.modality] << '\t';
  for (size_t i = 0; i < item.surface.size(); ++i)
    os << (i ? " " : "") << lang.vocab.name(item.surface[i]);
  os << '\t';
  for (size_t i = 0; i < item.latents.size(); ++i) os << (i ? "," : "") << item.latents[i];
  os << '\t';
  for (size_t i = 0; i < item.gold_rewrite.size(); ++i)
    os << (i ? " " : "") << lang.vocab.name(item.gold_rewrite[i]);
  return os.str();
}

inline TaskItem item_from_line(const TaskLang& lang, const std::string& line) {
  std::vector<std::string> cols;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == '\t') {
      cols.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  require(cols.size() == 6, Err::DataError, "dataset line needs 6 columns");
  TaskItem item;
  item.id = cols[0];
  item.group = std::stoi(cols[1]);
  item.modality = -1;
  for (int m = 0; m < kNumModalities; ++m)
    if (cols[2] == kModalityNames[m]) item.modality = m;
  require(item.modality >= 0, Err::DataError, "unknown modality: " + cols[2]);
  auto split_tokens = [&](const std::string& s, auto put) {
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) put(tok);
  };
  split_tokens(cols[3], [&](const std::string& t) { item.surface.push_back(lang.vocab.id(t)); });
  {
    std::istringstream is(cols[4]);
    std::string part;
    while (std::getline(is, part, ',')) item.latents.push_back(std::stoi(part));
  }
  split_tokens(cols[5], [&](const std::string& t) { item.gold_rewrite.push_back(lang.vocab.id(t)); });
  return item;
}

inline constexpr const char* kDatasetSchema = "rimeforge-dataset v1";

namespace detail {

inline void write_items(const TaskLang& lang, const std::vector<TaskItem>& items,
                        const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), Err::IoError, "cannot write " + path);
  f << "# " << kDatasetSchema << "\n";
  for (const TaskItem& it : items) f << item_to_line(lang, it) << "\n";
  require(f.good(), Err::IoError, "write failed: " + path);
}

inline std::vector<TaskItem> read_items(const TaskLang& lang, const std::string& path) {
  std::ifstream f(path);
  require(f.good(), Err::DataError, "cannot open " + path);
  std::string line;
  require(std::getline(f, line) && line == std::string("# ") + kDatasetSchema, Err::DataError,
          "bad dataset schema header in " + path);
  std::vector<TaskItem> items;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    items.push_back(item_from_line(lang, line));
  }
  return items;
}

}  // namespace detail

inline void write_task_config(const TaskConfig& c, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), Err::IoError, "cannot write " + path);
  f << "schema = " << kDatasetSchema << "\n";
  f << "task.n_groups = " << c.n_groups << "\n";
  f << "task.pairs_per_group = " << c.pairs_per_group << "\n";
  f << "task.attr_slots = " << c.attr_slots << "\n";
  f << "task.attr_values = " << c.attr_values << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c.noise_rate);
  f << "task.noise_rate = " << buf << "\n";
  f << "task.rewrite_filler = " << c.rewrite_filler << "\n";
  f << "task.eval_queries = " << c.eval_queries << "\n";
  f << "task.eval_corpus = " << c.eval_corpus << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", c.eval_fraction);
  f << "task.eval_fraction = " << buf << "\n";
  f << "task.partial_keys = " << (c.partial_keys ? "true" : "false") << "\n";
  f << "task.seed = " << c.seed << "\n";
}

inline TaskConfig read_task_config(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), Err::DataError, "cannot open " + path);
  TaskConfig c;
  std::string line;
  bool schema_ok = false;
  while (std::getline(f, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "schema") schema_ok = (val == kDatasetSchema);
    else if (key == "task.n_groups") c.n_groups = std::stoi(val);
    else if (key == "task.pairs_per_group") c.pairs_per_group = std::stoi(val);
    else if (key == "task.attr_slots") c.attr_slots = std::stoi(val);
    else if (key == "task.attr_values") c.attr_values = std::stoi(val);
    else if (key == "task.noise_rate") c.noise_rate = std::stod(val);
    else if (key == "task.rewrite_filler") c.rewrite_filler = std::stoi(val);
    else if (key == "task.eval_queries") c.eval_queries = std::stoi(val);
    else if (key == "task.eval_corpus") c.eval_corpus = std::stoi(val);
    else if (key == "task.eval_fraction") c.eval_fraction = std::stod(val);
    else if (key == "task.partial_keys") c.partial_keys = (val == "true");
    else if (key == "task.seed") c.seed = std::stoull(val);
    else fail(Err::DataError, "unknown dataset meta key: " + key);
  }
  require(schema_ok, Err::DataError, "dataset meta missing schema line: " + path);
  c.validate();
  return c;
}

// Dataset directory layout: dataset.meta, train.tsv (query/target lines
// alternating), eval_queries.tsv, eval_corpus.tsv.
inline void write_dataset(const Dataset& ds, const std::string& dir) {
  write_task_config(ds.cfg, dir + "/dataset.meta");
  std::vector<TaskItem> train;
  for (size_t i = 0; i < ds.train_queries.size(); ++i) {
    train.push_back(ds.train_queries[i]);
    train.push_back(ds.train_targets[i]);
  }
  detail::write_items(ds.lang, train, dir + "/train.tsv");
  detail::write_items(ds.lang, ds.eval.queries, dir + "/eval_queries.tsv");
  detail::write_items(ds.lang, ds.eval.corpus, dir + "/eval_corpus.tsv");
}

inline Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  ds.cfg = read_task_config(dir + "/dataset.meta");
  ds.lang = make_task_lang(ds.cfg);
  const std::vector<TaskItem> train = detail::read_items(ds.lang, dir + "/train.tsv");
  require(train.size() % 2 == 0, Err::DataError, "train.tsv must hold query/target pairs");
  for (size_t i = 0; i < train.size(); i += 2) {
    ds.train_queries.push_back(train[i]);
    ds.train_targets.push_back(train[i + 1]);
  }
  ds.eval.queries = detail::read_items(ds.lang, dir + "/eval_queries.tsv");
  ds.eval.corpus = detail::read_items(ds.lang, dir + "/eval_corpus.tsv");
  for (const TaskItem& q : ds.eval.queries) {
    const auto key = group_key(ds.cfg, q.group);
    std::vector<std::string> rel;
    for (const TaskItem& c : ds.eval.corpus)
      if (latents_match_on(q.latents, c.latents, key)) rel.push_back(c.id);
    require(!rel.empty(), Err::DataError, "eval query without relevant items: " + q.id);
    ds.eval.relevant.push_back(std::move(rel));
  }
  return ds;
}

}  // namespace rimeforge

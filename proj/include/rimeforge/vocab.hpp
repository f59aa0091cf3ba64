#pragma once

// Token vocabulary for the synthetic language. The low ids are the fixed
// special tokens; everything at and above `first_content` is a content
// symbol the surface generator may emit. The rewrite template is
//   <think> content+ </think> <sfx0> <sfx1> <eos>
// where the two suffix tokens render the fixed answer tail of the template.

#include <string>
#include <unordered_map>
#include <vector>

#include "rimeforge/tensor.hpp"

namespace rimeforge {

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kThinkOpen = 3;
  static constexpr int kThinkClose = 4;
  static constexpr int kDiscEmb = 5;
  static constexpr int kGenEmb = 6;

  std::vector<std::string> names;
  std::vector<int> suffix;  // answer-suffix ids, in template order
  int first_content = 0;
  std::unordered_map<std::string, int> by_name;

  int size() const { return static_cast<int>(names.size()); }
  bool is_content(int t) const { return t >= first_content && t < size(); }
  bool is_special(int t) const { return t >= 0 && t < first_content; }

  const std::string& name(int t) const { return names[static_cast<size_t>(t)]; }

  int id(const std::string& n) const {
    auto it = by_name.find(n);
    require(it != by_name.end(), Err::DataError, "unknown token: " + n);
    return it->second;
  }

  int add(const std::string& n) {
    require(!by_name.count(n), Err::BadConfig, "duplicate token: " + n);
    names.push_back(n);
    by_name[n] = size() - 1;
    return size() - 1;
  }
};

inline Vocab make_base_vocab(int n_suffix = 2) {
  Vocab v;
  for (const char* n : {"<pad>", "<bos>", "<eos>", "<think>", "</think>", "<disc_emb>", "<gen_emb>"})
    v.add(n);
  for (int i = 0; i < n_suffix; ++i) v.suffix.push_back(v.add("<sfx" + std::to_string(i) + ">"));
  v.first_content = v.size();
  return v;
}

// Rewrite-template grammar: <think>, >=1 content tokens, </think>, the fixed
// suffix, <eos>, end of sequence. Pure function of the token list.
inline bool matches_rewrite_template(const std::vector<int>& tokens, const Vocab& v) {
  size_t i = 0;
  const size_t n = tokens.size();
  if (i >= n || tokens[i] != Vocab::kThinkOpen) return false;
  ++i;
  size_t body = 0;
  while (i < n && v.is_content(tokens[i])) {
    ++i;
    ++body;
  }
  if (body == 0) return false;
  if (i >= n || tokens[i] != Vocab::kThinkClose) return false;
  ++i;
  for (int s : v.suffix) {
    if (i >= n || tokens[i] != s) return false;
    ++i;
  }
  if (i >= n || tokens[i] != Vocab::kEos) return false;
  ++i;
  return i == n;
}

}  // namespace rimeforge

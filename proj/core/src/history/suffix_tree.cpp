// Copyright 2026 The Rhyme Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rhyme/history/suffix_tree.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <utility>

#include "rhyme/util/error.hpp"

namespace rhyme::history {
namespace {

// Ukkonen's online construction over the concatenation
//   r_0 #0 r_1 #1 ... r_k #k
// where every #j is a distinct negative symbol. Unique separators make every
// suffix of the concatenation end in its own leaf and keep separators off
// all interior edges.
class UkkonenBuilder {
 public:
  struct Node {
    std::int32_t start = 0;
    std::int32_t end = -1;  // exclusive; -1 marks a leaf that grows with the text
    std::int32_t link = 0;
    std::map<std::int64_t, std::int32_t> next;
  };

  explicit UkkonenBuilder(const std::vector<std::int64_t>& text) : text_(text) {
    nodes_.reserve(2 * text.size() + 2);
    nodes_.push_back(Node{0, 0, 0, {}});
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(text.size()); ++i) extend(i);
  }

  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] std::int32_t edge_end(const Node& n) const {
    return n.end < 0 ? static_cast<std::int32_t>(text_.size()) : n.end;
  }

 private:
  std::int32_t edge_length(std::int32_t node, std::int32_t pos) const {
    const auto& n = nodes_[node];
    return (n.end < 0 ? pos + 1 : n.end) - n.start;
  }

  std::int32_t new_node(std::int32_t start, std::int32_t end) {
    nodes_.push_back(Node{start, end, 0, {}});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  void extend(std::int32_t pos) {
    ++remaining_;
    std::int32_t last_new = -1;
    while (remaining_ > 0) {
      if (active_length_ == 0) active_edge_ = pos;
      const auto edge_symbol = text_[active_edge_];
      auto it = nodes_[active_node_].next.find(edge_symbol);
      if (it == nodes_[active_node_].next.end()) {
        const auto leaf = new_node(pos, -1);
        nodes_[active_node_].next.emplace(edge_symbol, leaf);
        if (last_new != -1) {
          nodes_[last_new].link = active_node_;
          last_new = -1;
        }
      } else {
        const auto next = it->second;
        const auto len = edge_length(next, pos);
        if (active_length_ >= len) {
          active_edge_ += len;
          active_length_ -= len;
          active_node_ = next;
          continue;
        }
        if (text_[nodes_[next].start + active_length_] == text_[pos]) {
          if (last_new != -1 && active_node_ != 0) {
            nodes_[last_new].link = active_node_;
            last_new = -1;
          }
          ++active_length_;
          break;
        }
        const auto split_start = nodes_[next].start;
        const auto split = new_node(split_start, split_start + active_length_);
        nodes_[active_node_].next[edge_symbol] = split;
        const auto leaf = new_node(pos, -1);
        nodes_[split].next.emplace(text_[pos], leaf);
        nodes_[next].start += active_length_;
        nodes_[split].next.emplace(text_[nodes_[next].start], next);
        if (last_new != -1) nodes_[last_new].link = split;
        last_new = split;
      }
      --remaining_;
      if (active_node_ == 0 && active_length_ > 0) {
        --active_length_;
        active_edge_ = pos - remaining_ + 1;
      } else if (active_node_ != 0) {
        active_node_ = nodes_[active_node_].link;
      }
    }
  }

  const std::vector<std::int64_t>& text_;
  std::vector<Node> nodes_;
  std::int32_t active_node_ = 0;
  std::int32_t active_edge_ = 0;
  std::int32_t active_length_ = 0;
  std::int32_t remaining_ = 0;
};

}  // namespace

SuffixTree SuffixTree::build(std::string prompt_id, std::int64_t epoch,
                             std::span<const Response> responses) {
  SuffixTree tree;
  tree.prompt_id_ = std::move(prompt_id);
  tree.epoch_ = epoch;

  std::vector<std::int64_t> symbols;
  std::vector<std::int32_t> owner;        // response index per text position
  std::vector<std::int32_t> separator_at; // text position of #j
  std::vector<double> rewards;
  for (const auto& r : responses) {
    if (!std::isfinite(r.reward)) {
      throw InputError("non-finite reward for prompt " + tree.prompt_id_);
    }
    if (r.prompt_id != tree.prompt_id_) {
      throw InputError("response for prompt " + r.prompt_id + " passed to tree of " +
                       tree.prompt_id_);
    }
    if (r.tokens.empty()) continue;
    const auto j = static_cast<std::int32_t>(rewards.size());
    for (const auto t : r.tokens) {
      if (t < 0) throw InputError("negative token id in prompt " + tree.prompt_id_);
      symbols.push_back(t);
      owner.push_back(j);
    }
    separator_at.push_back(static_cast<std::int32_t>(symbols.size()));
    symbols.push_back(-static_cast<std::int64_t>(j) - 1);
    owner.push_back(j);
    rewards.push_back(r.reward);
    tree.total_tokens_ += r.tokens.size();
  }
  tree.responses_ = rewards.size();

  tree.text_.reserve(symbols.size());
  for (const auto s : symbols) tree.text_.push_back(s < 0 ? TokenId{-1} : static_cast<TokenId>(s));
  tree.nodes_.push_back(Node{});
  if (symbols.empty()) return tree;

  const UkkonenBuilder builder(symbols);
  const auto& bnodes = builder.nodes();
  tree.nodes_.reserve(bnodes.size());
  tree.children_.reserve(bnodes.size());

  // Pre-order copy into the compact layout. Leaf edges are cut at their
  // response's separator; a leaf whose edge starts with the separator is a
  // suffix ending exactly at its parent.
  std::vector<std::pair<std::int32_t, std::int32_t>> stack{{0, 0}};
  std::vector<std::pair<TokenId, std::int32_t>> kept;
  while (!stack.empty()) {
    const auto [bid, cid] = stack.back();
    stack.pop_back();
    kept.clear();
    for (const auto& [symbol, child] : bnodes[bid].next) {
      const auto& bn = bnodes[child];
      Node node;
      node.edge_begin = bn.start;
      if (bn.next.empty()) {
        const auto j = owner[bn.start];
        const auto len = separator_at[j] - bn.start;
        if (len == 0) {
          if (cid != 0) {
            tree.nodes_[cid].suffix_end = true;
            tree.nodes_[cid].end_weight += rewards[j];
          }
          continue;
        }
        node.edge_len = len;
        node.suffix_end = true;
        node.end_weight = rewards[j];
      } else {
        node.edge_len = builder.edge_end(bn) - bn.start;
        assert(std::none_of(symbols.begin() + bn.start, symbols.begin() + bn.start + node.edge_len,
                            [](std::int64_t s) { return s < 0; }));
      }
      const auto idx = static_cast<std::int32_t>(tree.nodes_.size());
      tree.nodes_.push_back(node);
      kept.emplace_back(static_cast<TokenId>(symbol), idx);
      if (!bn.next.empty()) stack.emplace_back(child, idx);
    }
    auto& parent = tree.nodes_[cid];
    parent.child_begin = static_cast<std::int32_t>(tree.children_.size());
    parent.child_count = static_cast<std::int32_t>(kept.size());
    for (const auto& [tok, idx] : kept) tree.children_.push_back(Child{tok, idx});
  }

  // Children always sit at larger indices than their parent.
  for (auto i = static_cast<std::int32_t>(tree.nodes_.size()) - 1; i >= 0; --i) {
    auto& n = tree.nodes_[i];
    double sum = n.end_weight;
    std::int32_t best = -1;
    double best_priority = 0.0;
    for (std::int32_t c = n.child_begin; c < n.child_begin + n.child_count; ++c) {
      const double p = tree.nodes_[tree.children_[c].node].priority;
      sum += p;
      if (best < 0 || p > best_priority) {
        best = c;
        best_priority = p;
      }
    }
    if (best >= 0 && n.suffix_end && n.end_weight > best_priority) best = -1;
    n.priority = sum;
    n.best = best;
  }
  return tree;
}

std::int32_t SuffixTree::find_child(const Node& n, TokenId token) const {
  const auto first = children_.begin() + n.child_begin;
  const auto last = first + n.child_count;
  const auto it = std::lower_bound(first, last, token,
                                   [](const Child& c, TokenId t) { return c.token < t; });
  if (it == last || it->token != token) return -1;
  return static_cast<std::int32_t>(it - children_.begin());
}

std::optional<SuffixTree::Position> SuffixTree::match(std::span<const TokenId> prefix) const {
  if (prefix.empty() || nodes_.empty()) return std::nullopt;
  Position at{0, 0};
  for (const auto tok : prefix) {
    const auto& n = nodes_[at.node];
    if (at.offset == n.edge_len) {
      const auto c = find_child(n, tok);
      if (c < 0) return std::nullopt;
      at = Position{children_[c].node, 1};
    } else {
      if (text_[n.edge_begin + at.offset] != tok) return std::nullopt;
      ++at.offset;
    }
  }
  return at;
}

std::vector<TokenId> SuffixTree::continuation(Position from, std::size_t window) const {
  std::vector<TokenId> out;
  out.reserve(std::min<std::size_t>(window, 64));
  while (out.size() < window) {
    const auto& n = nodes_[from.node];
    if (from.offset < n.edge_len) {
      out.push_back(text_[n.edge_begin + from.offset]);
      ++from.offset;
      continue;
    }
    if (n.best < 0) break;
    from = Position{children_[n.best].node, 0};
  }
  return out;
}

DraftResult SuffixTree::draft(std::span<const TokenId> prefix, std::size_t window) const {
  DraftResult result;
  const auto at = match(prefix);
  if (!at) return result;
  result.matched_prefix_len = prefix.size();
  result.tokens = continuation(*at, window);

  // Priority of the branch the draft ended on.
  Position end = *at;
  std::size_t walked = 0;
  while (walked < result.tokens.size()) {
    const auto& n = nodes_[end.node];
    if (end.offset < n.edge_len) {
      const auto step = std::min<std::size_t>(n.edge_len - end.offset, result.tokens.size() - walked);
      end.offset += static_cast<std::int32_t>(step);
      walked += step;
    } else {
      end = Position{children_[n.best].node, 0};
    }
  }
  result.source_priority = nodes_[end.node].priority;
  return result;
}

double SuffixTree::priority(Position at) const { return nodes_.at(at.node).priority; }

bool SuffixTree::ends_suffix(Position at) const {
  const auto& n = nodes_.at(at.node);
  return at.offset == n.edge_len && n.suffix_end;
}

std::size_t SuffixTree::node_count() const {
  std::size_t count = nodes_.size();
  for (const auto& n : nodes_) {
    if (n.suffix_end && n.child_count > 0) ++count;
  }
  return count;
}

SuffixTree::Stats SuffixTree::stats() const {
  Stats s;
  s.nodes = node_count();
  s.tokens = total_tokens_;
  s.responses = responses_;
  s.approx_bytes = sizeof(SuffixTree) + nodes_.capacity() * sizeof(Node) +
                   children_.capacity() * sizeof(Child) + text_.capacity() * sizeof(TokenId) +
                   prompt_id_.capacity();
  return s;
}

bool SuffixTree::check_invariants() const {
  if (nodes_.empty()) return false;
  if (node_count() > 2 * total_tokens_ + 1) return false;
  for (const auto& n : nodes_) {
    double sum = n.end_weight;
    for (std::int32_t c = n.child_begin; c < n.child_begin + n.child_count; ++c) {
      if (c > n.child_begin && children_[c - 1].token >= children_[c].token) return false;
      const auto& child = nodes_[children_[c].node];
      if (child.edge_len <= 0 || text_[child.edge_begin] != children_[c].token) return false;
      sum += child.priority;
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(sum));
    if (std::abs(sum - n.priority) > tol) return false;
    if (n.child_count == 0 && &n != &nodes_[0] && !n.suffix_end) return false;
  }
  return true;
}

}  // namespace rhyme::history

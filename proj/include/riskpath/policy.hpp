#pragma once

// SPDX-License-Identifier: Apache-2.0

// Toy differentiable stand-in for the two model stages: a binary logistic
// filter (stage 1) and a hierarchical linear-softmax path policy (stage 2).
// Stage 2 makes one softmax decision per internal node along the path; the
// virtual root decision offers every domain plus a final No-Risk action.
// Log-probabilities and gradients are exact and hand-derivable, which is
// what the finite-difference checks in the test suite rely on.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/rng.hpp"
#include "riskpath/taxonomy.hpp"
#include "riskpath/transcript.hpp"

namespace riskpath {

using FeatureVector = std::vector<double>;

struct Stage1Params {
  std::vector<double> weights;
  double bias = 0.0;
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double dot(const std::vector<double>& w, const FeatureVector& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("dimension mismatch: " + std::to_string(w.size()) + " vs " +
                                std::to_string(x.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

/// P(risky | x) under the logistic filter.
inline double stage1_predict(const Stage1Params& p, const FeatureVector& x) {
  return logistic(dot(p.weights, x) + p.bias);
}

// ---------------------------------------------------------------------------
// Stage 2

/// One softmax decision: logits[a] = weights[a] . x + bias[a].
struct DecisionBlock {
  std::vector<std::vector<double>> weights;  // num_actions x feature_dim
  std::vector<double> bias;                  // num_actions

  int num_actions() const { return static_cast<int>(bias.size()); }
};

struct Stage2Params {
  int feature_dim = 0;
  DecisionBlock root;                     // actions: roots in order, then No Risk last
  std::map<NodeId, DecisionBlock> nodes;  // one block per internal node (levels 1..L-1)
};

inline DecisionBlock zero_block(int num_actions, int feature_dim) {
  DecisionBlock b;
  b.weights.assign(num_actions, std::vector<double>(feature_dim, 0.0));
  b.bias.assign(num_actions, 0.0);
  return b;
}

/// Zero-initialized parameters covering the taxonomy's decision structure.
inline Stage2Params init_stage2(const Taxonomy& t, int feature_dim) {
  Stage2Params p;
  p.feature_dim = feature_dim;
  p.root = zero_block(static_cast<int>(t.roots.size()) + 1, feature_dim);
  for (const auto& n : t.nodes)
    if (!n.children.empty())
      p.nodes[n.id] = zero_block(static_cast<int>(n.children.size()), feature_dim);
  return p;
}

inline Stage2Params zeros_like(const Stage2Params& p) {
  Stage2Params z;
  z.feature_dim = p.feature_dim;
  z.root = zero_block(p.root.num_actions(), p.feature_dim);
  for (const auto& [id, block] : p.nodes)
    z.nodes[id] = zero_block(block.num_actions(), p.feature_dim);
  return z;
}

/// Decision-point keys and shapes must exactly cover the taxonomy's internal
/// structure; returns violations, empty when the params fit the tree.
inline std::vector<std::string> stage2_shape_violations(const Taxonomy& t,
                                                        const Stage2Params& p) {
  std::vector<std::string> out;
  if (p.feature_dim <= 0) out.push_back("feature_dim must be positive");
  auto check_block = [&](const DecisionBlock& b, int want_actions, const std::string& where) {
    if (b.num_actions() != want_actions)
      out.push_back(where + ": expected " + std::to_string(want_actions) + " actions, got " +
                    std::to_string(b.num_actions()));
    if (static_cast<int>(b.weights.size()) != b.num_actions())
      out.push_back(where + ": weight rows do not match action count");
    for (const auto& row : b.weights)
      if (static_cast<int>(row.size()) != p.feature_dim) {
        out.push_back(where + ": weight row width does not match feature_dim");
        break;
      }
  };
  check_block(p.root, static_cast<int>(t.roots.size()) + 1, "root");
  std::size_t internal = 0;
  for (const auto& n : t.nodes)
    if (!n.children.empty()) {
      ++internal;
      auto it = p.nodes.find(n.id);
      if (it == p.nodes.end()) {
        out.push_back("missing decision block for node '" + n.id + "'");
        continue;
      }
      check_block(it->second, static_cast<int>(n.children.size()), "node '" + n.id + "'");
    }
  if (p.nodes.size() != internal)
    out.push_back("parameter blocks (" + std::to_string(p.nodes.size()) +
                  ") do not match internal node count (" + std::to_string(internal) + ")");
  return out;
}

inline std::vector<double> block_logits(const DecisionBlock& b, const FeatureVector& x) {
  std::vector<double> out(b.bias.size());
  for (std::size_t a = 0; a < b.bias.size(); ++a) out[a] = dot(b.weights[a], x) + b.bias[a];
  return out;
}

/// Numerically stable log-softmax.
inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  auto ls = log_softmax(logits);
  for (double& v : ls) v = std::exp(v);
  return ls;
}

namespace detail {

inline int root_action_index(const Taxonomy& t, const NodeId& id) {
  auto it = std::find(t.roots.begin(), t.roots.end(), id);
  if (it == t.roots.end())
    throw std::invalid_argument("path/taxonomy mismatch: '" + id + "' is not a root");
  return static_cast<int>(it - t.roots.begin());
}

inline int child_action_index(const Taxonomy& t, const NodeId& parent, const NodeId& child) {
  const auto& kids = t.node(parent).children;
  auto it = std::find(kids.begin(), kids.end(), child);
  if (it == kids.end())
    throw std::invalid_argument("path/taxonomy mismatch: '" + child + "' is not a child of '" +
                                parent + "'");
  return static_cast<int>(it - kids.begin());
}

inline const DecisionBlock& node_block(const Stage2Params& p, const NodeId& id) {
  auto it = p.nodes.find(id);
  if (it == p.nodes.end())
    throw std::invalid_argument("no decision block for node '" + id + "'");
  return it->second;
}

}  // namespace detail

/// log pi(path | x): sum of log-softmax terms over the decision points along
/// the path. No Risk is the last root-level action.
inline double stage2_path_logprob(const Taxonomy& t, const Stage2Params& p,
                                  const FeatureVector& x, const CategoryPath& path) {
  if (auto err = check_path(t, path))
    throw std::invalid_argument("stage2_path_logprob: " + *err);
  auto root_lp = log_softmax(block_logits(p.root, x));
  if (path.is_no_risk()) return root_lp.back();
  double lp = root_lp[detail::root_action_index(t, path.ids()[0])];
  for (std::size_t k = 0; k + 1 < path.ids().size(); ++k) {
    const auto& block = detail::node_block(p, path.ids()[k]);
    auto step_lp = log_softmax(block_logits(block, x));
    lp += step_lp[detail::child_action_index(t, path.ids()[k], path.ids()[k + 1])];
  }
  return lp;
}

/// Exact gradient of stage2_path_logprob with respect to every parameter:
/// (onehot(chosen) - softmax) per decision point on the path, outer product
/// with x for the weights; zero elsewhere.
inline Stage2Params stage2_grad_logprob(const Taxonomy& t, const Stage2Params& p,
                                        const FeatureVector& x, const CategoryPath& path) {
  if (auto err = check_path(t, path))
    throw std::invalid_argument("stage2_grad_logprob: " + *err);
  if (static_cast<int>(x.size()) != p.feature_dim)
    throw std::invalid_argument("stage2_grad_logprob: feature dimension mismatch");
  Stage2Params g = zeros_like(p);

  auto add_decision = [&](const DecisionBlock& block, DecisionBlock& grad, int chosen) {
    auto probs = softmax(block_logits(block, x));
    for (int a = 0; a < block.num_actions(); ++a) {
      double coef = (a == chosen ? 1.0 : 0.0) - probs[a];
      grad.bias[a] += coef;
      for (std::size_t i = 0; i < x.size(); ++i) grad.weights[a][i] += coef * x[i];
    }
  };

  if (path.is_no_risk()) {
    add_decision(p.root, g.root, p.root.num_actions() - 1);
    return g;
  }
  add_decision(p.root, g.root, detail::root_action_index(t, path.ids()[0]));
  for (std::size_t k = 0; k + 1 < path.ids().size(); ++k) {
    const NodeId& id = path.ids()[k];
    add_decision(detail::node_block(p, id), g.nodes.at(id),
                 detail::child_action_index(t, id, path.ids()[k + 1]));
  }
  return g;
}

/// Argmax decode; ties break toward the lowest action index (sibling order
/// in the taxonomy file, with No Risk ordered last at the root).
inline CategoryPath greedy_decode(const Taxonomy& t, const Stage2Params& p,
                                  const FeatureVector& x) {
  auto argmax = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    return best;
  };
  std::size_t choice = argmax(block_logits(p.root, x));
  if (choice == t.roots.size()) return CategoryPath::no_risk();
  std::vector<NodeId> ids{t.roots[choice]};
  while (static_cast<int>(ids.size()) < t.depth) {
    const auto& kids = t.node(ids.back()).children;
    const auto& block = detail::node_block(p, ids.back());
    ids.push_back(kids[argmax(block_logits(block, x))]);
  }
  return CategoryPath::risky(std::move(ids));
}

// ---------------------------------------------------------------------------
// Sampling

struct PathSample {
  CategoryPath path;
  double logprob = 0.0;
  Transcript transcript;
};

/// Deterministic think text naming the chosen nodes and their rule snippets,
/// padded to `min_words`. Exists so the format-reward path is exercised end
/// to end; it does not model reasoning quality.
inline std::string compose_think(const Taxonomy& t, const CategoryPath& path, int min_words) {
  std::string think;
  if (path.is_no_risk()) {
    think =
        "None of the category definitions in the taxonomy apply to this note, and the "
        "content matches no listed risk path.";
  } else {
    for (std::size_t k = 0; k < path.ids().size(); ++k) {
      const auto& n = t.node(path.ids()[k]);
      if (k == 0)
        think += "The note falls under " + n.name + ", defined as: " + n.rule;
      else
        think += " Within that, " + n.name + " applies: " + n.rule;
    }
  }
  while (count_words(think) < min_words)
    think += " The sibling definitions at each level were compared and fit less well.";
  // rule text is caller-supplied; keep the framing format intact
  for (const char* tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    std::size_t pos;
    while ((pos = think.find(tag)) != std::string::npos) think.erase(pos, std::string(tag).size());
  }
  return think;
}

inline Transcript make_transcript(const Taxonomy& t, const CategoryPath& path, int min_words) {
  std::string think = compose_think(t, path, min_words);
  std::string answer = serialize_path(t, path);
  return parse_transcript(serialize_transcript(think, answer), min_words);
}

/// G independent ancestral samples (root decision, then child decisions down
/// to a leaf, or stop at No Risk). Deterministic given the seed.
inline std::vector<PathSample> stage2_sample_group(const Taxonomy& t, const Stage2Params& p,
                                                   const FeatureVector& x, int group_size,
                                                   std::uint64_t seed,
                                                   int min_words = kDefaultMinWords) {
  if (group_size < 2)
    throw std::invalid_argument("stage2_sample_group: group size must be at least 2");
  std::vector<PathSample> out;
  out.reserve(group_size);
  Rng rng(seed);

  auto sample_index = [&rng](const std::vector<double>& logprobs) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t a = 0; a < logprobs.size(); ++a) {
      acc += std::exp(logprobs[a]);
      if (u < acc) return a;
    }
    return logprobs.size() - 1;  // guard against rounding at the top end
  };

  for (int i = 0; i < group_size; ++i) {
    PathSample s;
    auto root_lp = log_softmax(block_logits(p.root, x));
    std::size_t choice = sample_index(root_lp);
    s.logprob = root_lp[choice];
    if (choice == t.roots.size()) {
      s.path = CategoryPath::no_risk();
    } else {
      std::vector<NodeId> ids{t.roots[choice]};
      while (static_cast<int>(ids.size()) < t.depth) {
        const auto& block = detail::node_block(p, ids.back());
        auto lp = log_softmax(block_logits(block, x));
        std::size_t next = sample_index(lp);
        s.logprob += lp[next];
        ids.push_back(t.node(ids.back()).children[next]);
      }
      s.path = CategoryPath::risky(std::move(ids));
    }
    s.transcript = make_transcript(t, s.path, min_words);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints (bit-exact round trip; doubles keep full precision)

namespace detail {

inline nlohmann::json block_to_json(const DecisionBlock& b) {
  return nlohmann::json{{"weights", b.weights}, {"bias", b.bias}};
}

inline DecisionBlock block_from_json(const nlohmann::json& j) {
  DecisionBlock b;
  b.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  b.bias = j.at("bias").get<std::vector<double>>();
  return b;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace detail

inline void save_stage1(const Stage1Params& p, const std::string& path) {
  nlohmann::json j{{"kind", "stage1"},
                   {"feature_dim", p.weights.size()},
                   {"weights", p.weights},
                   {"bias", p.bias}};
  detail::write_json_file(j, path);
}

inline Stage1Params load_stage1(const std::string& path) {
  auto j = detail::read_json_file(path);
  if (j.value("kind", "") != "stage1")
    throw std::runtime_error("'" + path + "' is not a stage-1 checkpoint");
  Stage1Params p;
  p.weights = j.at("weights").get<std::vector<double>>();
  p.bias = j.at("bias").get<double>();
  return p;
}

inline void save_stage2(const Stage2Params& p, const std::string& path) {
  nlohmann::json nodes = nlohmann::json::object();
  for (const auto& [id, block] : p.nodes) nodes[id] = detail::block_to_json(block);
  nlohmann::json j{{"kind", "stage2"},
                   {"feature_dim", p.feature_dim},
                   {"root", detail::block_to_json(p.root)},
                   {"nodes", std::move(nodes)}};
  detail::write_json_file(j, path);
}

inline Stage2Params load_stage2(const std::string& path) {
  auto j = detail::read_json_file(path);
  if (j.value("kind", "") != "stage2")
    throw std::runtime_error("'" + path + "' is not a stage-2 checkpoint");
  Stage2Params p;
  p.feature_dim = j.at("feature_dim").get<int>();
  p.root = detail::block_from_json(j.at("root"));
  for (const auto& [id, jb] : j.at("nodes").items()) p.nodes[id] = detail::block_from_json(jb);
  return p;
}

}  // namespace riskpath

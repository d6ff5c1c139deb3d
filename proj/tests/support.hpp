#pragma once

// SPDX-License-Identifier: Apache-2.0

// Shared fixtures and independent oracles for the test suite. Oracles here
// deliberately avoid the library's computation paths: path enumeration walks
// the tree directly, probabilities come from brute-force sums, and gradients
// from central finite differences implemented locally.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "riskpath/riskpath.hpp"

namespace testsupport {

using namespace riskpath;

/// Single root, single child per level: exactly one leaf path.
inline Taxonomy chain_taxonomy(int depth) {
  Taxonomy t;
  t.depth = depth;
  for (int l = 1; l <= depth; ++l) {
    TaxonomyNode n;
    n.id = "c" + std::to_string(l);
    n.name = "Link " + std::to_string(l);
    n.level = l;
    n.rule = "Chain rule " + std::to_string(l);
    if (l > 1) n.parent = "c" + std::to_string(l - 1);
    t.nodes.push_back(n);
  }
  t.reindex();
  return t;
}

/// Uniform tree: `roots` level-1 nodes, each internal node with `branch`
/// children, uniform depth.
inline Taxonomy uniform_taxonomy(int depth, int roots, int branch) {
  Taxonomy t;
  t.depth = depth;
  struct Pending {
    std::string id;
    int level;
  };
  std::vector<Pending> frontier;
  for (int r = 0; r < roots; ++r) {
    std::string id = "n" + std::to_string(r + 1);
    t.nodes.push_back({id, "Cat " + id, 1, "Rule for " + id, std::nullopt, {}});
    frontier.push_back({id, 1});
  }
  while (!frontier.empty()) {
    std::vector<Pending> next;
    for (const auto& p : frontier) {
      if (p.level == depth) continue;
      for (int c = 0; c < branch; ++c) {
        std::string id = p.id + "." + std::to_string(c + 1);
        t.nodes.push_back({id, "Cat " + id, p.level + 1, "Rule for " + id, p.id, {}});
        next.push_back({id, p.level + 1});
      }
    }
    frontier = std::move(next);
  }
  t.reindex();
  return t;
}

/// Brute-force enumeration of every root-to-leaf path, walking the tree
/// directly (independent of Taxonomy::leaves / chain_to).
inline std::vector<CategoryPath> enumerate_paths(const Taxonomy& t) {
  std::vector<CategoryPath> out;
  std::vector<NodeId> stack;
  auto walk = [&](auto&& self, const NodeId& id) -> void {
    stack.push_back(id);
    const auto& n = t.node(id);
    if (n.children.empty()) {
      out.push_back(CategoryPath::risky(stack));
    } else {
      for (const auto& c : n.children) self(self, c);
    }
    stack.pop_back();
  };
  for (const auto& r : t.roots) walk(walk, r);
  return out;
}

/// Central finite difference of stage2_path_logprob for a single entry,
/// independent of the library's gradcheck. `entry` must point into `params`.
inline double fd_logprob(const Taxonomy& t, Stage2Params& params, const FeatureVector& x,
                         const CategoryPath& path, double* entry, double h) {
  const double saved = *entry;
  *entry = saved + h;
  double up = stage2_path_logprob(t, params, x, path);
  *entry = saved - h;
  double down = stage2_path_logprob(t, params, x, path);
  *entry = saved;
  return (up - down) / (2.0 * h);
}

/// Randomized Stage2Params over a taxonomy.
inline Stage2Params random_stage2(const Taxonomy& t, int dim, Rng& rng, double scale = 1.0) {
  Stage2Params p = init_stage2(t, dim);
  auto fill = [&](DecisionBlock& b) {
    for (auto& row : b.weights)
      for (auto& v : row) v = scale * rng.normal();
    for (auto& v : b.bias) v = scale * rng.normal();
  };
  fill(p.root);
  for (auto& [id, b] : p.nodes) fill(b);
  return p;
}

inline FeatureVector random_features(int dim, Rng& rng, double scale = 1.0) {
  FeatureVector x(dim);
  for (auto& v : x) v = scale * rng.normal();
  return x;
}

/// Warm-start parameters from class-centroid estimates: per decision point,
/// logit_a(x) = (m_a . x - |m_a|^2/2) / temp where m_a is the mean feature of
/// the first `fraction` of training notes routed through action a. The
/// desk-scale analog of starting policy training from an already-competent
/// supervised model rather than from random behavior.
inline Stage2Params prototype_init(const Taxonomy& t, const Corpus& train, double temp,
                                   double fraction = 1.0) {
  const int dim = static_cast<int>(train.notes.front().features.size());
  std::map<NodeId, FeatureVector> sum;
  std::map<NodeId, int> count;
  FeatureVector safe_sum(dim, 0.0);
  int safe_count = 0;
  const std::size_t limit = static_cast<std::size_t>(train.size() * fraction);
  for (std::size_t k = 0; k < limit; ++k) {
    const auto& n = train.notes[k];
    if (n.truth.is_no_risk()) {
      for (int i = 0; i < dim; ++i) safe_sum[i] += n.features[i];
      ++safe_count;
      continue;
    }
    for (const auto& id : n.truth.ids()) {
      auto& s = sum[id];
      if (s.empty()) s.assign(dim, 0.0);
      for (int i = 0; i < dim; ++i) s[i] += n.features[i];
      count[id]++;
    }
  }
  auto mean_of = [&](const NodeId& id) {
    FeatureVector m(dim, 0.0);
    auto it = sum.find(id);
    if (it == sum.end()) return m;
    for (int i = 0; i < dim; ++i) m[i] = it->second[i] / count[id];
    return m;
  };
  auto fill = [&](DecisionBlock& b, int a, const FeatureVector& m) {
    double sq = 0.0;
    for (double v : m) sq += v * v;
    for (int i = 0; i < dim; ++i) b.weights[a][i] = m[i] / temp;
    b.bias[a] = -sq / (2.0 * temp);
  };
  Stage2Params p = init_stage2(t, dim);
  for (std::size_t a = 0; a < t.roots.size(); ++a)
    fill(p.root, static_cast<int>(a), mean_of(t.roots[a]));
  FeatureVector safe_mean(dim, 0.0);
  for (int i = 0; i < dim; ++i) safe_mean[i] = safe_count ? safe_sum[i] / safe_count : 0.0;
  fill(p.root, static_cast<int>(t.roots.size()), safe_mean);
  for (const auto& n : t.nodes)
    if (!n.children.empty())
      for (std::size_t a = 0; a < n.children.size(); ++a)
        fill(p.nodes.at(n.id), static_cast<int>(a), mean_of(n.children[a]));
  return p;
}

/// Scratch directory for file round-trip tests.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("riskpath-tests-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace testsupport

#pragma once

// SPDX-License-Identifier: Apache-2.0

// Synthetic labeled note corpora. Features are drawn from a Gaussian mixture
// whose centroids follow the taxonomy: each node offsets its parent's
// centroid by a vector whose scale halves per level, so sibling leaves sit
// close together and sibling confusion is the dominant hard case. Safe notes
// come from a separate cloud. Split sizes and risky quotas are exact counts,
// and generation is fully determined by the seed.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/policy.hpp"
#include "riskpath/rng.hpp"
#include "riskpath/taxonomy.hpp"

namespace riskpath {

struct Note {
  std::string id;
  std::string title;
  std::string content;
  FeatureVector features;
  CategoryPath truth;
};

struct Corpus {
  std::vector<Note> notes;

  std::size_t size() const { return notes.size(); }
  bool empty() const { return notes.empty(); }
};

struct CorpusSpec {
  int n_train = 2000;
  int n_eval = 500;
  double risky_ratio = 0.2;       // train split
  double eval_risky_ratio = -1.0; // both eval splits; negative means "same as train"
  int feature_dim = 16;
  double class_separation = 12.0;  // level-1 centroid offset scale; halves per level
  double label_noise = 0.05;       // fraction of risky truths resampled among sibling leaves
  std::vector<NodeId> held_out_leaves;
  std::uint64_t seed = 0;

  double resolved_eval_ratio() const { return eval_risky_ratio < 0 ? risky_ratio : eval_risky_ratio; }
};

struct CorpusBundle {
  Corpus train;
  Corpus base_eval;  // seen leaves only
  Corpus gen_eval;   // held-out leaves only (plus safe notes)
};

namespace detail {

/// Centroid per node: parent centroid plus a level-scaled Gaussian offset.
/// The safe cloud gets its own root-scale centroid.
struct CentroidMap {
  std::map<NodeId, FeatureVector> by_node;
  FeatureVector safe;
};

inline FeatureVector offset_vector(Rng& rng, int dim, double scale) {
  FeatureVector v(dim);
  double per_coord = scale / std::sqrt(static_cast<double>(dim));
  for (auto& c : v) c = per_coord * rng.normal();
  return v;
}

inline CentroidMap build_centroids(const Taxonomy& t, const CorpusSpec& spec) {
  CentroidMap m;
  Rng rng(derive_seed(spec.seed, "centroids"));
  m.safe = offset_vector(rng, spec.feature_dim, spec.class_separation);
  for (const auto& n : t.nodes) {  // document order: parents precede children
    double scale = spec.class_separation / std::pow(2.0, n.level - 1);
    FeatureVector c = offset_vector(rng, spec.feature_dim, scale);
    if (n.parent) {
      const auto& pc = m.by_node.at(*n.parent);
      for (int i = 0; i < spec.feature_dim; ++i) c[i] += pc[i];
    }
    m.by_node[n.id] = std::move(c);
  }
  return m;
}

inline FeatureVector sample_point(Rng& rng, const FeatureVector& centroid) {
  FeatureVector x = centroid;
  for (auto& c : x) c += rng.normal();  // unit observation noise
  return x;
}

}  // namespace detail

inline int exact_risky_count(int n, double ratio) {
  return static_cast<int>(std::llround(ratio * n));
}

/// Generates train / base-eval / generalization-eval splits. Held-out leaves
/// never appear in train or base_eval truths; gen_eval risky truths use only
/// held-out leaves (empty corpus when none are configured).
inline CorpusBundle generate_corpus(const Taxonomy& t, const CorpusSpec& spec) {
  if (spec.n_train <= 0 || spec.n_eval <= 0)
    throw std::invalid_argument("corpus: split sizes must be positive");
  if (spec.risky_ratio <= 0.0 || spec.risky_ratio >= 1.0)
    throw std::invalid_argument("corpus: risky_ratio must lie in (0,1)");
  if (spec.resolved_eval_ratio() <= 0.0 || spec.resolved_eval_ratio() >= 1.0)
    throw std::invalid_argument("corpus: eval_risky_ratio must lie in (0,1)");
  if (spec.feature_dim <= 0) throw std::invalid_argument("corpus: feature_dim must be positive");
  if (spec.label_noise < 0.0 || spec.label_noise >= 1.0)
    throw std::invalid_argument("corpus: label_noise must lie in [0,1)");

  std::set<NodeId> held(spec.held_out_leaves.begin(), spec.held_out_leaves.end());
  auto all_leaves = t.leaves();
  std::set<NodeId> leaf_set(all_leaves.begin(), all_leaves.end());
  for (const auto& id : held)
    if (!leaf_set.count(id))
      throw std::invalid_argument("corpus: held-out id '" + id + "' is not a leaf");

  std::vector<NodeId> seen_pool, held_pool;
  for (const auto& id : all_leaves)
    (held.count(id) ? held_pool : seen_pool).push_back(id);

  // a leaf parent whose children are all held out leaves no trainable
  // behavior under that subtype
  for (const auto& n : t.nodes) {
    if (n.children.empty() || n.level != t.depth - 1) continue;
    bool any_seen = false;
    for (const auto& c : n.children)
      if (!held.count(c)) any_seen = true;
    if (!any_seen)
      throw std::invalid_argument("corpus: held-out set empties subtree under '" + n.id + "'");
  }

  auto centroids = detail::build_centroids(t, spec);

  auto make_split = [&](const std::string& name, int n, double ratio,
                        const std::vector<NodeId>& pool, bool apply_noise) {
    Corpus corpus;
    if (n == 0) return corpus;
    Rng rng(derive_seed(spec.seed, "split:" + name));
    // label noise draws from its own stream so features are invariant in
    // the noise setting
    Rng noise_rng(derive_seed(spec.seed, "noise:" + name));
    int n_risky = exact_risky_count(n, ratio);

    struct Draft {
      FeatureVector features;
      CategoryPath truth;
    };
    std::vector<Draft> drafts;
    drafts.reserve(n);
    for (int i = 0; i < n_risky; ++i) {
      const NodeId& leaf = pool[rng.index(pool.size())];
      Draft d;
      d.features = detail::sample_point(rng, centroids.by_node.at(leaf));
      NodeId label_leaf = leaf;
      if (apply_noise && spec.label_noise > 0.0 && noise_rng.uniform() < spec.label_noise) {
        // resample only among siblings this split may label with, so held-out
        // leaves never leak into train truths
        std::vector<NodeId> sibs;
        for (const auto& s : siblings(t, leaf))
          if (!held.count(s)) sibs.push_back(s);
        if (!sibs.empty()) label_leaf = sibs[noise_rng.index(sibs.size())];
      }
      d.truth = CategoryPath::risky(t.chain_to(label_leaf));
      drafts.push_back(std::move(d));
    }
    for (int i = n_risky; i < n; ++i) {
      Draft d;
      d.features = detail::sample_point(rng, centroids.safe);
      d.truth = CategoryPath::no_risk();
      drafts.push_back(std::move(d));
    }
    rng.shuffle(drafts);

    for (int i = 0; i < n; ++i) {
      Note note;
      std::ostringstream id;
      id << name << "-" << std::setw(5) << std::setfill('0') << i;
      note.id = id.str();
      note.truth = std::move(drafts[i].truth);
      note.features = std::move(drafts[i].features);
      if (note.truth.is_no_risk()) {
        note.title = "Everyday note " + std::to_string(i);
        note.content = "Auto-generated benign note with no policy-relevant content.";
      } else {
        const auto& leaf = t.node(note.truth.leaf());
        note.title = "Flagged note " + std::to_string(i);
        note.content = "Auto-generated note resembling content filed under " + leaf.name + ".";
      }
      corpus.notes.push_back(std::move(note));
    }
    return corpus;
  };

  CorpusBundle bundle;
  bundle.train = make_split("train", spec.n_train, spec.risky_ratio, seen_pool, true);
  bundle.base_eval =
      make_split("base-eval", spec.n_eval, spec.resolved_eval_ratio(), seen_pool, false);
  if (!held_pool.empty())
    bundle.gen_eval =
        make_split("gen-eval", spec.n_eval, spec.resolved_eval_ratio(), held_pool, false);
  return bundle;
}

// ---------------------------------------------------------------------------
// Note files: line-delimited JSON records

inline nlohmann::json note_to_json(const Taxonomy& t, const Note& n) {
  return nlohmann::json{{"id", n.id},
                        {"title", n.title},
                        {"content", n.content},
                        {"features", n.features},
                        {"truth", serialize_path(t, n.truth)}};
}

inline Note note_from_json(const Taxonomy& t, const nlohmann::json& j) {
  Note n;
  n.id = j.at("id").get<std::string>();
  n.title = j.value("title", std::string{});
  n.content = j.value("content", std::string{});
  n.features = j.at("features").get<FeatureVector>();
  auto parsed = parse_path(t, j.at("truth").get<std::string>());
  if (!parsed.ok())
    throw std::runtime_error("note '" + n.id + "': bad truth path: " + parsed.message);
  n.truth = parsed.path;
  return n;
}

inline void write_corpus(const Corpus& corpus, const Taxonomy& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("corpus: cannot open '" + path + "' for writing");
  for (const auto& n : corpus.notes) out << note_to_json(t, n).dump() << "\n";
}

inline Corpus read_corpus(const Taxonomy& t, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("corpus: cannot open '" + path + "'");
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corpus: line " + std::to_string(lineno) + ": " + e.what());
    }
    Note n = note_from_json(t, j);
    if (corpus.notes.empty())
      dim = n.features.size();
    else if (n.features.size() != dim)
      throw std::runtime_error("corpus: line " + std::to_string(lineno) +
                               ": feature dimension differs from earlier records");
    corpus.notes.push_back(std::move(n));
  }
  return corpus;
}

}  // namespace riskpath

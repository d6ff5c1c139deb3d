#pragma once

// SPDX-License-Identifier: Apache-2.0

// Evaluation metrics over prediction records: exact-match overall accuracy,
// macro precision/recall over risky leaf classes, per-level prefix accuracy,
// and sibling-confusion diagnostics. "Correct" always means the full path
// matches (or both sides are No Risk), so metrics and reward agree on it.

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/pipeline.hpp"
#include "riskpath/taxonomy.hpp"

namespace riskpath {

inline double overall_accuracy(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw std::invalid_argument("overall_accuracy: no records");
  std::size_t hit = 0;
  for (const auto& r : records)
    if (r.final == r.truth) ++hit;
  return static_cast<double>(hit) / static_cast<double>(records.size());
}

struct ClassStats {
  NodeId leaf;
  std::string path_string;
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_undefined = false;  // no predictions for the class
  bool recall_undefined = false;     // no truths for the class
};

/// Per-class confusion counts for every risky leaf present in truths or
/// predictions, ordered by taxonomy leaf order. Zero-denominator rates
/// contribute 0 and carry a flag.
inline std::vector<ClassStats> per_class_stats(const std::vector<PredictionRecord>& records,
                                               const Taxonomy& t) {
  std::map<NodeId, ClassStats> by_leaf;
  auto touch = [&](const NodeId& leaf) -> ClassStats& {
    auto [it, inserted] = by_leaf.try_emplace(leaf);
    if (inserted) {
      it->second.leaf = leaf;
      it->second.path_string = serialize_path(t, CategoryPath::risky(t.chain_to(leaf)));
    }
    return it->second;
  };
  for (const auto& r : records) {
    const bool correct = r.final == r.truth;
    if (!r.truth.is_no_risk()) {
      auto& c = touch(r.truth.leaf());
      correct ? void(++c.tp) : void(++c.fn);
    }
    if (!r.final.is_no_risk() && !correct) ++touch(r.final.leaf()).fp;
  }
  std::vector<ClassStats> out;
  for (const auto& leaf : t.leaves()) {
    auto it = by_leaf.find(leaf);
    if (it == by_leaf.end()) continue;
    auto& c = it->second;
    c.precision_undefined = c.tp + c.fp == 0;
    c.recall_undefined = c.tp + c.fn == 0;
    c.precision = c.precision_undefined ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
    c.recall = c.recall_undefined ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
    out.push_back(c);
  }
  return out;
}

/// Macro-averaged precision and recall over risky leaf classes.
inline std::pair<double, double> risky_macro_prf(const std::vector<PredictionRecord>& records,
                                                 const Taxonomy& t) {
  if (records.empty()) throw std::invalid_argument("risky_macro_prf: no records");
  auto per_class = per_class_stats(records, t);
  if (per_class.empty()) return {0.0, 0.0};
  double p = 0.0, r = 0.0;
  for (const auto& c : per_class) {
    p += c.precision;
    r += c.recall;
  }
  const double n = static_cast<double>(per_class.size());
  return {p / n, r / n};
}

/// Level-l accuracy over risky-truth records: the fraction whose prediction
/// is risky and matches the truth on levels 1..l. No Risk predictions count
/// as wrong at every level. Non-increasing in l by construction.
inline std::vector<double> per_level_accuracy(const std::vector<PredictionRecord>& records,
                                              const Taxonomy& t) {
  std::size_t risky = 0;
  std::vector<std::size_t> hits(static_cast<std::size_t>(t.depth), 0);
  for (const auto& r : records) {
    if (r.truth.is_no_risk()) continue;
    ++risky;
    if (r.final.is_no_risk()) continue;
    for (int l = 0; l < t.depth; ++l) {
      if (r.final.ids()[l] != r.truth.ids()[l]) break;
      ++hits[l];
    }
  }
  if (risky == 0) throw std::invalid_argument("per_level_accuracy: no risky truths");
  std::vector<double> out(hits.size());
  for (std::size_t l = 0; l < hits.size(); ++l)
    out[l] = static_cast<double>(hits[l]) / static_cast<double>(risky);
  return out;
}

namespace detail {

/// First level (1-based) where prediction and truth diverge, and whether the
/// predicted node there is a sibling of the true node. Both paths risky and
/// unequal.
inline std::pair<int, bool> first_divergence(const Taxonomy& t, const CategoryPath& pred,
                                             const CategoryPath& truth) {
  for (int l = 0; l < t.depth; ++l) {
    if (pred.ids()[l] == truth.ids()[l]) continue;
    auto sibs = siblings(t, truth.ids()[l]);
    bool is_sib = std::find(sibs.begin(), sibs.end(), pred.ids()[l]) != sibs.end();
    return {l + 1, is_sib};
  }
  return {0, false};  // unreachable for unequal paths
}

}  // namespace detail

/// Among erroneous risky-vs-risky records, the fraction whose first
/// divergence lands on a sibling of the true node. Absent when no record
/// qualifies. (Structurally consistent predictions always diverge to a
/// sibling, so this is 1.0 for pipeline output; it is a data audit.)
inline std::optional<double> sibling_confusion_rate(const std::vector<PredictionRecord>& records,
                                                    const Taxonomy& t) {
  std::size_t qualifying = 0, sibling = 0;
  for (const auto& r : records) {
    if (r.truth.is_no_risk() || r.final.is_no_risk() || r.final == r.truth) continue;
    ++qualifying;
    if (detail::first_divergence(t, r.final, r.truth).second) ++sibling;
  }
  if (qualifying == 0) return std::nullopt;
  return static_cast<double>(sibling) / static_cast<double>(qualifying);
}

/// Fraction of risky-truth records whose prediction first diverges at
/// `level` onto a sibling of the true node. level = depth isolates the
/// deep near-misses the soft-margin reward targets.
inline double sibling_error_rate_at_level(const std::vector<PredictionRecord>& records,
                                          const Taxonomy& t, int level) {
  if (level < 1 || level > t.depth)
    throw std::invalid_argument("sibling_error_rate_at_level: level out of range");
  std::size_t risky = 0, hits = 0;
  for (const auto& r : records) {
    if (r.truth.is_no_risk()) continue;
    ++risky;
    if (r.final.is_no_risk() || r.final == r.truth) continue;
    auto [div_level, is_sib] = detail::first_divergence(t, r.final, r.truth);
    if (div_level == level && is_sib) ++hits;
  }
  if (risky == 0) throw std::invalid_argument("sibling_error_rate_at_level: no risky truths");
  return static_cast<double>(hits) / static_cast<double>(risky);
}

struct MetricReport {
  std::size_t record_count = 0;
  double overall_accuracy = 0.0;
  double risky_macro_precision = 0.0;
  double risky_macro_recall = 0.0;
  std::vector<double> per_level_accuracy;  // empty when no risky truths
  std::optional<double> sibling_confusion_rate;
  std::optional<double> deep_sibling_error_rate;  // sibling divergence at level L
  std::vector<ClassStats> per_class;
};

inline MetricReport compute_metrics(const std::vector<PredictionRecord>& records,
                                    const Taxonomy& t) {
  if (records.empty()) throw std::invalid_argument("compute_metrics: no records");
  MetricReport rep;
  rep.record_count = records.size();
  rep.overall_accuracy = overall_accuracy(records);
  auto [p, r] = risky_macro_prf(records, t);
  rep.risky_macro_precision = p;
  rep.risky_macro_recall = r;
  bool any_risky = false;
  for (const auto& rec : records) any_risky |= !rec.truth.is_no_risk();
  if (any_risky) {
    rep.per_level_accuracy = per_level_accuracy(records, t);
    rep.deep_sibling_error_rate = sibling_error_rate_at_level(records, t, t.depth);
  }
  rep.sibling_confusion_rate = sibling_confusion_rate(records, t);
  rep.per_class = per_class_stats(records, t);
  return rep;
}

}  // namespace riskpath

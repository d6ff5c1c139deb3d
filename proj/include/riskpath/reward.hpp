#pragma once

// SPDX-License-Identifier: Apache-2.0

// Path-aware soft-margin reward. Per level, a correct node earns +1, a
// sibling of the true node costs -sibling_base^(l-1) (so deep near-misses
// hurt exponentially more), anything else scores 0; the accuracy reward is
// the per-level mean. Safe/risky confusions take a flat penalty pinned to
// the most severe accuracy value, format compliance adds a binary bonus,
// and unparseable answers zero both components.

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/taxonomy.hpp"
#include "riskpath/transcript.hpp"

namespace riskpath {

struct RewardConfig {
  double level_correct = 1.0;
  double sibling_base = 2.0;          // sibling error at level l costs -sibling_base^(l-1)
  double safe_risky_penalty = -1.25;  // flat accuracy reward for safe/risky confusion
  double format_bonus = 1.0;
};

inline double sibling_penalty(const RewardConfig& cfg, int level) {
  return -std::pow(cfg.sibling_base, level - 1);
}

/// Config sanity for a given depth: sibling_base must exceed 1 and the
/// safe/risky penalty must be at least as severe as every in-tree accuracy
/// value (divergence at level l scores ((l-1)*level_correct - base^(l-1))/L).
inline std::vector<std::string> validate_reward_config(const RewardConfig& cfg, int depth) {
  std::vector<std::string> out;
  if (cfg.sibling_base <= 1.0)
    out.push_back("sibling_base must be > 1 so penalties grow with depth");
  double worst = cfg.level_correct;
  for (int l = 1; l <= depth; ++l) {
    double r = ((l - 1) * cfg.level_correct + sibling_penalty(cfg, l)) / depth;
    worst = std::min(worst, r);
  }
  if (cfg.safe_risky_penalty > worst) {
    std::ostringstream msg;
    msg << "safe_risky_penalty " << cfg.safe_risky_penalty
        << " is milder than the worst in-tree accuracy reward " << worst;
    out.push_back(msg.str());
  }
  return out;
}

struct RewardBreakdown {
  std::vector<double> per_level;  // populated only when levels were scored
  double r_acc = 0.0;
  double r_format = 0.0;
  double r_final = 0.0;
};

/// A prediction is either a parsed CategoryPath or invalid (unparseable /
/// absent answer text).
using Prediction = std::optional<CategoryPath>;

namespace detail {
inline void require_valid(const Taxonomy& t, const CategoryPath& p, const char* what) {
  if (auto err = check_path(t, p))
    throw std::invalid_argument(std::string("accuracy_reward: ") + what + ": " + *err);
}
}  // namespace detail

/// Accuracy component only (format fields left zero). Cases: invalid
/// prediction scores 0 at every level; a safe/risky confusion takes the flat
/// penalty; matching No Risk earns full credit; two risky paths are scored
/// level by level against the sibling rule.
inline RewardBreakdown accuracy_reward(const Taxonomy& t, const Prediction& pred,
                                       const CategoryPath& truth,
                                       const RewardConfig& cfg = {}) {
  detail::require_valid(t, truth, "truth");
  RewardBreakdown b;
  if (!pred) {
    b.per_level.assign(static_cast<std::size_t>(t.depth), 0.0);
    b.r_acc = 0.0;
    b.r_final = b.r_acc;
    return b;
  }
  detail::require_valid(t, *pred, "pred");

  if (pred->is_no_risk() != truth.is_no_risk()) {
    b.r_acc = cfg.safe_risky_penalty;
    b.r_final = b.r_acc;
    return b;
  }
  if (truth.is_no_risk()) {
    b.r_acc = cfg.level_correct;  // full credit, symmetric with a perfect path
    b.r_final = b.r_acc;
    return b;
  }

  double sum = 0.0;
  for (int l = 1; l <= t.depth; ++l) {
    const NodeId& got = pred->ids()[l - 1];
    const NodeId& want = truth.ids()[l - 1];
    double r = 0.0;
    if (got == want) {
      r = cfg.level_correct;
    } else {
      auto sibs = siblings(t, want);
      if (std::find(sibs.begin(), sibs.end(), got) != sibs.end()) r = sibling_penalty(cfg, l);
    }
    b.per_level.push_back(r);
    sum += r;
  }
  b.r_acc = sum / t.depth;
  b.r_final = b.r_acc;
  return b;
}

inline double format_reward(const Transcript& tr, const RewardConfig& cfg = {}) {
  return tr.format_ok ? cfg.format_bonus : 0.0;
}

/// Exact-match 0/1 reward (the hard-reward ablation baseline).
inline double hard_accuracy_reward(const Prediction& pred, const CategoryPath& truth) {
  return (pred && *pred == truth) ? 1.0 : 0.0;
}

enum class RewardMode { soft_margin, hard };

inline RewardMode reward_mode_from_string(std::string_view s) {
  if (s == "soft_margin") return RewardMode::soft_margin;
  if (s == "hard") return RewardMode::hard;
  throw std::invalid_argument("unknown reward mode '" + std::string(s) + "'");
}

inline const char* to_string(RewardMode m) {
  return m == RewardMode::soft_margin ? "soft_margin" : "hard";
}

/// Full reward for a transcript: parses the answer (unparseable or absent
/// answers count as invalid, which also forfeits the format bonus) and adds
/// the format component. `mode` switches the accuracy term between the
/// soft-margin scheme and the plain exact-match baseline.
inline RewardBreakdown score_transcript(const Taxonomy& t, const Transcript& tr,
                                        const CategoryPath& truth, const RewardConfig& cfg = {},
                                        RewardMode mode = RewardMode::soft_margin) {
  Prediction pred;
  if (tr.answer_raw) {
    auto parsed = parse_path(t, *tr.answer_raw);
    if (parsed.ok()) pred = parsed.path;
  }
  RewardBreakdown b;
  if (mode == RewardMode::soft_margin) {
    b = accuracy_reward(t, pred, truth, cfg);
  } else {
    detail::require_valid(t, truth, "truth");
    b.r_acc = hard_accuracy_reward(pred, truth);
  }
  b.r_format = pred ? format_reward(tr, cfg) : 0.0;
  b.r_final = b.r_acc + b.r_format;
  return b;
}

inline RewardBreakdown final_reward(const Taxonomy& t, const Transcript& tr,
                                    const CategoryPath& truth, const RewardConfig& cfg = {}) {
  return score_transcript(t, tr, truth, cfg, RewardMode::soft_margin);
}

// ---------------------------------------------------------------------------
// Reward-value space

struct RewardSpaceRow {
  std::string label;
  std::vector<std::string> level_marks;  // "ok" / "sib" / "-" per level; empty for invalid
  bool format_ok = false;
  std::vector<double> per_level;
  double r_acc = 0.0;
  double r_format = 0.0;
  double r_final = 0.0;
  std::string calculation;  // e.g. "(1 + 1 + 1 - 8)/4 + 1"
};

namespace detail {

inline std::string format_number(double v) {
  double r = std::round(v);
  if (std::abs(v - r) < 1e-12) {
    long long i = static_cast<long long>(r);
    return std::to_string(i);
  }
  std::ostringstream out;
  out << v;
  return out.str();
}

inline std::string calc_string(const std::vector<double>& per_level, int depth, double fmt) {
  std::string s = "(";
  for (int i = 0; i < depth; ++i) {
    double v = per_level[i];
    if (i > 0) s += v < 0 ? " - " : " + ";
    else if (v < 0) s += "-";
    s += format_number(std::abs(v));
  }
  s += ")/" + std::to_string(depth) + " + " + format_number(fmt);
  return s;
}

}  // namespace detail

/// Enumerates the reward values reachable by structurally consistent
/// predictions: the perfect case and one sibling divergence per level,
/// each with and without the format bonus, plus the invalid row. 2L+3 rows.
inline std::vector<RewardSpaceRow> reward_space_table(int depth, const RewardConfig& cfg = {}) {
  if (depth < 1) throw std::invalid_argument("reward_space_table: depth must be >= 1");
  std::vector<RewardSpaceRow> rows;

  auto push = [&](const std::string& label, int diverge_level, bool fmt) {
    RewardSpaceRow row;
    row.label = label;
    row.format_ok = fmt;
    double sum = 0.0;
    for (int l = 1; l <= depth; ++l) {
      double v;
      const char* mark;
      if (diverge_level == 0 || l < diverge_level) {
        v = cfg.level_correct;
        mark = "ok";
      } else if (l == diverge_level) {
        v = sibling_penalty(cfg, l);
        mark = "sib";
      } else {
        v = 0.0;  // past the divergence nothing can match or be a sibling
        mark = "-";
      }
      row.per_level.push_back(v);
      row.level_marks.emplace_back(mark);
      sum += v;
    }
    row.r_acc = sum / depth;
    row.r_format = fmt ? cfg.format_bonus : 0.0;
    row.r_final = row.r_acc + row.r_format;
    row.calculation = detail::calc_string(row.per_level, depth, row.r_format);
    rows.push_back(std::move(row));
  };

  for (int pass = 0; pass < 2; ++pass) {
    bool fmt = pass == 0;
    std::string suffix = fmt ? "" : ", think format error";
    push(fmt ? "Perfect prediction" : "Correct prediction" + suffix, 0, fmt);
    for (int l = 1; l <= depth; ++l)
      push("Sibling error at L" + std::to_string(l) + suffix, l, fmt);
  }

  RewardSpaceRow invalid;
  invalid.label = "Invalid prediction";
  invalid.format_ok = false;
  invalid.per_level.assign(static_cast<std::size_t>(depth), 0.0);
  invalid.r_acc = 0.0;
  invalid.r_format = 0.0;
  invalid.r_final = 0.0;
  invalid.calculation = detail::calc_string(invalid.per_level, depth, 0.0);
  rows.push_back(std::move(invalid));
  return rows;
}

inline std::vector<RewardSpaceRow> reward_space_table(const Taxonomy& t,
                                                      const RewardConfig& cfg = {}) {
  return reward_space_table(t.depth, cfg);
}

}  // namespace riskpath

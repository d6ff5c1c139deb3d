#pragma once

// SPDX-License-Identifier: Apache-2.0

// Hierarchical risk taxonomy: a uniform-depth forest of categories, each
// node carrying the platform rule text it enforces. A category label is a
// full root-to-leaf path ("Domain–Topic–Subtype–Behavior"), or the out-of-tree
// "No Risk" sentinel. Taxonomies are immutable after load; all queries are
// pure and safe under concurrent reads.

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "riskpath/util.hpp"

namespace riskpath {

using NodeId = std::string;

inline constexpr int kDefaultDepth = 4;
inline constexpr const char* kNoRiskLabel = "No Risk";
inline constexpr const char* kPathSeparator = "–";  // en dash, canonical

struct TaxonomyNode {
  NodeId id;
  std::string name;
  int level = 0;  // 1..depth
  std::string rule;
  std::optional<NodeId> parent;  // absent only for level-1 nodes
  std::vector<NodeId> children;  // document order
};

struct Taxonomy {
  int depth = kDefaultDepth;
  std::vector<TaxonomyNode> nodes;  // document order
  std::vector<NodeId> roots;        // level-1 ids, document order

  /// Rebuilds the id lookup, roots list and children lists from node order
  /// and parent links. Call after constructing or mutating `nodes`.
  void reindex() {
    index_.clear();
    roots.clear();
    for (auto& n : nodes) n.children.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      // last writer wins on duplicate ids; validate_taxonomy reports them
      index_[nodes[i].id] = i;
    }
    for (const auto& n : nodes) {
      if (!n.parent) {
        roots.push_back(n.id);
        continue;
      }
      auto it = index_.find(*n.parent);
      if (it != index_.end()) nodes[it->second].children.push_back(n.id);
    }
  }

  bool has(const NodeId& id) const { return index_.find(id) != index_.end(); }

  const TaxonomyNode& node(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("taxonomy: unknown node id '" + id + "'");
    return nodes[it->second];
  }

  std::vector<NodeId> leaves() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes)
      if (n.level == depth) out.push_back(n.id);
    return out;
  }

  /// Root-to-leaf id chain ending at `id` (works for internal nodes too).
  std::vector<NodeId> chain_to(const NodeId& id) const {
    std::vector<NodeId> out;
    const TaxonomyNode* cur = &node(id);
    out.push_back(cur->id);
    int guard = depth + 1;
    while (cur->parent && guard-- > 0) {
      cur = &node(*cur->parent);
      out.push_back(cur->id);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::unordered_map<NodeId, std::size_t> index_;
};

/// Either the No-Risk sentinel or a full root-to-leaf node chain.
class CategoryPath {
 public:
  CategoryPath() = default;  // No Risk

  static CategoryPath no_risk() { return CategoryPath(); }

  static CategoryPath risky(std::vector<NodeId> ids) {
    if (ids.empty()) throw std::invalid_argument("CategoryPath::risky: empty id chain");
    CategoryPath p;
    p.ids_ = std::move(ids);
    return p;
  }

  bool is_no_risk() const { return ids_.empty(); }
  const std::vector<NodeId>& ids() const { return ids_; }
  const NodeId& leaf() const {
    if (is_no_risk()) throw std::logic_error("CategoryPath::leaf: path is No Risk");
    return ids_.back();
  }

  bool operator==(const CategoryPath&) const = default;

 private:
  std::vector<NodeId> ids_;
};

/// Structural check of a path against a taxonomy. Returns a violation
/// message, or nullopt when the path is valid.
inline std::optional<std::string> check_path(const Taxonomy& t, const CategoryPath& p) {
  if (p.is_no_risk()) return std::nullopt;
  const auto& ids = p.ids();
  if (static_cast<int>(ids.size()) != t.depth)
    return "path has " + std::to_string(ids.size()) + " segments, taxonomy depth is " +
           std::to_string(t.depth);
  for (const auto& id : ids)
    if (!t.has(id)) return "path references unknown node '" + id + "'";
  if (t.node(ids[0]).level != 1) return "path does not start at a root";
  for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
    const auto& kids = t.node(ids[k]).children;
    if (std::find(kids.begin(), kids.end(), ids[k + 1]) == kids.end())
      return "'" + ids[k + 1] + "' is not a child of '" + ids[k] + "'";
  }
  return std::nullopt;
}

/// Violation report; empty iff all structural invariants hold.
inline std::vector<std::string> validate_taxonomy(const Taxonomy& t) {
  std::vector<std::string> out;
  if (t.depth < 1) out.push_back("depth: must be >= 1, got " + std::to_string(t.depth));

  std::unordered_set<NodeId> seen;
  for (const auto& n : t.nodes) {
    if (!seen.insert(n.id).second) out.push_back("duplicate-id: '" + n.id + "'");
  }

  for (const auto& n : t.nodes) {
    if (n.level < 1 || n.level > t.depth) {
      out.push_back("level-out-of-range: node '" + n.id + "' has level " +
                    std::to_string(n.level));
      continue;
    }
    if (n.level == 1) {
      if (n.parent) out.push_back("root-with-parent: node '" + n.id + "'");
    } else {
      if (!n.parent) {
        out.push_back("missing-parent: node '" + n.id + "' at level " + std::to_string(n.level));
      } else if (!t.has(*n.parent)) {
        out.push_back("unknown-parent: node '" + n.id + "' references '" + *n.parent + "'");
      } else {
        const auto& p = t.node(*n.parent);
        if (p.level != n.level - 1)
          out.push_back("level-mismatch: node '" + n.id + "' (level " + std::to_string(n.level) +
                        ") under '" + p.id + "' (level " + std::to_string(p.level) + ")");
        auto count = std::count(p.children.begin(), p.children.end(), n.id);
        if (count != 1)
          out.push_back("parent-child-mismatch: '" + p.id + "' lists '" + n.id + "' " +
                        std::to_string(count) + " times");
      }
    }
    for (const auto& cid : n.children) {
      if (!t.has(cid)) {
        out.push_back("unknown-child: node '" + n.id + "' lists '" + cid + "'");
      } else {
        const auto& c = t.node(cid);
        if (!c.parent || *c.parent != n.id)
          out.push_back("parent-child-mismatch: '" + cid + "' does not point back to '" + n.id +
                        "'");
      }
    }
    // uniform depth: leaves live at exactly `depth`
    if (n.children.empty() && n.level != t.depth)
      out.push_back("short-leaf: node '" + n.id + "' is a leaf at level " +
                    std::to_string(n.level) + ", expected " + std::to_string(t.depth));
  }

  // sibling name uniqueness (roots form one sibling group)
  auto check_group = [&out](const std::vector<NodeId>& group, const Taxonomy& tt,
                            const std::string& where) {
    std::unordered_map<std::string, int> names;
    for (const auto& id : group)
      if (tt.has(id)) names[tt.node(id).name]++;
    for (const auto& [name, cnt] : names)
      if (cnt > 1)
        out.push_back("duplicate-sibling-name: '" + name + "' appears " + std::to_string(cnt) +
                      " times under " + where);
  };
  check_group(t.roots, t, "<roots>");
  for (const auto& n : t.nodes)
    if (!n.children.empty()) check_group(n.children, t, "'" + n.id + "'");

  // every node must reach a root in at most depth-1 parent steps (no cycles)
  for (const auto& n : t.nodes) {
    const TaxonomyNode* cur = &n;
    int steps = 0;
    while (cur->parent && steps <= t.depth) {
      if (!t.has(*cur->parent)) break;  // reported above
      cur = &t.node(*cur->parent);
      ++steps;
    }
    if (cur->parent && t.has(*cur->parent))
      out.push_back("cycle-or-overlong-chain: node '" + n.id + "'");
  }
  return out;
}

/// Children of the node's parent excluding the node itself; for level-1
/// nodes the sibling group is the root set.
inline std::vector<NodeId> siblings(const Taxonomy& t, const NodeId& id) {
  const auto& n = t.node(id);  // throws on unknown id
  const std::vector<NodeId>& group = n.parent ? t.node(*n.parent).children : t.roots;
  std::vector<NodeId> out;
  out.reserve(group.size() > 0 ? group.size() - 1 : 0);
  for (const auto& s : group)
    if (s != id) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Loading

/// Builds a Taxonomy from the JSON schema
///   { "depth": L, "nodes": [ { "id", "name", "level", "rule", "parent" } ] }
/// Children are derived from parent links; array order defines sibling order.
/// Throws on malformed documents and on structural violations.
inline Taxonomy load_taxonomy(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("depth") || !doc.contains("nodes"))
    throw std::runtime_error("taxonomy: document must carry 'depth' and 'nodes'");
  Taxonomy t;
  t.depth = doc.at("depth").get<int>();
  if (!doc.at("nodes").is_array()) throw std::runtime_error("taxonomy: 'nodes' must be an array");
  for (const auto& jn : doc.at("nodes")) {
    TaxonomyNode n;
    n.id = jn.at("id").get<std::string>();
    n.name = jn.at("name").get<std::string>();
    n.level = jn.at("level").get<int>();
    n.rule = jn.value("rule", std::string{});
    if (jn.contains("parent") && !jn.at("parent").is_null())
      n.parent = jn.at("parent").get<std::string>();
    t.nodes.push_back(std::move(n));
  }
  t.reindex();
  auto violations = validate_taxonomy(t);
  if (!violations.empty()) {
    std::string msg = "taxonomy: " + std::to_string(violations.size()) + " violation(s):";
    for (const auto& v : violations) msg += "\n  " + v;
    throw std::runtime_error(msg);
  }
  return t;
}

inline Taxonomy load_taxonomy_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("taxonomy: parse error: ") + e.what());
  }
  return load_taxonomy(doc);
}

inline Taxonomy load_taxonomy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("taxonomy: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_taxonomy_text(buf.str());
}

inline nlohmann::json taxonomy_to_json(const Taxonomy& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nlohmann::json jn{{"id", n.id}, {"name", n.name}, {"level", n.level}, {"rule", n.rule}};
    jn["parent"] = n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr);
    nodes.push_back(std::move(jn));
  }
  return nlohmann::json{{"depth", t.depth}, {"nodes", std::move(nodes)}};
}

// ---------------------------------------------------------------------------
// Path text

inline std::string serialize_path(const Taxonomy& t, const CategoryPath& p) {
  if (p.is_no_risk()) return kNoRiskLabel;
  std::string out;
  for (std::size_t i = 0; i < p.ids().size(); ++i) {
    if (i > 0) out += kPathSeparator;
    out += t.node(p.ids()[i]).name;
  }
  return out;
}

enum class PathParseStatus { ok, unknown_name, wrong_arity, not_a_child };

struct PathParseResult {
  PathParseStatus status = PathParseStatus::ok;
  CategoryPath path;
  std::string message;

  bool ok() const { return status == PathParseStatus::ok; }
};

/// Resolves a path string level by level. Accepts the canonical en dash
/// separator plus "->" and "-" fallbacks; "No Risk" (case-insensitive,
/// whitespace-tolerant) maps to the sentinel.
inline PathParseResult parse_path(const Taxonomy& t, std::string_view text) {
  PathParseResult r;
  if (to_lower(collapse_ws(text)) == "no risk") {
    r.path = CategoryPath::no_risk();
    return r;
  }

  // pick the first separator that actually occurs, so names containing a
  // plain hyphen survive en dash / arrow separated input
  std::string_view sep = kPathSeparator;
  if (!contains(text, sep)) sep = contains(text, "->") ? "->" : "-";
  std::vector<std::string> segs = split_on(text, sep);
  for (auto& s : segs) s = trim(s);

  if (static_cast<int>(segs.size()) != t.depth) {
    r.status = PathParseStatus::wrong_arity;
    r.message = "expected " + std::to_string(t.depth) + " segments, got " +
                std::to_string(segs.size());
    return r;
  }

  std::vector<NodeId> ids;
  const std::vector<NodeId>* candidates = &t.roots;
  for (int level = 1; level <= t.depth; ++level) {
    const std::string& want = segs[level - 1];
    const NodeId* hit = nullptr;
    for (const auto& id : *candidates)
      if (t.node(id).name == want) {
        hit = &id;
        break;
      }
    if (!hit) {
      // known name at this level elsewhere in the tree means a structure
      // violation rather than an unknown category
      bool known_at_level = false;
      for (const auto& n : t.nodes)
        if (n.level == level && n.name == want) known_at_level = true;
      r.status = known_at_level ? PathParseStatus::not_a_child : PathParseStatus::unknown_name;
      r.message = (known_at_level ? "'" + want + "' is not a child of the preceding segment"
                                  : "unknown category '" + want + "' at level " +
                                        std::to_string(level));
      return r;
    }
    ids.push_back(*hit);
    candidates = &t.node(*hit).children;
  }
  r.path = CategoryPath::risky(std::move(ids));
  return r;
}

// ---------------------------------------------------------------------------
// Prompt rendering

enum class PromptStyle { hierarchical, flat, flat_with_rules };

inline PromptStyle prompt_style_from_string(std::string_view s) {
  if (s == "hierarchical") return PromptStyle::hierarchical;
  if (s == "flat") return PromptStyle::flat;
  if (s == "flat_with_rules") return PromptStyle::flat_with_rules;
  throw std::invalid_argument("unknown prompt style '" + std::string(s) + "'");
}

namespace detail {
inline std::string count_word(int n) {
  static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                "six",  "seven", "eight", "nine",  "ten"};
  if (n >= 0 && n <= 10) return words[n];
  return std::to_string(n);
}
}  // namespace detail

/// Deterministic structured prompt embedding the taxonomy. `hierarchical`
/// lists per-level rule definitions and every full category path; `flat`
/// lists leaf names only; `flat_with_rules` adds leaf definitions.
inline std::string render_prompt(const Taxonomy& t, PromptStyle style,
                                 int min_words = kDefaultMinWords) {
  std::ostringstream out;
  const bool hierarchical = style == PromptStyle::hierarchical;
  if (hierarchical) {
    out << "Given a multi-modal content sample, select the most appropriate risk path from "
           "the following "
        << detail::count_word(t.depth)
        << "-level taxonomy and provide your reasoning.\n\n";
    out << "Category Taxonomy & Rule Definitions:\n";
    for (int level = 1; level <= t.depth; ++level)
      for (const auto& n : t.nodes)
        if (n.level == level)
          out << "Level-" << level << ": " << n.name << " — " << n.rule << "\n";
    out << "\nCategory Path:\n";
    for (const auto& leaf : t.leaves())
      out << serialize_path(t, CategoryPath::risky(t.chain_to(leaf))) << "\n";
  } else {
    out << "Given a multi-modal content sample, select the most appropriate risk category "
           "from the following categories and provide your reasoning.\n\n";
    if (style == PromptStyle::flat) {
      out << "Category:\n";
      for (const auto& leaf : t.leaves()) out << t.node(leaf).name << "\n";
    } else {
      out << "Category & Rule Definitions:\n";
      for (const auto& leaf : t.leaves())
        out << t.node(leaf).name << " — " << t.node(leaf).rule << "\n";
    }
  }
  out << "\nInstructions:\n";
  if (hierarchical) {
    out << "- Select the most appropriate risk path. If no risk, answer No Risk.\n"
        << "- Explain why you chose this category using definitions of the selected category "
           "and its siblings. Be specific.\n";
  } else if (style == PromptStyle::flat_with_rules) {
    out << "- Select the most appropriate risk category. If no risk, answer No Risk.\n"
        << "- Explain why you chose this category using definitions of the selected category. "
           "Be specific.\n";
  } else {
    out << "- Select the most appropriate risk category. If no risk, answer No Risk.\n"
        << "- Explain why you chose this category. Be specific.\n";
  }
  out << "- Output format: <think> Reasoning (≥ " << min_words
      << " words) </think> <answer> "
      << (hierarchical ? "Full risk path" : "Risk Category") << " or No Risk </answer>\n";
  return out.str();
}

}  // namespace riskpath

#include "sakugaflow/version_tree.hpp"

#include <algorithm>
#include <unordered_set>

#include "sakugaflow/errors.hpp"

namespace sakugaflow {

std::optional<std::string> validate_child(const VersionNode& parent, StageKind child_stage,
                                          bool has_mask) {
  if (child_stage == parent.stage) return std::nullopt;
  if (stage_index(child_stage) < stage_index(parent.stage)) return "backward stage";
  auto next = next_stage(parent.stage);
  if (!next || child_stage != *next) return "stage skip";
  if (has_mask) return "mask on stage advance";
  return std::nullopt;
}

void VersionTree::insert(VersionNode node) {
  if (index_.count(node.id)) throw Error(ErrorCode::InvalidArgument, "duplicate node id " + node.id);
  if (node.parent) {
    const auto& parent = at(*node.parent);
    if (auto violation = validate_child(parent, node.stage, node.mask.has_value()))
      throw Error(ErrorCode::StageViolation, *violation);
  } else if (!nodes_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "second root node " + node.id);
  }
  index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
}

const VersionNode* VersionTree::find(const NodeId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

VersionNode* VersionTree::find(const NodeId& id) {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const VersionNode& VersionTree::at(const NodeId& id) const {
  if (const auto* n = find(id)) return *n;
  throw Error(ErrorCode::NotFound, "unknown node " + id);
}

VersionNode& VersionTree::at(const NodeId& id) {
  if (auto* n = find(id)) return *n;
  throw Error(ErrorCode::NotFound, "unknown node " + id);
}

std::vector<NodeId> VersionTree::lineage(const NodeId& id) const {
  std::vector<NodeId> out;
  const VersionNode* n = &at(id);
  while (true) {
    out.push_back(n->id);
    if (!n->parent) break;
    if (out.size() > nodes_.size()) throw Error(ErrorCode::Internal, "cycle through " + id);
    n = &at(*n->parent);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

bool VersionTree::is_ancestor(const NodeId& ancestor, const NodeId& descendant) const {
  auto path = lineage(descendant);
  return std::find(path.begin(), path.end(), ancestor) != path.end();
}

NodeId VersionTree::lowest_common_ancestor(const NodeId& a, const NodeId& b) const {
  auto la = lineage(a);
  auto lb = lineage(b);
  std::size_t i = 0;
  while (i < la.size() && i < lb.size() && la[i] == lb[i]) ++i;
  if (i == 0) throw Error(ErrorCode::Internal, "nodes share no root");
  return la[i - 1];
}

std::vector<NodeId> VersionTree::children(const NodeId& id) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.parent && *n.parent == id) out.push_back(n.id);
  return out;
}

std::vector<NodeId> VersionTree::leaves() const {
  std::unordered_set<NodeId> parents;
  for (const auto& n : nodes_)
    if (n.parent) parents.insert(*n.parent);
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (!parents.count(n.id)) out.push_back(n.id);
  return out;
}

std::string VersionTree::check_invariants() const {
  std::size_t roots = 0;
  for (const auto& n : nodes_) {
    if (!n.parent) {
      ++roots;
      if (n.stage != StageKind::Rough) return "root " + n.id + " is not at the rough stage";
      if (n.mask) return "root " + n.id + " carries a mask";
      continue;
    }
    const auto* parent = find(*n.parent);
    if (!parent) return "node " + n.id + " has a missing parent";
    if (auto v = validate_child(*parent, n.stage, n.mask.has_value()))
      return "node " + n.id + ": " + *v;
  }
  if (!nodes_.empty() && roots != 1) return std::to_string(roots) + " root nodes";

  // Every walk upwards must reach the root within size() steps.
  for (const auto& n : nodes_) {
    const VersionNode* cur = &n;
    std::size_t steps = 0;
    while (cur->parent) {
      if (++steps > nodes_.size()) return "cycle through " + n.id;
      cur = find(*cur->parent);
    }
  }
  return {};
}

}  // namespace sakugaflow

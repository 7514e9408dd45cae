#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sakugaflow/types.hpp"

namespace sakugaflow {

/// Checks the stage rule for a prospective child of `parent`: same stage
/// (revision, branch, inpaint) or the next stage without a mask (advance).
/// Returns the broken rule, or nullopt when the child is allowed.
std::optional<std::string> validate_child(const VersionNode& parent, StageKind child_stage,
                                          bool has_mask);

/// The branching history of one project. Each node has at most one parent,
/// so the structure is a tree rooted at the project's first node. Nodes are
/// kept in insertion order and are never removed.
class VersionTree {
 public:
  /// Throws Error(InvalidArgument) for a duplicate id, Error(NotFound) for a
  /// missing parent, Error(StageViolation) when validate_child rejects it.
  void insert(VersionNode node);

  const VersionNode* find(const NodeId& id) const;
  VersionNode* find(const NodeId& id);
  /// Throws Error(NotFound).
  const VersionNode& at(const NodeId& id) const;
  VersionNode& at(const NodeId& id);

  bool contains(const NodeId& id) const { return index_.count(id) != 0; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<VersionNode>& nodes() const { return nodes_; }

  /// Root first, `id` last. Throws Error(NotFound).
  std::vector<NodeId> lineage(const NodeId& id) const;

  bool is_ancestor(const NodeId& ancestor, const NodeId& descendant) const;

  NodeId lowest_common_ancestor(const NodeId& a, const NodeId& b) const;

  std::vector<NodeId> children(const NodeId& id) const;
  std::vector<NodeId> leaves() const;

  /// Full structural check (single root, parents exist, acyclic, stage rule,
  /// mask only on same-stage children). Empty string when everything holds.
  std::string check_invariants() const;

  bool operator==(const VersionTree& other) const { return nodes_ == other.nodes_; }

 private:
  std::vector<VersionNode> nodes_;
  std::unordered_map<NodeId, std::size_t> index_;
};

}  // namespace sakugaflow

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sentinel/trace.hpp"

namespace sentinel {

// Root-to-node action sequence in a binarized tree. Bit i (from the LSB) is
// the action at step i+1: 0 = left, 1 = right. Empty path = root.
struct TreePath {
    std::uint64_t bits = 0;
    std::uint8_t length = 0;

    static constexpr std::uint8_t kMaxDepth = 64;

    TreePath child(bool right) const {
        TreePath p = *this;
        if (right) p.bits |= std::uint64_t{1} << p.length;
        p.length = static_cast<std::uint8_t>(p.length + 1);
        return p;
    }
    bool right_at(std::uint8_t step) const { // step in [0, length)
        return (bits >> step) & 1;
    }
    bool operator==(const TreePath&) const = default;
    std::string to_string() const; // "LRrL" style, "" for the root
};

enum class ItrKind { CALL, STATE, LOG };

struct ItrNode {
    ItrKind kind = ItrKind::CALL;
    // Exactly one payload is meaningful, selected by kind. The call payload
    // keeps only the frame's own fields; structure lives in `children`.
    RawCallFrame call;   // children member unused here
    RawStateAccess state;
    RawLogEvent log;
    std::vector<std::unique_ptr<ItrNode>> children; // non-empty only for CALL

    bool structurally_equal(const ItrNode& other) const;
};

struct ItrTree {
    std::unique_ptr<ItrNode> root; // always a CALL node
    std::string tx_hash;

    std::size_t node_count() const;
};

// Merges the call tree with its state and log records: every access/log
// becomes a leaf child of the frame that performed it. Frames keep their
// call children first (execution order), then the frame's state leaves in
// sequence order, then its log leaves in sequence order.
// Throws std::out_of_range on a dangling owner_frame index.
ItrTree build_itr(const RawTrace& trace);

// Left-child/right-sibling transform. First child becomes the left child,
// next sibling becomes the right child. Node count is preserved and the
// transform is invertible.
ItrTree binarize(const ItrTree& tree);
ItrTree debinarize(const ItrTree& tree);

struct LinearizedNode {
    const ItrNode* node;
    TreePath path;
};

// Level-order walk of a binarized tree, each node paired with its
// root-to-node action path. Throws std::length_error when a path would
// exceed max_depth.
std::vector<LinearizedNode> bfs_linearize(const ItrTree& tree,
                                          std::uint8_t max_depth = TreePath::kMaxDepth);

}  // namespace sentinel

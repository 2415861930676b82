#include "sentinel/itr.hpp"

#include <deque>
#include <stdexcept>

namespace sentinel {

std::string TreePath::to_string() const {
    std::string s;
    s.reserve(length);
    for (std::uint8_t i = 0; i < length; ++i) s.push_back(right_at(i) ? 'R' : 'L');
    return s;
}

bool ItrNode::structurally_equal(const ItrNode& other) const {
    if (kind != other.kind || children.size() != other.children.size()) return false;
    switch (kind) {
        case ItrKind::CALL: {
            RawCallFrame a = call, b = other.call;
            a.children.clear();
            b.children.clear();
            if (!(a == b)) return false;
            break;
        }
        case ItrKind::STATE:
            if (!(state == other.state)) return false;
            break;
        case ItrKind::LOG:
            if (!(log == other.log)) return false;
            break;
    }
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (!children[i] != !other.children[i]) return false;
        if (children[i] && !children[i]->structurally_equal(*other.children[i])) return false;
    }
    return true;
}

namespace {

std::size_t count_nodes(const ItrNode& n) {
    std::size_t total = 1;
    for (const auto& c : n.children)
        if (c) total += count_nodes(*c);
    return total;
}

std::unique_ptr<ItrNode> make_call_node(const RawCallFrame& frame) {
    auto node = std::make_unique<ItrNode>();
    node->kind = ItrKind::CALL;
    node->call = frame;
    node->call.children.clear();
    return node;
}

// Pre-order frame indexing matches RawStateAccess/RawLogEvent owner_frame.
void collect_frames(const RawCallFrame& frame, std::vector<const RawCallFrame*>& out) {
    out.push_back(&frame);
    for (const auto& c : frame.children) collect_frames(c, out);
}

std::unique_ptr<ItrNode> clone(const ItrNode& n) {
    auto copy = std::make_unique<ItrNode>();
    copy->kind = n.kind;
    copy->call = n.call;
    copy->state = n.state;
    copy->log = n.log;
    copy->children.reserve(n.children.size());
    for (const auto& c : n.children) copy->children.push_back(clone(*c));
    return copy;
}

}  // namespace

std::size_t ItrTree::node_count() const {
    return root ? count_nodes(*root) : 0;
}

ItrTree build_itr(const RawTrace& trace) {
    std::vector<const RawCallFrame*> frames;
    collect_frames(trace.root, frames);

    // Build call skeleton and record each frame's node in pre-order.
    std::vector<ItrNode*> frame_nodes(frames.size(), nullptr);
    std::size_t next_index = 0;
    auto build = [&](auto&& self, const RawCallFrame& frame) -> std::unique_ptr<ItrNode> {
        auto node = make_call_node(frame);
        frame_nodes[next_index++] = node.get();
        for (const auto& c : frame.children) node->children.push_back(self(self, c));
        return node;
    };
    ItrTree tree;
    tree.tx_hash = trace.tx_hash;
    tree.root = build(build, trace.root);

    for (const auto& access : trace.state_seq) {
        if (access.owner_frame >= frame_nodes.size())
            throw std::out_of_range("state access references frame " +
                                    std::to_string(access.owner_frame) + " of " +
                                    std::to_string(frame_nodes.size()));
        auto leaf = std::make_unique<ItrNode>();
        leaf->kind = ItrKind::STATE;
        leaf->state = access;
        frame_nodes[access.owner_frame]->children.push_back(std::move(leaf));
    }
    for (const auto& event : trace.log_seq) {
        if (event.owner_frame >= frame_nodes.size())
            throw std::out_of_range("log event references frame " +
                                    std::to_string(event.owner_frame) + " of " +
                                    std::to_string(frame_nodes.size()));
        auto leaf = std::make_unique<ItrNode>();
        leaf->kind = ItrKind::LOG;
        leaf->log = event;
        frame_nodes[event.owner_frame]->children.push_back(std::move(leaf));
    }
    return tree;
}

namespace {

// children[0] -> left subtree; children[i+1] hangs off children[i]'s right.
std::unique_ptr<ItrNode> binarize_node(const ItrNode& n) {
    auto out = std::make_unique<ItrNode>();
    out->kind = n.kind;
    out->call = n.call;
    out->state = n.state;
    out->log = n.log;
    out->children.resize(2); // [left, right], either may stay null

    ItrNode* attach = out.get();
    bool first = true;
    for (const auto& child : n.children) {
        auto converted = binarize_node(*child);
        if (first) {
            attach->children[0] = std::move(converted);
            attach = attach->children[0].get();
            first = false;
        } else {
            attach->children[1] = std::move(converted);
            attach = attach->children[1].get();
        }
    }
    return out;
}

std::unique_ptr<ItrNode> debinarize_node(const ItrNode& n) {
    auto out = std::make_unique<ItrNode>();
    out->kind = n.kind;
    out->call = n.call;
    out->state = n.state;
    out->log = n.log;

    const ItrNode* child = n.children.empty() ? nullptr : n.children[0].get();
    while (child) {
        out->children.push_back(debinarize_node(*child));
        child = child->children.size() > 1 ? child->children[1].get() : nullptr;
    }
    return out;
}

}  // namespace

ItrTree binarize(const ItrTree& tree) {
    ItrTree out;
    out.tx_hash = tree.tx_hash;
    if (tree.root) out.root = binarize_node(*tree.root);
    return out;
}

ItrTree debinarize(const ItrTree& tree) {
    ItrTree out;
    out.tx_hash = tree.tx_hash;
    if (tree.root) out.root = debinarize_node(*tree.root);
    return out;
}

std::vector<LinearizedNode> bfs_linearize(const ItrTree& tree, std::uint8_t max_depth) {
    std::vector<LinearizedNode> order;
    if (!tree.root) return order;
    std::deque<LinearizedNode> queue{{tree.root.get(), TreePath{}}};
    while (!queue.empty()) {
        LinearizedNode cur = queue.front();
        queue.pop_front();
        order.push_back(cur);
        for (std::size_t slot = 0; slot < cur.node->children.size(); ++slot) {
            const auto& child = cur.node->children[slot];
            if (!child) continue;
            if (cur.path.length >= max_depth)
                throw std::length_error("tree deeper than configured maximum depth " +
                                        std::to_string(max_depth));
            queue.push_back({child.get(), cur.path.child(slot == 1)});
        }
    }
    return order;
}

}  // namespace sentinel

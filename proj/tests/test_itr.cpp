#include <doctest.h>

#include <random>

#include "sentinel/itr.hpp"

using namespace sentinel;

namespace {

std::string addr(int n) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%040x", n);
    return std::string("0x") + buf;
}
std::string word(int n) {
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%064x", n);
    return std::string("0x") + buf;
}

RawCallFrame frame(int tag) {
    RawCallFrame f;
    f.from_addr = addr(tag);
    f.to_addr = addr(tag + 1);
    f.input_bytes = "0x";
    f.output_bytes = "0x";
    f.gas = 21000;
    f.value = "0";
    return f;
}

// The two-frame delegate-call example: root CALL holding one DELEGATECALL
// that reads a slot and emits one event.
RawTrace delegate_example() {
    RawTrace t;
    t.tx_hash = word(1);
    t.root = frame(0x99d);
    RawCallFrame inner = frame(0xe59);
    inner.kind = CallKind::DELEGATECALL;
    t.root.children.push_back(inner);
    t.state_seq.push_back({StateKind::READ, word(0x95c), word(0x67a), 1});
    t.log_seq.push_back({addr(0x0b8), word(0x699), "0x", 1});
    return t;
}

ItrTree random_tree(std::mt19937_64& rng, int max_children = 3, int max_depth = 4) {
    std::uniform_int_distribution<int> kids(0, max_children);
    int counter = 0;
    auto build = [&](auto&& self, int depth) -> std::unique_ptr<ItrNode> {
        auto node = std::make_unique<ItrNode>();
        node->kind = ItrKind::CALL;
        node->call = frame(counter++);
        if (depth < max_depth) {
            int n = kids(rng);
            for (int i = 0; i < n; ++i) node->children.push_back(self(self, depth + 1));
        }
        return node;
    };
    ItrTree t;
    t.tx_hash = word(counter);
    t.root = build(build, 0);
    return t;
}

}  // namespace

TEST_CASE("delegate-call example becomes the expected tree") {
    ItrTree tree = build_itr(delegate_example());
    REQUIRE(tree.root);
    CHECK(tree.root->kind == ItrKind::CALL);
    REQUIRE(tree.root->children.size() == 1);
    const ItrNode& inner = *tree.root->children[0];
    CHECK(inner.kind == ItrKind::CALL);
    CHECK(inner.call.kind == CallKind::DELEGATECALL);
    REQUIRE(inner.children.size() == 2);
    CHECK(inner.children[0]->kind == ItrKind::STATE);
    CHECK(inner.children[0]->state.kind == StateKind::READ);
    CHECK(inner.children[1]->kind == ItrKind::LOG);
    // calls + state + log
    CHECK(tree.node_count() == 4);
}

TEST_CASE("trace without accesses is isomorphic to the call tree") {
    RawTrace t = delegate_example();
    t.state_seq.clear();
    t.log_seq.clear();
    ItrTree tree = build_itr(t);
    CHECK(tree.node_count() == 2);
    CHECK(tree.root->children[0]->children.empty());
}

TEST_CASE("two root-owned accesses become two leaves") {
    RawTrace t;
    t.tx_hash = word(9);
    t.root = frame(1);
    t.state_seq.push_back({StateKind::READ, word(1), word(2), 0});
    t.state_seq.push_back({StateKind::WRITE, word(3), word(4), 0});
    ItrTree tree = build_itr(t);
    CHECK(tree.node_count() == 3);
    REQUIRE(tree.root->children.size() == 2);
    CHECK(tree.root->children[0]->state.kind == StateKind::READ);
    CHECK(tree.root->children[1]->state.kind == StateKind::WRITE);
}

TEST_CASE("node count is conserved by construction") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 30; ++i) {
        RawTrace t = delegate_example();
        std::uniform_int_distribution<int> extra(0, 5);
        int n_state = extra(rng), n_log = extra(rng);
        for (int s = 0; s < n_state; ++s)
            t.state_seq.push_back({StateKind::WRITE, word(s), word(s), 0});
        for (int l = 0; l < n_log; ++l)
            t.log_seq.push_back({addr(l), word(l), "0x", 0});
        ItrTree tree = build_itr(t);
        CHECK(tree.node_count() == 2 + t.state_seq.size() + t.log_seq.size());
    }
}

TEST_CASE("dangling owner frame throws") {
    RawTrace t = delegate_example();
    t.state_seq[0].owner_frame = 5;
    CHECK_THROWS_AS(build_itr(t), std::out_of_range);
}

TEST_CASE("binarize on a single node is the identity") {
    RawTrace t;
    t.tx_hash = word(2);
    t.root = frame(1);
    ItrTree tree = build_itr(t);
    ItrTree bin = binarize(tree);
    CHECK(bin.node_count() == 1);
    auto order = bfs_linearize(bin);
    REQUIRE(order.size() == 1);
    CHECK(order[0].path.length == 0);
}

TEST_CASE("binarize chains siblings to the right") {
    // root with children (a, b, c) -> root-L->a, a-R->b, b-R->c
    RawTrace t;
    t.tx_hash = word(3);
    t.root = frame(0);
    t.root.children = {frame(10), frame(20), frame(30)};
    ItrTree bin = binarize(build_itr(t));

    const ItrNode& root = *bin.root;
    REQUIRE(root.children.size() == 2);
    CHECK(root.children[1] == nullptr);
    const ItrNode& a = *root.children[0];
    CHECK(a.call.from_addr == addr(10));
    const ItrNode& b = *a.children[1];
    CHECK(b.call.from_addr == addr(20));
    const ItrNode& c = *b.children[1];
    CHECK(c.call.from_addr == addr(30));
    CHECK(c.children[1] == nullptr);
    CHECK(bin.node_count() == 4);
}

TEST_CASE("debinarize inverts binarize on random trees") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        ItrTree t = random_tree(rng);
        ItrTree back = debinarize(binarize(t));
        CAPTURE(i);
        CHECK(back.root->structurally_equal(*t.root));
        CHECK(binarize(t).node_count() == t.node_count());
    }
}

TEST_CASE("level order pairs nodes with root paths") {
    RawTrace t;
    t.tx_hash = word(4);
    t.root = frame(0);
    t.root.children = {frame(10), frame(20)};
    ItrTree bin = binarize(build_itr(t));
    auto order = bfs_linearize(bin);
    REQUIRE(order.size() == 3);
    CHECK(order[0].path.to_string() == "");
    CHECK(order[1].path.to_string() == "L");  // first child
    CHECK(order[2].path.to_string() == "LR"); // sibling of the first child
}

TEST_CASE("left and right children of the root linearize in level order") {
    // Hand-built binary tree: root with both slots occupied.
    ItrTree tree;
    tree.tx_hash = word(5);
    tree.root = std::make_unique<ItrNode>();
    tree.root->kind = ItrKind::CALL;
    tree.root->call = frame(0);
    tree.root->children.resize(2);
    for (int slot = 0; slot < 2; ++slot) {
        auto child = std::make_unique<ItrNode>();
        child->kind = ItrKind::CALL;
        child->call = frame(slot + 1);
        tree.root->children[slot] = std::move(child);
    }
    auto order = bfs_linearize(tree);
    REQUIRE(order.size() == 3);
    CHECK(order[0].path.to_string() == "");
    CHECK(order[1].path.to_string() == "L");
    CHECK(order[2].path.to_string() == "R");
}

TEST_CASE("depth beyond the maximum is rejected") {
    // A chain of single children binarizes to an all-left chain.
    RawTrace t;
    t.tx_hash = word(6);
    RawCallFrame* cur = &t.root;
    *cur = frame(0);
    for (int i = 0; i < 8; ++i) {
        cur->children.push_back(frame(i + 1));
        cur = &cur->children[0];
    }
    ItrTree bin = binarize(build_itr(t));
    CHECK_THROWS_AS(bfs_linearize(bin, 7), std::length_error);
    CHECK(bfs_linearize(bin, 8).size() == 9);
}

TEST_CASE("distinct nodes get distinct paths") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 20; ++i) {
        ItrTree bin = binarize(random_tree(rng));
        auto order = bfs_linearize(bin);
        for (std::size_t a = 0; a < order.size(); ++a)
            for (std::size_t b = a + 1; b < order.size(); ++b)
                CHECK_FALSE(order[a].path == order[b].path);
    }
}

#include "fixtures.hpp"

#include <algorithm>
#include <array>

namespace sentinel::fixtures {

namespace {

std::string fill_hex(char marker, int n, std::size_t digits) {
    char tail[32];
    std::snprintf(tail, sizeof(tail), "%08x", n);
    std::string s = "0x" + std::string(digits - 9, marker) + "0" + tail;
    return s.substr(0, digits + 2);
}

std::string user_addr(int i) { return fill_hex('a', i, 40); }
std::string token_addr(int i) { return fill_hex('b', i, 40); }
std::string slot_key(int i) { return fill_hex('c', i, 64); }
std::string slot_val(int i) { return fill_hex('d', i, 64); }
std::string tx_hash(std::uint64_t i) { return fill_hex('e', static_cast<int>(i), 64); }

constexpr const char* kTransferSelector = "0xa9059cbb";
constexpr const char* kSwapSelector = "0x38ed1739";
constexpr const char* kDepositSelector = "0xb6b55f25";
const char* kTransferEvent =
    "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef";

std::string word_of_uint(std::uint64_t v) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%064llx", static_cast<unsigned long long>(v));
    return buf; // no prefix, for splicing into calldata
}

std::string word_of_address(const std::string& addr) {
    return std::string(24, '0') + addr.substr(2);
}

// Small pools keep the corpus learnable: the per-token entropy floor of the
// generator has to sit well under the overfit-sanity gate.
const std::array<std::uint64_t, 4> kAmounts = {1000, 70000, 560000, 9100000};

RawCallFrame token_transfer(const std::string& token, const std::string& from_addr,
                            const std::string& to, std::uint64_t amount) {
    RawCallFrame f;
    f.kind = CallKind::CALL;
    f.from_addr = from_addr;
    f.to_addr = token;
    f.input_bytes = std::string(kTransferSelector) + word_of_address(to) +
                    word_of_uint(amount);
    f.output_bytes = "0x" + word_of_uint(1);
    f.gas = 52000;
    f.value = "0";
    return f;
}

// state write + transfer log attributed to `frame`
void attach_transfer_effects(RawTrace& t, std::size_t frame, int slot,
                             std::uint64_t amount) {
    t.state_seq.push_back({StateKind::READ, slot_key(slot), slot_val(slot), frame});
    t.state_seq.push_back(
        {StateKind::WRITE, slot_key(slot), slot_val(slot + 1), frame});
    const RawCallFrame* owner = frame_at(t.root, frame);
    t.log_seq.push_back({owner->to_addr, kTransferEvent,
                         "0x" + word_of_uint(amount), frame});
}

}  // namespace

std::string router_address() { return fill_hex('f', 1, 40); }

RawTrace benign_trace(std::mt19937_64& rng, std::uint64_t serial) {
    std::uniform_int_distribution<int> user(0, 3);
    std::uniform_int_distribution<int> token(0, 1);
    std::uniform_int_distribution<std::size_t> amount(0, kAmounts.size() - 1);
    std::uniform_int_distribution<int> shape(0, 1);

    RawTrace t;
    t.tx_hash = tx_hash(serial);
    t.block_number = 15000000 + serial;
    t.label = Label::BENIGN;

    std::string sender = user_addr(user(rng));
    t.root.kind = CallKind::CALL;
    t.root.from_addr = sender;
    t.root.to_addr = router_address();
    t.root.gas = 190000;
    t.root.value = "0";
    t.root.output_bytes = "0x" + word_of_uint(1);

    int kind = shape(rng);
    if (kind == 0) {
        // deposit: one token leg; the slot follows the token deterministically
        std::uint64_t amt = kAmounts[amount(rng)];
        int ti = token(rng);
        t.root.input_bytes = std::string(kDepositSelector) + word_of_uint(amt);
        t.root.children.push_back(
            token_transfer(token_addr(ti), router_address(), sender, amt));
        attach_transfer_effects(t, 1, ti, amt);
    } else {
        // swap: two token legs
        std::uint64_t amt_in = kAmounts[amount(rng)];
        std::uint64_t amt_out = kAmounts[amount(rng)];
        int ta = token(rng), tb = token(rng);
        t.root.input_bytes = std::string(kSwapSelector) + word_of_uint(amt_in) +
                             word_of_address(token_addr(ta)) +
                             word_of_address(token_addr(tb));
        t.root.children.push_back(
            token_transfer(token_addr(ta), sender, router_address(), amt_in));
        t.root.children.push_back(
            token_transfer(token_addr(tb), router_address(), sender, amt_out));
        attach_transfer_effects(t, 1, ta, amt_in);
        attach_transfer_effects(t, 2, tb, amt_out);
    }
    return t;
}

RawTrace structural_anomaly(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5eed);
    RawTrace t = benign_trace(rng, 0xdead0000 + seed);
    t.label = Label::ADVERSARIAL;
    t.tags = {"flash_loan"};

    // Replace the familiar flat shape with a deep delegate chain that hops
    // across every token contract and re-enters the router halfway down.
    RawCallFrame* cursor = &t.root;
    for (int depth = 0; depth < 6; ++depth) {
        RawCallFrame hop;
        hop.kind = depth % 2 == 0 ? CallKind::DELEGATECALL : CallKind::CALL;
        hop.from_addr = cursor->to_addr;
        hop.to_addr = depth % 2 == 0 ? token_addr(depth % 2) : router_address();
        hop.input_bytes = std::string(kSwapSelector) + word_of_uint(kAmounts[depth % kAmounts.size()]);
        hop.output_bytes = "0x";
        hop.gas = 160000;
        hop.value = "0";
        cursor->children.insert(cursor->children.begin(), hop);
        cursor = &cursor->children.front();
    }
    // burst of repeated state flips and logs at the bottom of the chain
    std::size_t frames = frame_count(t.root);
    for (int i = 0; i < 6; ++i) {
        t.state_seq.push_back(
            {StateKind::WRITE, slot_key(i % 3), slot_val(5 - i), frames - 1});
        t.log_seq.push_back({token_addr(i % 2), kTransferEvent,
                             "0x" + word_of_uint(kAmounts[i % kAmounts.size()]), frames - 1 - i % 3});
    }
    return t;
}

RawTrace length_anomaly(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x1046);
    RawTrace t = benign_trace(rng, 0xbeef0000 + seed);
    t.label = Label::ADVERSARIAL;

    // Duplicate the call body repeatedly. The copied frames are direct leaf
    // children of the root, so copy r of original child j lands at pre-order
    // index 1 + r * body_size + j.
    std::vector<RawCallFrame> body = t.root.children;
    auto state = t.state_seq;
    auto logs = t.log_seq;
    std::size_t body_size = body.size();
    for (std::size_t rep = 1; rep < 10; ++rep) {
        for (const auto& frame : body) t.root.children.push_back(frame);
        for (auto a : state) {
            if (a.owner_frame >= 1) a.owner_frame += rep * body_size;
            t.state_seq.push_back(a);
        }
        for (auto e : logs) {
            if (e.owner_frame >= 1) e.owner_frame += rep * body_size;
            t.log_seq.push_back(e);
        }
    }
    return t;
}

std::vector<RawTrace> synthetic_corpus(const SynthConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::vector<RawTrace> corpus;
    for (int i = 0; i < config.benign_count; ++i)
        corpus.push_back(benign_trace(rng, static_cast<std::uint64_t>(i) + 1));
    if (config.with_structural_anomaly)
        corpus.push_back(structural_anomaly(config.seed));
    if (config.with_length_anomaly) corpus.push_back(length_anomaly(config.seed));
    return corpus;
}

std::vector<ScoredTx> evaluation_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    struct BucketPlan {
        int contracts;
        std::size_t min_txs, max_txs;
    };
    // 124 contracts mirroring the four dataset-size strata
    const std::array<BucketPlan, 4> plan = {{{60, 20, 99},
                                             {40, 100, 400},
                                             {20, 1000, 1500},
                                             {4, 10000, 10500}}};
    std::vector<ScoredTx> rows;
    int contract_serial = 0;
    for (const auto& bucket : plan) {
        for (int c = 0; c < bucket.contracts; ++c, ++contract_serial) {
            std::uniform_int_distribution<std::size_t> size(bucket.min_txs, bucket.max_txs);
            std::size_t n = size(rng);
            std::string contract = fill_hex('f', 0x1000 + contract_serial, 40);

            std::uniform_int_distribution<int> attack_count(1, 3);
            int attacks = attack_count(rng);
            std::vector<std::size_t> attack_ranks;
            for (int a = 0; a < attacks; ++a) {
                // half the attacks rank very abnormal, the rest anywhere
                std::uniform_int_distribution<std::size_t> low(0, 2);
                std::uniform_int_distribution<std::size_t> anywhere(0, n - 1);
                std::size_t r = (a % 2 == 0) ? low(rng) : anywhere(rng);
                attack_ranks.push_back(std::min(r, n - 1));
            }
            std::uniform_int_distribution<int> tagged(0, 2);
            bool flash = tagged(rng) == 0;

            for (std::size_t i = 0; i < n; ++i) {
                ScoredTx s;
                s.contract = contract;
                s.tx_hash =
                    fill_hex('e', contract_serial * 1000000 + static_cast<int>(i), 64);
                s.log_likelihood = -1000.0 + static_cast<double>(i) * 0.25;
                s.token_count = 64;
                bool attack = std::find(attack_ranks.begin(), attack_ranks.end(), i) !=
                              attack_ranks.end();
                s.label = attack ? Label::ADVERSARIAL : Label::BENIGN;
                if (attack && flash) s.tags = {"flash_loan"};
                rows.push_back(std::move(s));
            }
        }
    }
    return rows;
}

}  // namespace sentinel::fixtures

#include <doctest.h>

#include <filesystem>
#include <random>

#include "sentinel/hex.hpp"
#include "sentinel/tokenizer.hpp"

using namespace sentinel;

namespace {

// Independent oracle: round on the decimal string by hand. Keeps the first
// two digits, rounds on the third, pads with zeros.
std::string round_two_sig_figs_oracle(std::string dec) {
    std::size_t nz = dec.find_first_not_of('0');
    if (nz == std::string::npos) return "0";
    dec = dec.substr(nz);
    if (dec.size() <= 2) return dec;
    int d0 = dec[0] - '0', d1 = dec[1] - '0';
    int two = d0 * 10 + d1;
    if (dec[2] >= '5') ++two;
    std::string head = std::to_string(two);
    head.append(dec.size() - 2, '0');
    return head;
}

std::string addr(int n) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%040x", n);
    return std::string("0x") + buf;
}
std::string word(std::uint64_t n) {
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%064llx", static_cast<unsigned long long>(n));
    return std::string("0x") + buf;
}

ItrNode state_node(StateKind kind, const std::string& key, const std::string& val) {
    ItrNode n;
    n.kind = ItrKind::STATE;
    n.state = {kind, key, val, 0};
    return n;
}

ItrNode call_node() {
    ItrNode n;
    n.kind = ItrKind::CALL;
    n.call.from_addr = addr(0x99d);
    n.call.to_addr = addr(0xe59);
    n.call.input_bytes = "0xc4f0aabb";
    n.call.output_bytes = "0x";
    n.call.gas = 1254;
    n.call.value = "0";
    return n;
}

}  // namespace

TEST_CASE("rounding keeps two significant figures, half-up") {
    CHECK(round_numeric(1254) == 1300);
    CHECK(round_numeric(0) == 0);
    CHECK(round_numeric(7) == 7);
    CHECK(round_numeric(99) == 99);
    CHECK(round_numeric(987654) == 990000);
    CHECK(round_numeric(995) == 1000);  // carry into a new digit
    CHECK(round_numeric(149) == 150);
    CHECK(round_numeric(150) == 150);
    CHECK(round_numeric(151) == 150);
    CHECK(round_numeric(155) == 160);
}

TEST_CASE("rounding matches the decimal-string oracle") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> digits(1, 19);
    for (int i = 0; i < 500; ++i) {
        int nd = digits(rng);
        std::uint64_t lo = 1;
        for (int d = 1; d < nd; ++d) lo *= 10;
        std::uniform_int_distribution<std::uint64_t> pick(lo == 1 ? 0 : lo,
                                                          lo == 1 ? 9 : lo * 10 - 1);
        std::uint64_t n = pick(rng);
        CAPTURE(n);
        CHECK(std::to_string(round_numeric(n)) ==
              round_two_sig_figs_oracle(std::to_string(n)));
    }
}

TEST_CASE("decimal-string rounding agrees with the integer path below 2^64") {
    std::mt19937_64 rng(321);
    std::uniform_int_distribution<std::uint64_t> any;
    for (int i = 0; i < 200; ++i) {
        std::uint64_t n = any(rng);
        CHECK(round_numeric_decimal(std::to_string(n)) ==
              std::to_string(round_numeric(n)));
    }
    CHECK(round_numeric_decimal("0") == "0");
    CHECK(round_numeric_decimal("000123") == "120");
    // wider than 64 bits
    CHECK(round_numeric_decimal("340282366920938463463374607431768211456") ==
          "340000000000000000000000000000000000000");
}

TEST_CASE("idempotence of rounding") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint64_t> any(0, 1000000000000ull);
    for (int i = 0; i < 200; ++i) {
        std::uint64_t n = any(rng);
        CHECK(round_numeric(round_numeric(n)) == round_numeric(n));
    }
}

TEST_CASE("state read tokenizes to the fixed six-token run") {
    ItrNode n = state_node(StateKind::READ, word(0x95c), word(0x67a));
    TokenizedNode t = tokenize_node(n);
    REQUIRE(t.tokens.size() == 6);
    CHECK(t.tokens[0] == tok::kStart);
    CHECK(t.tokens[1] == tok::kState);
    CHECK(t.tokens[2] == "read");
    CHECK(t.tokens[3] == word(0x95c));
    CHECK(t.tokens[4] == word(0x67a));
    CHECK(t.tokens[5] == tok::kEnd);
    CHECK(t.roles[2] == ContextRole::STATE_KIND);
    CHECK(t.roles[3] == ContextRole::STATE_KEY);
    CHECK(t.roles[4] == ContextRole::STATE_VAL);
    CHECK(matches_grammar(t));
}

TEST_CASE("call without parameters still carries both parameter brackets") {
    ItrNode n = call_node();
    TokenizedNode t = tokenize_node(n);
    // [START] [CALL] from to func gas value [INs] [OUTs] [END]
    REQUIRE(t.tokens.size() == 10);
    CHECK(t.tokens[2] == addr(0x99d));
    CHECK(t.tokens[3] == addr(0xe59));
    CHECK(t.tokens[4] == "0xc4f0aabb");
    CHECK(t.tokens[5] == "1300"); // gas 1254 rounded
    CHECK(t.tokens[6] == "0");
    CHECK(t.tokens[7] == tok::kIns);
    CHECK(t.tokens[8] == tok::kOuts);
    CHECK(t.roles[2] == ContextRole::SRC_ADDR);
    CHECK(t.roles[3] == ContextRole::DST_ADDR);
    CHECK(t.roles[4] == ContextRole::FUNC_SIG);
    CHECK(matches_grammar(t));
}

TEST_CASE("call parameters split into typed words") {
    ItrNode n = call_node();
    n.call.input_bytes = "0xc4f0aabb" + word(1254).substr(2) + addr(0xbeef).substr(2);
    // one numeric word then a 20-byte tail (partial word)
    TokenizedNode t = tokenize_node(n);
    CHECK(matches_grammar(t));
    auto at = [&](std::size_t i) { return t.tokens.at(i); };
    CHECK(at(8) == "uint256");
    CHECK(at(9) == "1300");
    CHECK(at(10) == "bytes");
    CHECK(at(11) == "0x" + addr(0xbeef).substr(2));
}

TEST_CASE("address-shaped words become address tokens") {
    // Top twelve bytes zero, leading nibble of the low twenty bytes set.
    std::string address = "0xd" + std::string(39, 'a');
    ItrNode n = call_node();
    n.call.input_bytes = "0xc4f0aabb" + std::string(24, '0') + address.substr(2);
    TokenizedNode t = tokenize_node(n);
    CHECK(t.tokens[8] == "address");
    CHECK(t.tokens[9] == address);
    CHECK(t.roles[9] == ContextRole::PARAM_IN_VALUE);
}

TEST_CASE("log values go through numeric rounding") {
    ItrNode n;
    n.kind = ItrKind::LOG;
    n.log = {addr(0x0b8), word(0x699), word(1254), 0};
    TokenizedNode t = tokenize_node(n);
    CHECK(matches_grammar(t));
    CHECK(t.tokens[4] == "uint256");
    CHECK(t.tokens[5] == "1300");
    CHECK(t.roles[5] == ContextRole::LOG_VALUE);
}

TEST_CASE("grammar rejects mangled runs") {
    TokenizedNode t = tokenize_node(call_node());
    TokenizedNode bad = t;
    bad.tokens.back() = "oops";
    CHECK_FALSE(matches_grammar(bad));
    bad = t;
    bad.tokens.erase(bad.tokens.begin() + 5); // drop gas
    bad.roles.erase(bad.roles.begin() + 5);
    CHECK_FALSE(matches_grammar(bad));
}

TEST_CASE("vocabulary keeps the most frequent tokens under the cap") {
    std::vector<std::vector<std::string>> corpus = {
        {"a", "a", "a", "b", "c"},
        {"a", "a", "b", "b"},
    };
    Vocabulary v = build_vocab(corpus, 2);
    CHECK(v.size() == Vocabulary::kSpecialCount + 2);
    CHECK(v.contains("a"));
    CHECK(v.contains("b"));
    CHECK_FALSE(v.contains("c"));
    CHECK(v.id_of("c") == v.oov_id());
    CHECK(v.frequency_of(v.id_of("a")) == 5);
    CHECK(v.frequency_of(v.id_of("b")) == 3);
}

TEST_CASE("frequency ties break by first occurrence") {
    // x, y, z all occur twice; the cap keeps the two seen first.
    std::vector<std::vector<std::string>> corpus = {{"x", "y", "x", "y", "z", "z"}};
    Vocabulary v = build_vocab(corpus, 2);
    CHECK(v.contains("x"));
    CHECK(v.contains("y"));
    CHECK_FALSE(v.contains("z"));
    CHECK(v.id_of("x") < v.id_of("y"));
}

TEST_CASE("cap at or above distinct tokens leaves nothing out-of-vocabulary") {
    std::vector<std::vector<std::string>> corpus = {{"p", "q", "r"}};
    Vocabulary v = build_vocab(corpus, 100);
    for (const auto& token : {"p", "q", "r"}) CHECK(v.contains(token));
}

TEST_CASE("empty corpus gives the special tokens only") {
    Vocabulary v = build_vocab({}, 10);
    CHECK(v.size() == Vocabulary::kSpecialCount);
}

TEST_CASE("vocabulary ids are dense and bijective") {
    std::vector<std::vector<std::string>> corpus = {{"a", "b", "c", "a"}};
    Vocabulary v = build_vocab(corpus, 10);
    for (std::size_t id = 0; id < v.size(); ++id)
        CHECK(v.id_of(v.token_of(static_cast<TokenId>(id))) ==
              static_cast<TokenId>(id));
}

TEST_CASE("vocabulary TSV round-trips") {
    std::vector<std::vector<std::string>> corpus = {{"a", "b", "c", "a", "b", "a"}};
    Vocabulary v = build_vocab(corpus, 10);
    auto path = std::filesystem::temp_directory_path() / "sentinel_vocab_test.tsv";
    v.save_tsv(path);
    Vocabulary back = Vocabulary::load_tsv(path);
    REQUIRE(back.size() == v.size());
    for (std::size_t id = 0; id < v.size(); ++id) {
        CHECK(back.token_of(static_cast<TokenId>(id)) ==
              v.token_of(static_cast<TokenId>(id)));
        CHECK(back.frequency_of(static_cast<TokenId>(id)) ==
              v.frequency_of(static_cast<TokenId>(id)));
    }
}

TEST_CASE("encode truncates to the length budget and keeps metadata aligned") {
    std::vector<TokenizedNode> nodes;
    std::vector<TreePath> paths;
    TreePath p;
    for (int i = 0; i < 120; ++i) { // 120 state nodes, 6 tokens each
        nodes.push_back(tokenize_node(state_node(StateKind::READ, word(i), word(i))));
        paths.push_back(p);
        p = p.child(i % 2);
    }
    Vocabulary v = build_vocab({}, 10);
    EncodedTrace enc = encode(nodes, paths, v, 512);
    CHECK(enc.ids.size() == 512);
    CHECK(enc.paths.size() == 512);
    CHECK(enc.roles.size() == 512);
    CHECK(enc.full_token_count == 720);
    // all non-special tokens map to the catch-all id
    CHECK(enc.ids[3] == v.oov_id());

    EncodedTrace small = encode({}, {}, v, 512);
    CHECK(small.ids.empty());
}

TEST_CASE("encoding is deterministic given the vocabulary") {
    std::vector<TokenizedNode> nodes = {tokenize_node(call_node())};
    std::vector<TreePath> paths = {TreePath{}};
    Vocabulary v = build_vocab({{"0x" + std::string(40, '0'), "1300"}}, 10);
    EncodedTrace a = encode(nodes, paths, v);
    EncodedTrace b = encode(nodes, paths, v);
    CHECK(a.ids == b.ids);
}

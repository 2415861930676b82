#include "sentinel/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sentinel/hex.hpp"

namespace sentinel {

const char* to_string(ContextRole role) {
    switch (role) {
        case ContextRole::SRC_ADDR: return "src_addr";
        case ContextRole::DST_ADDR: return "dst_addr";
        case ContextRole::FUNC_SIG: return "func_sig";
        case ContextRole::GAS: return "gas";
        case ContextRole::VALUE: return "value";
        case ContextRole::PARAM_IN_TYPE: return "param_in_type";
        case ContextRole::PARAM_IN_VALUE: return "param_in_value";
        case ContextRole::PARAM_OUT_TYPE: return "param_out_type";
        case ContextRole::PARAM_OUT_VALUE: return "param_out_value";
        case ContextRole::STATE_KIND: return "state_kind";
        case ContextRole::STATE_KEY: return "state_key";
        case ContextRole::STATE_VAL: return "state_val";
        case ContextRole::LOG_CONTRACT: return "log_contract";
        case ContextRole::LOG_EVENT: return "log_event";
        case ContextRole::LOG_VALUE: return "log_value";
        case ContextRole::STRUCTURAL: return "structural";
    }
    return "?";
}

std::uint64_t round_numeric(std::uint64_t n) {
    if (n < 10) return n;
    std::uint64_t scale = 1;
    std::uint64_t head = n;
    while (head >= 100) {
        head /= 10;
        scale *= 10;
    }
    std::uint64_t remainder = n - head * scale;
    if (remainder * 2 >= scale) ++head;
    return head * scale;
}

std::string round_numeric_decimal(const std::string& digits) {
    std::size_t nz = digits.find_first_not_of('0');
    if (nz == std::string::npos) return "0";
    std::string d = digits.substr(nz);
    if (d.size() <= 2) return d;

    std::string head = d.substr(0, 2);
    bool round_up = d[2] >= '5';
    if (round_up) {
        int carry = 1;
        for (int i = 1; i >= 0 && carry; --i) {
            int v = head[i] - '0' + carry;
            head[i] = static_cast<char>('0' + v % 10);
            carry = v / 10;
        }
        if (carry) head.insert(head.begin(), '1');
    }
    head.append(d.size() - 2, '0');
    return head;
}

namespace {

// A 32-byte word whose top 12 bytes are zero and whose 13th byte is not
// reads as an address; everything else reads as an unsigned number.
bool looks_like_address(std::string_view word_hex) { // 64 digits, no prefix
    return word_hex.substr(0, 24).find_first_not_of('0') == std::string_view::npos &&
           word_hex[24] != '0';
}

void emit(TokenizedNode& out, std::string token, ContextRole role) {
    out.tokens.push_back(std::move(token));
    out.roles.push_back(role);
}

// (type, value) pair for one 32-byte argument word.
void emit_word(TokenizedNode& out, std::string_view word_hex, ContextRole type_role,
               ContextRole value_role) {
    if (looks_like_address(word_hex)) {
        emit(out, "address", type_role);
        emit(out, "0x" + std::string(word_hex.substr(24)), value_role);
    } else {
        emit(out, "uint256", type_role);
        emit(out, round_numeric_decimal(hex::to_decimal(word_hex)), value_role);
    }
}

// Splits hex payload (without selector) into 32-byte words; a trailing
// partial word degrades to a raw hex token rather than failing.
void emit_words(TokenizedNode& out, std::string_view payload_hex,
                ContextRole type_role, ContextRole value_role) {
    std::size_t pos = 0;
    while (pos + 64 <= payload_hex.size()) {
        emit_word(out, payload_hex.substr(pos, 64), type_role, value_role);
        pos += 64;
    }
    if (pos < payload_hex.size()) {
        emit(out, "bytes", type_role);
        emit(out, "0x" + std::string(payload_hex.substr(pos)), value_role);
    }
}

void tokenize_call(TokenizedNode& out, const RawCallFrame& f) {
    emit(out, tok::kCall, ContextRole::STRUCTURAL);
    emit(out, f.from_addr, ContextRole::SRC_ADDR);
    emit(out, f.to_addr, ContextRole::DST_ADDR);

    std::string_view input = hex::strip_prefix(f.input_bytes);
    std::string selector = input.size() >= 8 ? "0x" + std::string(input.substr(0, 8)) : "0x";
    emit(out, std::move(selector), ContextRole::FUNC_SIG);
    emit(out, std::to_string(round_numeric(f.gas)), ContextRole::GAS);
    emit(out, round_numeric_decimal(f.value), ContextRole::VALUE);

    emit(out, tok::kIns, ContextRole::STRUCTURAL);
    if (input.size() >= 8)
        emit_words(out, input.substr(8), ContextRole::PARAM_IN_TYPE,
                   ContextRole::PARAM_IN_VALUE);
    else if (!input.empty())
        emit_words(out, input, ContextRole::PARAM_IN_TYPE, ContextRole::PARAM_IN_VALUE);

    emit(out, tok::kOuts, ContextRole::STRUCTURAL);
    emit_words(out, hex::strip_prefix(f.output_bytes), ContextRole::PARAM_OUT_TYPE,
               ContextRole::PARAM_OUT_VALUE);
}

void tokenize_state(TokenizedNode& out, const RawStateAccess& a) {
    emit(out, tok::kState, ContextRole::STRUCTURAL);
    emit(out, to_string(a.kind), ContextRole::STATE_KIND);
    emit(out, a.key, ContextRole::STATE_KEY);
    emit(out, a.val, ContextRole::STATE_VAL);
}

void tokenize_log(TokenizedNode& out, const RawLogEvent& e) {
    emit(out, tok::kLog, ContextRole::STRUCTURAL);
    emit(out, e.contract, ContextRole::LOG_CONTRACT);
    emit(out, e.event_hash, ContextRole::LOG_EVENT);
    // The role set has a single payload role for logs; type tokens share it.
    emit_words(out, hex::strip_prefix(e.data_bytes), ContextRole::LOG_VALUE,
               ContextRole::LOG_VALUE);
}

}  // namespace

TokenizedNode tokenize_node(const ItrNode& node) {
    TokenizedNode out;
    out.node_kind = node.kind;
    emit(out, tok::kStart, ContextRole::STRUCTURAL);
    switch (node.kind) {
        case ItrKind::CALL: tokenize_call(out, node.call); break;
        case ItrKind::STATE: tokenize_state(out, node.state); break;
        case ItrKind::LOG: tokenize_log(out, node.log); break;
    }
    emit(out, tok::kEnd, ContextRole::STRUCTURAL);
    return out;
}

bool matches_grammar(const TokenizedNode& n) {
    const auto& t = n.tokens;
    if (t.size() < 3 || t.size() != n.roles.size()) return false;
    if (t.front() != tok::kStart || t.back() != tok::kEnd) return false;
    for (std::size_t i = 1; i + 1 < t.size(); ++i)
        if (t[i] == tok::kStart || t[i] == tok::kEnd) return false;

    switch (n.node_kind) {
        case ItrKind::CALL: {
            if (t[1] != tok::kCall || t.size() < 10) return false;
            auto ins = std::find(t.begin(), t.end(), tok::kIns);
            auto outs = std::find(t.begin(), t.end(), tok::kOuts);
            if (ins == t.end() || outs == t.end() || outs < ins) return false;
            if (ins - t.begin() != 7) return false;       // fixed header length
            if ((outs - ins - 1) % 2 != 0) return false;  // (type value) pairs
            if ((t.end() - 1 - outs - 1) % 2 != 0) return false;
            return true;
        }
        case ItrKind::STATE:
            return t.size() == 6 && t[1] == tok::kState &&
                   (t[2] == "read" || t[2] == "write");
        case ItrKind::LOG:
            return t.size() >= 5 && t[1] == tok::kLog && (t.size() - 5) % 2 == 0;
    }
    return false;
}

const std::array<const char*, Vocabulary::kSpecialCount>& Vocabulary::specials() {
    static const std::array<const char*, kSpecialCount> s = {
        tok::kStart, tok::kEnd, tok::kCall, tok::kState,
        tok::kLog,   tok::kIns, tok::kOuts, tok::kOov};
    return s;
}

Vocabulary::Vocabulary() {
    for (const char* s : specials()) add(s, 0);
}

TokenId Vocabulary::oov_id() const { return 7; }

TokenId Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? oov_id() : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
    return tokens_.at(static_cast<std::size_t>(id));
}

std::uint64_t Vocabulary::frequency_of(TokenId id) const {
    return frequency_.at(static_cast<std::size_t>(id));
}

bool Vocabulary::contains(const std::string& token) const {
    return ids_.count(token) > 0;
}

void Vocabulary::add(const std::string& token, std::uint64_t frequency) {
    auto [it, inserted] = ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
    if (!inserted) {
        frequency_[static_cast<std::size_t>(it->second)] = frequency;
        return;
    }
    tokens_.push_back(token);
    frequency_.push_back(frequency);
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t id = 0; id < tokens_.size(); ++id)
        out << tokens_[id] << '\t' << id << '\t' << frequency_[id] << '\n';
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Vocabulary vocab;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t tab1 = line.find('\t');
        std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                     : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected token<TAB>id<TAB>frequency");
        std::string token = line.substr(0, tab1);
        TokenId id = static_cast<TokenId>(std::stol(line.substr(tab1 + 1, tab2 - tab1 - 1)));
        std::uint64_t freq = std::stoull(line.substr(tab2 + 1));
        if (static_cast<std::size_t>(id) < kSpecialCount) {
            if (vocab.token_of(id) != token)
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": special token mismatch");
            vocab.frequency_[static_cast<std::size_t>(id)] = freq;
            continue;
        }
        if (static_cast<std::size_t>(id) != vocab.size())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": ids must be dense and ascending");
        vocab.add(token, freq);
    }
    return vocab;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t cap) {
    if (cap < 1) throw std::invalid_argument("vocabulary cap must be >= 1");

    struct Entry {
        std::uint64_t count = 0;
        std::uint64_t first_seen = 0;
    };
    std::unordered_map<std::string, Entry> counts;
    std::uint64_t position = 0;
    std::array<std::uint64_t, Vocabulary::kSpecialCount> special_counts{};

    Vocabulary vocab;
    for (const auto& stream : corpus) {
        for (const auto& token : stream) {
            if (vocab.contains(token)) { // specials never compete for the cap
                ++special_counts[static_cast<std::size_t>(vocab.id_of(token))];
                ++position;
                continue;
            }
            auto [it, inserted] = counts.emplace(token, Entry{});
            if (inserted) it->second.first_seen = position;
            ++it->second.count;
            ++position;
        }
    }

    std::vector<std::pair<const std::string*, const Entry*>> ranked;
    ranked.reserve(counts.size());
    for (const auto& [token, entry] : counts) ranked.emplace_back(&token, &entry);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second->count != b.second->count) return a.second->count > b.second->count;
        return a.second->first_seen < b.second->first_seen;
    });
    if (ranked.size() > cap) ranked.resize(cap);

    for (std::size_t i = 0; i < Vocabulary::kSpecialCount; ++i)
        vocab.add(Vocabulary::specials()[i], special_counts[i]);
    for (const auto& [token, entry] : ranked) vocab.add(*token, entry->count);
    return vocab;
}

EncodedTrace encode(const std::vector<TokenizedNode>& nodes,
                    const std::vector<TreePath>& node_paths,
                    const Vocabulary& vocab, std::size_t max_len) {
    if (nodes.size() != node_paths.size())
        throw std::invalid_argument("one tree path per node required");
    EncodedTrace out;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        out.full_token_count += nodes[n].tokens.size();
        for (std::size_t i = 0; i < nodes[n].tokens.size(); ++i) {
            if (out.ids.size() >= max_len) continue;
            out.ids.push_back(vocab.id_of(nodes[n].tokens[i]));
            out.paths.push_back(node_paths[n]);
            out.roles.push_back(nodes[n].roles[i]);
        }
    }
    return out;
}

EncodedTrace encode_trace(const RawTrace& trace, const Vocabulary& vocab,
                          std::size_t max_len, std::uint8_t max_depth) {
    ItrTree binary = binarize(build_itr(trace));
    auto order = bfs_linearize(binary, max_depth);

    std::vector<TokenizedNode> nodes;
    std::vector<TreePath> paths;
    nodes.reserve(order.size());
    paths.reserve(order.size());
    for (const auto& ln : order) {
        nodes.push_back(tokenize_node(*ln.node));
        paths.push_back(ln.path);
    }
    EncodedTrace out = encode(nodes, paths, vocab, max_len);
    out.tx_hash = trace.tx_hash;
    out.contract = trace.root.to_addr;
    out.label = trace.label;
    out.tags = trace.tags;
    return out;
}

std::vector<std::vector<std::string>> trace_token_streams(const RawTrace& trace,
                                                          std::uint8_t max_depth) {
    ItrTree binary = binarize(build_itr(trace));
    std::vector<std::vector<std::string>> streams;
    for (const auto& ln : bfs_linearize(binary, max_depth))
        streams.push_back(tokenize_node(*ln.node).tokens);
    return streams;
}

}  // namespace sentinel

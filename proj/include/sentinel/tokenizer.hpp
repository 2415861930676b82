#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentinel/itr.hpp"

namespace sentinel {

// Grammar-assigned role of a token within its node, e.g. whether an address
// token is the caller or the callee of a function call.
enum class ContextRole : std::uint8_t {
    SRC_ADDR,
    DST_ADDR,
    FUNC_SIG,
    GAS,
    VALUE,
    PARAM_IN_TYPE,
    PARAM_IN_VALUE,
    PARAM_OUT_TYPE,
    PARAM_OUT_VALUE,
    STATE_KIND,
    STATE_KEY,
    STATE_VAL,
    LOG_CONTRACT,
    LOG_EVENT,
    LOG_VALUE,
    STRUCTURAL,
};
constexpr std::size_t kContextRoleCount = 16;
const char* to_string(ContextRole role);

namespace tok {
inline constexpr const char* kStart = "[START]";
inline constexpr const char* kEnd = "[END]";
inline constexpr const char* kCall = "[CALL]";
inline constexpr const char* kState = "[STATE]";
inline constexpr const char* kLog = "[LOG]";
inline constexpr const char* kIns = "[INs]";
inline constexpr const char* kOuts = "[OUTs]";
inline constexpr const char* kOov = "[OOV]";
}  // namespace tok

// Rounds half-up to two significant decimal digits: 1254 -> 1300.
// Values below 10 are returned unchanged.
std::uint64_t round_numeric(std::uint64_t n);
// Same rule on an unsigned decimal string of arbitrary width.
std::string round_numeric_decimal(const std::string& digits);

struct TokenizedNode {
    std::vector<std::string> tokens;
    std::vector<ContextRole> roles; // one per token
    ItrKind node_kind = ItrKind::CALL;
};

// Token streams per node kind:
//   CALL  -> [START] [CALL] from to func gas value [INs] (type value)*
//            [OUTs] (type value)* [END]
//   STATE -> [START] [STATE] read|write key val [END]
//   LOG   -> [START] [LOG] contract event_hash (type value)* [END]
// Call data is split into a 4-byte selector plus 32-byte words (no ABI is
// available on-chain); words that look like addresses become address tokens,
// anything else becomes a rounded decimal token. Trailing partial words fall
// back to raw hex tokens. Numerics (gas, value, parameters) are rounded to
// two significant figures.
TokenizedNode tokenize_node(const ItrNode& node);

// Checks the grammar above: bracketing, kind tag, per-kind token layout.
bool matches_grammar(const TokenizedNode& node);

using TokenId = std::int32_t;

class Vocabulary {
public:
    static constexpr std::size_t kSpecialCount = 8;
    // Special tokens occupy ids 0..7 in this order.
    static const std::array<const char*, kSpecialCount>& specials();

    Vocabulary();

    TokenId id_of(const std::string& token) const; // [OOV]'s id when absent
    const std::string& token_of(TokenId id) const;
    std::uint64_t frequency_of(TokenId id) const;
    bool contains(const std::string& token) const;
    std::size_t size() const { return tokens_.size(); }
    TokenId oov_id() const;

    void add(const std::string& token, std::uint64_t frequency);

    void save_tsv(const std::filesystem::path& path) const;
    static Vocabulary load_tsv(const std::filesystem::path& path);

private:
    std::vector<std::string> tokens_;       // id -> text
    std::vector<std::uint64_t> frequency_;  // id -> corpus count
    std::unordered_map<std::string, TokenId> ids_;
};

// Keeps the `cap` most frequent non-special tokens (ties broken by first
// occurrence); everything else will encode as [OOV].
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t cap = 100000);

struct EncodedTrace {
    std::string tx_hash;
    std::string contract; // root callee
    std::vector<TokenId> ids;
    std::vector<TreePath> paths; // tree position of the token's node
    std::vector<ContextRole> roles;
    std::size_t full_token_count = 0; // before truncation
    std::optional<Label> label;
    std::vector<std::string> tags;
};

inline constexpr std::size_t kDefaultMaxTokens = 512;

// Tokenized nodes in traversal order -> ids + per-token tree path and role,
// truncated to max_len.
EncodedTrace encode(const std::vector<TokenizedNode>& nodes,
                    const std::vector<TreePath>& node_paths,
                    const Vocabulary& vocab,
                    std::size_t max_len = kDefaultMaxTokens);

// Full pipeline for one transaction: ITR -> binarize -> level order ->
// tokenize -> encode.
EncodedTrace encode_trace(const RawTrace& trace, const Vocabulary& vocab,
                          std::size_t max_len = kDefaultMaxTokens,
                          std::uint8_t max_depth = TreePath::kMaxDepth);

// Token texts of one transaction in model order (vocabulary-independent).
std::vector<std::vector<std::string>> trace_token_streams(
    const RawTrace& trace, std::uint8_t max_depth = TreePath::kMaxDepth);

}  // namespace sentinel

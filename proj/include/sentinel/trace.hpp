#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentinel {

enum class CallKind { CALL, DELEGATECALL, STATICCALL, CALLCODE, CREATE };
enum class StateKind { READ, WRITE };
enum class Label { BENIGN, ADVERSARIAL };

const char* to_string(CallKind k);
const char* to_string(StateKind k);
const char* to_string(Label l);

struct RawCallFrame {
    CallKind kind = CallKind::CALL;
    std::string from_addr;   // 0x + 40 hex
    std::string to_addr;     // 0x + 40 hex; empty "0x" for CREATE
    std::string input_bytes; // 0x-prefixed hex
    std::string output_bytes;
    std::uint64_t gas = 0;
    std::string value = "0"; // wei, decimal string (exceeds 64 bits in the wild)
    std::vector<RawCallFrame> children;

    bool operator==(const RawCallFrame&) const = default;
};

struct RawStateAccess {
    StateKind kind = StateKind::READ;
    std::string key; // 0x + 64 hex
    std::string val; // 0x + 64 hex
    std::size_t owner_frame = 0; // pre-order index into the call tree

    bool operator==(const RawStateAccess&) const = default;
};

struct RawLogEvent {
    std::string contract;   // 0x + 40 hex
    std::string event_hash; // 0x + 64 hex
    std::string data_bytes; // 0x-prefixed hex
    std::size_t owner_frame = 0;

    bool operator==(const RawLogEvent&) const = default;
};

struct RawTrace {
    std::string tx_hash; // 0x + 64 hex
    std::uint64_t block_number = 0;
    RawCallFrame root;
    std::vector<RawStateAccess> state_seq;
    std::vector<RawLogEvent> log_seq;
    std::optional<Label> label;
    std::vector<std::string> tags;

    bool operator==(const RawTrace&) const = default;
};

// Pre-order frame count of the call tree.
std::size_t frame_count(const RawCallFrame& root);

// Pre-order lookup; nullptr when index is out of range.
const RawCallFrame* frame_at(const RawCallFrame& root, std::size_t index);

// Thrown on malformed input; carries the 1-based line and offending field.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::size_t line, std::string field, const std::string& what);
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

// One JSON object per line. `line` feeds error messages.
RawTrace parse_trace_line(const std::string& json_line, std::size_t line = 0);
std::string serialize_trace(const RawTrace& trace);

std::vector<RawTrace> parse_trace_file(const std::filesystem::path& path);
void write_trace_file(const std::filesystem::path& path,
                      const std::vector<RawTrace>& traces);

// ---------------------------------------------------------------------------
// Archive-node RPC client

enum class RpcErrorKind {
    CONNECTION,          // transport failure after all retries
    UNKNOWN_TRANSACTION, // node does not know the hash
    NO_TRACE_SUPPORT,    // node refuses the trace method
    BAD_RESPONSE,        // transport ok, payload malformed
};

class RpcError : public std::runtime_error {
public:
    RpcError(RpcErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    RpcErrorKind kind() const { return kind_; }

private:
    RpcErrorKind kind_;
};

struct RpcConfig {
    std::string endpoint;          // http://host:port
    std::string method = "debug_traceTransaction";
    int max_retries = 3;           // transport retries, not RPC-level errors
    int timeout_seconds = 10;
};

// The node is expected to return the trace in the same JSON shape as the
// JSONL corpus records (root/state/logs). Responses are matched to requests
// by JSON-RPC id. Safe for concurrent fetches on one client.
class RpcClient {
public:
    explicit RpcClient(RpcConfig config);
    ~RpcClient();
    RpcClient(RpcClient&&) noexcept;
    RpcClient& operator=(RpcClient&&) noexcept;

    RawTrace fetch_trace(const std::string& tx_hash);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

RawTrace fetch_trace(const std::string& endpoint, const std::string& tx_hash);

}  // namespace sentinel

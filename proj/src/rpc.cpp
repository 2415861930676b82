#include <atomic>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sentinel/trace.hpp"

namespace sentinel {

using nlohmann::json;

struct RpcClient::Impl {
    RpcConfig config;
    std::atomic<std::uint64_t> next_id{1};
};

RpcClient::RpcClient(RpcConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
}

RpcClient::~RpcClient() = default;
RpcClient::RpcClient(RpcClient&&) noexcept = default;
RpcClient& RpcClient::operator=(RpcClient&&) noexcept = default;

RawTrace RpcClient::fetch_trace(const std::string& tx_hash) {
    const RpcConfig& cfg = impl_->config;
    std::uint64_t id = impl_->next_id.fetch_add(1);

    json request = {{"jsonrpc", "2.0"},
                    {"id", id},
                    {"method", cfg.method},
                    {"params", json::array({tx_hash})}};
    std::string body = request.dump();

    httplib::Result res;
    int attempts = std::max(1, cfg.max_retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        httplib::Client client(cfg.endpoint);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        res = client.Post("/", body, "application/json");
        if (res) break;
    }
    if (!res) {
        throw RpcError(RpcErrorKind::CONNECTION,
                       "no response from " + cfg.endpoint + " after " +
                           std::to_string(attempts) + " attempts");
    }
    if (res->status != 200) {
        throw RpcError(RpcErrorKind::BAD_RESPONSE,
                       "HTTP " + std::to_string(res->status) + " from " + cfg.endpoint);
    }

    json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.is_object())
        throw RpcError(RpcErrorKind::BAD_RESPONSE, "response is not a JSON object");
    if (auto it = reply.find("id"); it == reply.end() || !it->is_number() ||
                                    it->get<std::uint64_t>() != id)
        throw RpcError(RpcErrorKind::BAD_RESPONSE, "response id does not match request");

    if (auto it = reply.find("error"); it != reply.end() && !it->is_null()) {
        int code = it->value("code", 0);
        std::string message = it->value("message", "unspecified error");
        if (code == -32601)
            throw RpcError(RpcErrorKind::NO_TRACE_SUPPORT,
                           "node does not support " + cfg.method + ": " + message);
        if (code == -32000 || message.find("not found") != std::string::npos)
            throw RpcError(RpcErrorKind::UNKNOWN_TRANSACTION,
                           "unknown transaction " + tx_hash + ": " + message);
        throw RpcError(RpcErrorKind::BAD_RESPONSE,
                       "RPC error " + std::to_string(code) + ": " + message);
    }

    auto it = reply.find("result");
    if (it == reply.end() || it->is_null())
        throw RpcError(RpcErrorKind::BAD_RESPONSE, "response carries no result");

    try {
        return parse_trace_line(it->dump(), 0);
    } catch (const SchemaError& e) {
        throw RpcError(RpcErrorKind::BAD_RESPONSE,
                       std::string("malformed trace in RPC result: ") + e.what());
    }
}

RawTrace fetch_trace(const std::string& endpoint, const std::string& tx_hash) {
    RpcClient client(RpcConfig{.endpoint = endpoint});
    return client.fetch_trace(tx_hash);
}

}  // namespace sentinel

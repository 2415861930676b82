#include "sentinel/trace.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sentinel/hex.hpp"

namespace sentinel {

using nlohmann::json;

const char* to_string(CallKind k) {
    switch (k) {
        case CallKind::CALL: return "CALL";
        case CallKind::DELEGATECALL: return "DELEGATECALL";
        case CallKind::STATICCALL: return "STATICCALL";
        case CallKind::CALLCODE: return "CALLCODE";
        case CallKind::CREATE: return "CREATE";
    }
    return "?";
}

const char* to_string(StateKind k) {
    return k == StateKind::READ ? "read" : "write";
}

const char* to_string(Label l) {
    return l == Label::BENIGN ? "benign" : "adversarial";
}

std::size_t frame_count(const RawCallFrame& root) {
    std::size_t n = 1;
    for (const auto& c : root.children) n += frame_count(c);
    return n;
}

namespace {

const RawCallFrame* frame_at_impl(const RawCallFrame& node, std::size_t& remaining) {
    if (remaining == 0) return &node;
    --remaining;
    for (const auto& c : node.children) {
        if (const RawCallFrame* hit = frame_at_impl(c, remaining)) return hit;
    }
    return nullptr;
}

}  // namespace

const RawCallFrame* frame_at(const RawCallFrame& root, std::size_t index) {
    std::size_t remaining = index;
    return frame_at_impl(root, remaining);
}

SchemaError::SchemaError(std::size_t line, std::string field, const std::string& what)
    : std::runtime_error(what), line_(line), field_(std::move(field)) {}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& field, const std::string& msg) {
    std::ostringstream os;
    os << "line " << line << ": field '" << field << "': " << msg;
    throw SchemaError(line, field, os.str());
}

const json& require(const json& obj, const char* field, std::size_t line,
                    const std::string& scope) {
    auto it = obj.find(field);
    std::string qualified = scope.empty() ? field : scope + "." + field;
    if (it == obj.end()) fail(line, qualified, "missing");
    return *it;
}

std::string get_hex_bytes(const json& obj, const char* field, std::size_t line,
                          const std::string& scope) {
    const json& v = require(obj, field, line, scope);
    std::string qualified = scope.empty() ? field : scope + "." + field;
    if (!v.is_string()) fail(line, qualified, "expected hex string");
    std::string s = hex::normalize(v.get<std::string>());
    if (!hex::is_hex_bytes(s)) fail(line, qualified, "not 0x-prefixed hex: '" + s + "'");
    return s;
}

std::string get_fixed_hex(const json& obj, const char* field, std::size_t digits,
                          std::size_t line, const std::string& scope,
                          bool allow_empty = false) {
    const json& v = require(obj, field, line, scope);
    std::string qualified = scope.empty() ? field : scope + "." + field;
    if (!v.is_string()) fail(line, qualified, "expected hex string");
    std::string s = hex::normalize(v.get<std::string>());
    if (allow_empty && s == "0x") return s;
    if (!hex::is_fixed_hex(s, digits))
        fail(line, qualified, "expected 0x + " + std::to_string(digits) + " hex digits");
    return s;
}

// Wei amounts routinely exceed 64 bits, so values are carried as decimal
// strings; both JSON integers and decimal strings are accepted on input.
std::string get_decimal(const json& obj, const char* field, std::size_t line,
                        const std::string& scope) {
    const json& v = require(obj, field, line, scope);
    std::string qualified = scope.empty() ? field : scope + "." + field;
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_string()) {
        const std::string& s = v.get_ref<const std::string&>();
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            fail(line, qualified, "expected unsigned decimal");
        std::size_t nz = s.find_first_not_of('0');
        return nz == std::string::npos ? "0" : s.substr(nz);
    }
    fail(line, qualified, "expected unsigned integer or decimal string");
}

std::uint64_t get_u64(const json& obj, const char* field, std::size_t line,
                      const std::string& scope) {
    const json& v = require(obj, field, line, scope);
    std::string qualified = scope.empty() ? field : scope + "." + field;
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_string()) {
        try {
            return std::stoull(v.get<std::string>());
        } catch (const std::exception&) {
        }
    }
    fail(line, qualified, "expected unsigned integer");
}

CallKind parse_call_kind(const std::string& s, std::size_t line, const std::string& scope) {
    if (s == "CALL") return CallKind::CALL;
    if (s == "DELEGATECALL") return CallKind::DELEGATECALL;
    if (s == "STATICCALL") return CallKind::STATICCALL;
    if (s == "CALLCODE") return CallKind::CALLCODE;
    if (s == "CREATE") return CallKind::CREATE;
    fail(line, scope + ".kind", "unknown call kind '" + s + "'");
}

RawCallFrame parse_frame(const json& obj, std::size_t line, const std::string& scope) {
    if (!obj.is_object()) fail(line, scope, "expected object");
    RawCallFrame f;
    const json& kind = require(obj, "kind", line, scope);
    if (!kind.is_string()) fail(line, scope + ".kind", "expected string");
    f.kind = parse_call_kind(kind.get<std::string>(), line, scope);
    f.from_addr = get_fixed_hex(obj, "from", 40, line, scope);
    f.to_addr = get_fixed_hex(obj, "to", 40, line, scope, /*allow_empty=*/true);
    f.input_bytes = get_hex_bytes(obj, "input", line, scope);
    f.output_bytes = get_hex_bytes(obj, "output", line, scope);
    f.gas = get_u64(obj, "gas", line, scope);
    f.value = get_decimal(obj, "value", line, scope);
    const json& children = require(obj, "children", line, scope);
    if (!children.is_array()) fail(line, scope + ".children", "expected array");
    f.children.reserve(children.size());
    for (std::size_t i = 0; i < children.size(); ++i) {
        f.children.push_back(
            parse_frame(children[i], line, scope + ".children[" + std::to_string(i) + "]"));
    }
    return f;
}

json frame_to_json(const RawCallFrame& f) {
    json j;
    j["kind"] = to_string(f.kind);
    j["from"] = f.from_addr;
    j["to"] = f.to_addr;
    j["input"] = f.input_bytes;
    j["output"] = f.output_bytes;
    j["gas"] = f.gas;
    j["value"] = f.value;
    json children = json::array();
    for (const auto& c : f.children) children.push_back(frame_to_json(c));
    j["children"] = std::move(children);
    return j;
}

RawTrace parse_trace_json(const json& j, std::size_t line) {
    if (!j.is_object()) fail(line, "<record>", "expected JSON object");
    RawTrace t;
    t.tx_hash = get_fixed_hex(j, "tx_hash", 64, line, "");
    t.block_number = get_u64(j, "block_number", line, "");
    t.root = parse_frame(require(j, "root", line, ""), line, "root");

    std::size_t frames = frame_count(t.root);
    const json& state = require(j, "state", line, "");
    if (!state.is_array()) fail(line, "state", "expected array");
    for (std::size_t i = 0; i < state.size(); ++i) {
        std::string scope = "state[" + std::to_string(i) + "]";
        const json& e = state[i];
        if (!e.is_object()) fail(line, scope, "expected object");
        RawStateAccess a;
        const json& kind = require(e, "kind", line, scope);
        if (!kind.is_string()) fail(line, scope + ".kind", "expected string");
        std::string ks = kind.get<std::string>();
        if (ks == "read") a.kind = StateKind::READ;
        else if (ks == "write") a.kind = StateKind::WRITE;
        else fail(line, scope + ".kind", "expected 'read' or 'write'");
        a.key = get_fixed_hex(e, "key", 64, line, scope);
        a.val = get_fixed_hex(e, "val", 64, line, scope);
        a.owner_frame = get_u64(e, "frame", line, scope);
        if (a.owner_frame >= frames)
            fail(line, scope + ".frame", "frame index " + std::to_string(a.owner_frame) +
                                             " out of range (have " + std::to_string(frames) + ")");
        t.state_seq.push_back(std::move(a));
    }

    const json& logs = require(j, "logs", line, "");
    if (!logs.is_array()) fail(line, "logs", "expected array");
    for (std::size_t i = 0; i < logs.size(); ++i) {
        std::string scope = "logs[" + std::to_string(i) + "]";
        const json& e = logs[i];
        if (!e.is_object()) fail(line, scope, "expected object");
        RawLogEvent ev;
        ev.contract = get_fixed_hex(e, "contract", 40, line, scope);
        ev.event_hash = get_fixed_hex(e, "event_hash", 64, line, scope);
        ev.data_bytes = get_hex_bytes(e, "data", line, scope);
        ev.owner_frame = get_u64(e, "frame", line, scope);
        if (ev.owner_frame >= frames)
            fail(line, scope + ".frame", "frame index " + std::to_string(ev.owner_frame) +
                                             " out of range (have " + std::to_string(frames) + ")");
        t.log_seq.push_back(std::move(ev));
    }

    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) fail(line, "label", "expected string");
        std::string s = it->get<std::string>();
        if (s == "benign") t.label = Label::BENIGN;
        else if (s == "adversarial") t.label = Label::ADVERSARIAL;
        else fail(line, "label", "expected 'benign' or 'adversarial'");
    }
    if (auto it = j.find("tags"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) fail(line, "tags", "expected array of strings");
        for (const auto& tag : *it) {
            if (!tag.is_string()) fail(line, "tags", "expected array of strings");
            t.tags.push_back(tag.get<std::string>());
        }
    }
    return t;
}

}  // namespace

RawTrace parse_trace_line(const std::string& json_line, std::size_t line) {
    json j = json::parse(json_line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) fail(line, "<record>", "invalid JSON");
    return parse_trace_json(j, line);
}

std::string serialize_trace(const RawTrace& t) {
    json j;
    j["tx_hash"] = t.tx_hash;
    j["block_number"] = t.block_number;
    j["root"] = frame_to_json(t.root);
    json state = json::array();
    for (const auto& a : t.state_seq) {
        state.push_back({{"kind", to_string(a.kind)},
                         {"key", a.key},
                         {"val", a.val},
                         {"frame", a.owner_frame}});
    }
    j["state"] = std::move(state);
    json logs = json::array();
    for (const auto& e : t.log_seq) {
        logs.push_back({{"contract", e.contract},
                        {"event_hash", e.event_hash},
                        {"data", e.data_bytes},
                        {"frame", e.owner_frame}});
    }
    j["logs"] = std::move(logs);
    if (t.label) j["label"] = to_string(*t.label);
    if (!t.tags.empty()) j["tags"] = t.tags;
    return j.dump();
}

std::vector<RawTrace> parse_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<RawTrace> traces;
    std::string linebuf;
    std::size_t lineno = 0;
    while (std::getline(in, linebuf)) {
        ++lineno;
        if (linebuf.empty()) continue;
        traces.push_back(parse_trace_line(linebuf, lineno));
    }
    if (in.bad()) throw std::runtime_error("I/O error reading " + path.string());
    return traces;
}

void write_trace_file(const std::filesystem::path& path,
                      const std::vector<RawTrace>& traces) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& t : traces) out << serialize_trace(t) << '\n';
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

}  // namespace sentinel

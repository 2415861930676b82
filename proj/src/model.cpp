#include "sentinel/model.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace sentinel {

using nlohmann::json;

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0 || max_seq <= 0 || vocab_size <= 0 ||
        max_depth <= 0)
        throw std::invalid_argument("model dimensions must be positive");
    if (n_layers < 0) throw std::invalid_argument("layer count must be non-negative");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("d_model must be divisible by n_heads");
}

std::string ModelConfig::to_json() const {
    json j = {{"d_model", d_model},   {"n_heads", n_heads},
              {"n_layers", n_layers}, {"d_ff", d_ff},
              {"max_seq", max_seq},   {"vocab_size", vocab_size},
              {"max_depth", max_depth}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_seq = j.at("max_seq").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_depth = j.at("max_depth").get<int>();
    return c;
}

AttentionMask build_causal_pack_mask(const std::vector<int>& segment_lengths,
                                     int max_seq) {
    int total = std::accumulate(segment_lengths.begin(), segment_lengths.end(), 0);
    if (total > max_seq)
        throw std::length_error("packed length " + std::to_string(total) +
                                " exceeds maximum sequence " + std::to_string(max_seq));
    AttentionMask mask;
    mask.n = total;
    mask.allow.assign(static_cast<std::size_t>(total) * total, 0);
    int start = 0;
    for (int len : segment_lengths) {
        if (len <= 0) throw std::invalid_argument("segment lengths must be positive");
        for (int i = start; i < start + len; ++i)
            for (int j = start; j <= i; ++j)
                mask.allow[static_cast<std::size_t>(i) * total + j] = 1;
        start += len;
    }
    return mask;
}

int PackedInput::target_count() const {
    int n_targets = 0;
    for (TokenId t : targets)
        if (t >= 0) ++n_targets;
    return n_targets;
}

PackedInput make_packed_input(const std::vector<const EncodedTrace*>& traces,
                              int max_seq_with_bos) {
    PackedInput pack;
    int segment = 0;
    for (const EncodedTrace* trace : traces) {
        if (trace->ids.empty())
            throw std::invalid_argument("cannot pack an empty trace");
        pack.members.push_back(trace);
        pack.segment_lengths.push_back(static_cast<int>(trace->ids.size()) + 1);

        // Empty-context slot: predicts the trace's first token.
        pack.input_ids.push_back(-1);
        pack.paths.push_back(TreePath{});
        pack.roles.push_back(ContextRole::STRUCTURAL);
        pack.targets.push_back(trace->ids[0]);
        pack.segment_of.push_back(segment);

        for (std::size_t i = 0; i < trace->ids.size(); ++i) {
            pack.input_ids.push_back(trace->ids[i]);
            pack.paths.push_back(trace->paths[i]);
            pack.roles.push_back(trace->roles[i]);
            pack.targets.push_back(i + 1 < trace->ids.size() ? trace->ids[i + 1] : -1);
            pack.segment_of.push_back(segment);
        }
        ++segment;
    }
    pack.mask = build_causal_pack_mask(pack.segment_lengths, max_seq_with_bos);
    return pack;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

float read_f32_le(std::istream& in) {
    std::uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

template <class T>
void save_checkpoint(const ModelParams<T>& params, const std::filesystem::path& path,
                     const std::string& extra_json) {
    json tensors = json::array();
    for_each_tensor(params, [&](const std::string& name, const auto& tensor) {
        tensors.push_back(
            {{"name", name}, {"rows", tensor.rows()}, {"cols", tensor.cols()}});
    });
    json header = {{"config", json::parse(params.config.to_json())},
                   {"dtype", "f32"},
                   {"tensors", std::move(tensors)}};
    if (!extra_json.empty()) header["extra"] = json::parse(extra_json);
    std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for_each_tensor(params, [&](const std::string&, const auto& tensor) {
        for (Eigen::Index i = 0; i < tensor.rows(); ++i)
            for (Eigen::Index j = 0; j < tensor.cols(); ++j)
                write_f32_le(out, static_cast<float>(tensor(i, j)));
    });
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

namespace {

std::string read_header(std::istream& in, const std::filesystem::path& path) {
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error(path.string() + " is not a checkpoint file");
    std::uint32_t len = read_u32(in);
    std::string header_text(len, '\0');
    in.read(header_text.data(), len);
    if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());
    return header_text;
}

}  // namespace

std::string checkpoint_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_header(in, path);
}

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json header = json::parse(read_header(in, path));
    ModelConfig config = ModelConfig::from_json(header.at("config").dump());
    ModelParams<T> params = zero_params<T>(config);

    std::size_t index = 0;
    const json& tensors = header.at("tensors");
    for_each_tensor(params, [&](const std::string& name, auto& tensor) {
        if (index >= tensors.size())
            throw std::runtime_error("checkpoint tensor table too short at " + name);
        const json& meta = tensors[index++];
        if (meta.at("name").get<std::string>() != name ||
            meta.at("rows").get<Eigen::Index>() != tensor.rows() ||
            meta.at("cols").get<Eigen::Index>() != tensor.cols())
            throw std::runtime_error("checkpoint tensor mismatch at " + name);
        for (Eigen::Index i = 0; i < tensor.rows(); ++i)
            for (Eigen::Index j = 0; j < tensor.cols(); ++j)
                tensor(i, j) = static_cast<T>(read_f32_le(in));
    });
    if (!in) throw std::runtime_error("truncated checkpoint data in " + path.string());
    return params;
}

template void save_checkpoint<float>(const ModelParams<float>&,
                                     const std::filesystem::path&, const std::string&);
template void save_checkpoint<double>(const ModelParams<double>&,
                                      const std::filesystem::path&, const std::string&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace sentinel

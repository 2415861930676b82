#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sentinel/embed.hpp"

namespace sentinel {

struct ModelConfig {
    int d_model = 128;
    int n_heads = 4;
    int n_layers = 8;
    int d_ff = 512;
    int max_seq = 512;
    int vocab_size = 0;
    int max_depth = 64;

    int d_head() const { return d_model / n_heads; }
    void validate() const; // throws std::invalid_argument
    std::string to_json() const;
    static ModelConfig from_json(const std::string& json_text);
    bool operator==(const ModelConfig&) const = default;
};

// Position i may attend to j iff j <= i and both fall in the same segment.
struct AttentionMask {
    int n = 0;
    std::vector<std::uint8_t> allow; // row-major n*n

    bool operator()(int i, int j) const { return allow[static_cast<std::size_t>(i) * n + j] != 0; }
};

AttentionMask build_causal_pack_mask(const std::vector<int>& segment_lengths,
                                     int max_seq = 512);

// One training/scoring pack: segments are laid out back to back, each with a
// leading empty-context slot so the first real token has something to
// condition on. input id -1 marks those slots.
struct PackedInput {
    std::vector<TokenId> input_ids;
    std::vector<TreePath> paths;
    std::vector<ContextRole> roles;
    std::vector<TokenId> targets; // -1 where the position predicts nothing
    std::vector<int> segment_of;
    std::vector<int> segment_lengths; // includes the empty-context slot
    std::vector<const EncodedTrace*> members; // one trace per segment
    AttentionMask mask;

    int n() const { return static_cast<int>(input_ids.size()); }
    int target_count() const;
};

PackedInput make_packed_input(const std::vector<const EncodedTrace*>& traces,
                              int max_seq_with_bos);

template <class T>
struct LayerParams {
    std::vector<MatX<T>> q, k, v; // one (d_head x d_model) matrix per head
    MatX<T> ff_in;                // d_ff x d_model
    VecX<T> ff_in_bias;           // d_ff
    MatX<T> ff_out;               // d_model x d_ff
    VecX<T> ff_out_bias;          // d_model
    VecX<T> ln1_gain, ln1_bias;   // after attention residual
    VecX<T> ln2_gain, ln2_bias;   // after feed-forward residual
};

template <class T>
struct ModelParams {
    ModelConfig config;
    EmbeddingTables<T> embed;
    std::vector<LayerParams<T>> layers;
    MatX<T> head; // vocab_size x d_model
};

// Enumerates every tensor in a fixed order shared by the optimizer, the
// checkpoint format, and the gradient checker.
template <class Params, class F>
void for_each_tensor(Params& p, F&& f) {
    f("embed.token", p.embed.token);
    f("embed.role", p.embed.role);
    f("embed.step", p.embed.step);
    f("embed.bos", p.embed.bos);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        std::string prefix = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < layer.q.size(); ++h) {
            std::string hp = prefix + "head" + std::to_string(h) + ".";
            f(hp + "q", layer.q[h]);
            f(hp + "k", layer.k[h]);
            f(hp + "v", layer.v[h]);
        }
        f(prefix + "ff_in", layer.ff_in);
        f(prefix + "ff_in_bias", layer.ff_in_bias);
        f(prefix + "ff_out", layer.ff_out);
        f(prefix + "ff_out_bias", layer.ff_out_bias);
        f(prefix + "ln1_gain", layer.ln1_gain);
        f(prefix + "ln1_bias", layer.ln1_bias);
        f(prefix + "ln2_gain", layer.ln2_gain);
        f(prefix + "ln2_bias", layer.ln2_bias);
    }
    f("head", p.head);
}

// identity_norms picks unit norm gains (the parameter initialization);
// gradient and moment accumulators pass false for an all-zero structure.
template <class T>
ModelParams<T> zero_params(const ModelConfig& config, bool identity_norms = true) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    p.embed = EmbeddingTables<T>::zeros(config.vocab_size, config.d_model, config.max_depth);
    p.layers.resize(config.n_layers);
    for (auto& layer : p.layers) {
        layer.q.assign(config.n_heads, MatX<T>::Zero(config.d_head(), config.d_model));
        layer.k = layer.q;
        layer.v = layer.q;
        layer.ff_in = MatX<T>::Zero(config.d_ff, config.d_model);
        layer.ff_in_bias = VecX<T>::Zero(config.d_ff);
        layer.ff_out = MatX<T>::Zero(config.d_model, config.d_ff);
        layer.ff_out_bias = VecX<T>::Zero(config.d_model);
        layer.ln1_gain = identity_norms ? VecX<T>::Ones(config.d_model)
                                        : VecX<T>::Zero(config.d_model);
        layer.ln1_bias = VecX<T>::Zero(config.d_model);
        layer.ln2_gain = identity_norms ? VecX<T>::Ones(config.d_model)
                                        : VecX<T>::Zero(config.d_model);
        layer.ln2_bias = VecX<T>::Zero(config.d_model);
    }
    p.head = MatX<T>::Zero(config.vocab_size, config.d_model);
    return p;
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed,
                           T std_dev = T(0.02)) {
    ModelParams<T> p = zero_params<T>(config);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, static_cast<double>(std_dev));
    auto fill = [&](auto& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(dist(rng));
    };
    fill(p.embed.token);
    fill(p.embed.role);
    fill(p.embed.step);
    fill(p.embed.bos);
    for (auto& layer : p.layers) {
        for (auto& m : layer.q) fill(m);
        for (auto& m : layer.k) fill(m);
        for (auto& m : layer.v) fill(m);
        fill(layer.ff_in);
        fill(layer.ff_out);
        // biases stay zero, norms stay identity
    }
    fill(p.head);
    return p;
}

inline constexpr double kLayerNormEpsilon = 1e-5;

// (v - mean) / sqrt(var + eps), then gain and bias, per vector.
template <class T>
VecX<T> layer_norm(const VecX<T>& v, const VecX<T>& gain, const VecX<T>& bias) {
    if (v.size() < 2) throw std::invalid_argument("layer_norm needs dimension >= 2");
    T mean = v.mean();
    T var = (v.array() - mean).square().sum() / static_cast<T>(v.size());
    T inv_sigma = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEpsilon));
    return (((v.array() - mean) * inv_sigma) * gain.array() + bias.array()).matrix();
}

template <class T>
T gelu(T x) {
    return static_cast<T>(0.5) * x * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <class T>
T gelu_derivative(T x) {
    T cdf = static_cast<T>(0.5) * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
    T pdf = std::exp(static_cast<T>(-0.5) * x * x) *
            static_cast<T>(0.3989422804014326779); // 1/sqrt(2*pi)
    return cdf + x * pdf;
}

// Row-wise softmax of masked scores; masked entries end up exactly zero.
template <class T>
void masked_softmax_rows(MatX<T>& scores, const AttentionMask& mask) {
    const int n = static_cast<int>(scores.rows());
    for (int i = 0; i < n; ++i) {
        T row_max = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < n; ++j)
            if (mask(i, j) && scores(i, j) > row_max) row_max = scores(i, j);
        T denom = T(0);
        for (int j = 0; j < n; ++j) {
            if (mask(i, j)) {
                scores(i, j) = std::exp(scores(i, j) - row_max);
                denom += scores(i, j);
            } else {
                scores(i, j) = T(0);
            }
        }
        for (int j = 0; j < n; ++j) scores(i, j) /= denom;
    }
}

// Per-pack activations kept for the backward pass.
template <class T>
struct LayerCache {
    MatX<T> x_in;                  // layer input
    std::vector<MatX<T>> q, k, v;  // per head, m x d_head
    std::vector<MatX<T>> attn;     // per head, m x m softmax weights
    MatX<T> attn_out;              // concatenated heads, m x d_model
    MatX<T> r1;                    // x_in + attn_out (pre-norm)
    MatX<T> x1;                    // after first norm
    MatX<T> ff_pre;                // m x d_ff, before the nonlinearity
    MatX<T> ff_act;                // gelu(ff_pre)
    MatX<T> r2;                    // x1 + ff (pre-norm)
};

template <class T>
struct ForwardCache {
    std::vector<LayerCache<T>> layers;
    MatX<T> x_out;
};

namespace detail {

// y = norm(x) row-wise with the layer's gain/bias.
template <class T>
MatX<T> layer_norm_rows(const MatX<T>& x, const VecX<T>& gain, const VecX<T>& bias) {
    MatX<T> y(x.rows(), x.cols());
    const T eps = static_cast<T>(kLayerNormEpsilon);
    const T inv_d = T(1) / static_cast<T>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        T mean = x.row(i).mean();
        T var = (x.row(i).array() - mean).square().sum() * inv_d;
        T inv_sigma = T(1) / std::sqrt(var + eps);
        y.row(i) = (((x.row(i).array() - mean) * inv_sigma) * gain.transpose().array() +
                    bias.transpose().array())
                       .matrix();
    }
    return y;
}

}  // namespace detail

// Multi-head self-attention with no output projection: the per-head results
// are concatenated. Logits are scaled by 1/sqrt(d_head).
template <class T>
MatX<T> self_attention(const MatX<T>& x, const AttentionMask& mask,
                       const LayerParams<T>& layer, LayerCache<T>* cache = nullptr) {
    const int m = static_cast<int>(x.rows());
    const int n_heads = static_cast<int>(layer.q.size());
    const int d_head = static_cast<int>(layer.q[0].rows());
    const T scale = T(1) / std::sqrt(static_cast<T>(d_head));

    MatX<T> out(m, n_heads * d_head);
    for (int h = 0; h < n_heads; ++h) {
        MatX<T> qh = x * layer.q[h].transpose();
        MatX<T> kh = x * layer.k[h].transpose();
        MatX<T> vh = x * layer.v[h].transpose();
        MatX<T> scores = (qh * kh.transpose()) * scale;
        masked_softmax_rows(scores, mask);
        out.middleCols(h * d_head, d_head) = scores * vh;
        if (cache) {
            cache->q.push_back(std::move(qh));
            cache->k.push_back(std::move(kh));
            cache->v.push_back(std::move(vh));
            cache->attn.push_back(std::move(scores));
        }
    }
    return out;
}

// A * gelu(C x + d) + b applied to each row of x1.
template <class T>
MatX<T> feed_forward(const MatX<T>& x1, const LayerParams<T>& layer,
                     LayerCache<T>* cache = nullptr) {
    MatX<T> pre = x1 * layer.ff_in.transpose();
    pre.rowwise() += layer.ff_in_bias.transpose();
    MatX<T> act = pre.unaryExpr([](T v) { return gelu(v); });
    MatX<T> out = act * layer.ff_out.transpose();
    out.rowwise() += layer.ff_out_bias.transpose();
    if (cache) {
        cache->ff_pre = std::move(pre);
        cache->ff_act = std::move(act);
    }
    return out;
}

template <class T>
MatX<T> encoder_forward(const MatX<T>& x0, const AttentionMask& mask,
                        const ModelParams<T>& params, ForwardCache<T>* cache = nullptr) {
    MatX<T> x = x0;
    if (cache) cache->layers.clear();
    for (const auto& layer : params.layers) {
        LayerCache<T>* lc = nullptr;
        if (cache) {
            cache->layers.emplace_back();
            lc = &cache->layers.back();
            lc->x_in = x;
        }
        MatX<T> attn_out = self_attention(x, mask, layer, lc);
        MatX<T> r1 = x + attn_out;
        MatX<T> x1 = detail::layer_norm_rows(r1, layer.ln1_gain, layer.ln1_bias);
        MatX<T> ff = feed_forward(x1, layer, lc);
        MatX<T> r2 = x1 + ff;
        x = detail::layer_norm_rows(r2, layer.ln2_gain, layer.ln2_bias);
        if (lc) {
            lc->attn_out = std::move(attn_out);
            lc->r1 = std::move(r1);
            lc->x1 = std::move(x1);
            lc->r2 = std::move(r2);
        }
    }
    if (cache) cache->x_out = x;
    return x;
}

template <class T>
MatX<T> embed_inputs(const PackedInput& pack, const ModelParams<T>& params) {
    MatX<T> x(pack.n(), params.config.d_model);
    for (int i = 0; i < pack.n(); ++i) {
        if (pack.input_ids[i] < 0) {
            x.row(i) = params.embed.bos.transpose();
        } else {
            x.row(i) = local_embedding(pack.input_ids[i], pack.paths[i], pack.roles[i],
                                       params.embed)
                           .transpose();
        }
    }
    return x;
}

// softmax(head * z); sums to one.
template <class T>
VecX<T> next_token_distribution(const VecX<T>& z, const MatX<T>& head) {
    VecX<T> s = head * z;
    T m = s.maxCoeff();
    VecX<T> e = (s.array() - m).exp();
    return e / e.sum();
}

// Conditional log-probabilities of every token in every segment of the pack,
// grouped by segment. The mask guarantees each segment scores as if alone.
template <class T>
std::vector<std::vector<T>> score_pack(const ModelParams<T>& params,
                                       const PackedInput& pack) {
    MatX<T> x = encoder_forward(embed_inputs(pack, params), pack.mask, params);
    std::vector<std::vector<T>> per_segment(pack.segment_lengths.size());
    for (int i = 0; i < pack.n(); ++i) {
        if (pack.targets[i] < 0) continue;
        VecX<T> s = params.head * x.row(i).transpose();
        T mx = s.maxCoeff();
        T lse = std::log((s.array() - mx).exp().sum()) + mx;
        per_segment[static_cast<std::size_t>(pack.segment_of[i])].push_back(
            s(pack.targets[i]) - lse);
    }
    return per_segment;
}

template <class T>
T trace_log_likelihood(const ModelParams<T>& params, const EncodedTrace& trace) {
    if (trace.ids.empty()) throw std::invalid_argument("cannot score an empty trace");
    std::vector<const EncodedTrace*> one{&trace};
    PackedInput pack = make_packed_input(one, static_cast<int>(trace.ids.size()) + 1);
    auto terms = score_pack(params, pack);
    T total = T(0);
    for (T t : terms[0]) total += t;
    return total;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, length-prefixed JSON header (config + tensor table),
// then each tensor as little-endian f32 in header order.

inline constexpr char kCheckpointMagic[5] = {'B', 'G', 'P', 'T', '1'};

template <class T>
void save_checkpoint(const ModelParams<T>& params, const std::filesystem::path& path,
                     const std::string& extra_json = "");

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path);

// Header JSON of a checkpoint without loading tensors.
std::string checkpoint_header(const std::filesystem::path& path);

}  // namespace sentinel

#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <random>

#include "sentinel/model.hpp"

namespace sentinel {

struct TrainConfig {
    std::uint64_t seed = 42;
    int max_steps = 1000;
    int batch_packs = 32;
    int pack_len = 512; // token budget per pack before the context slots
    double learning_rate = 6e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip_norm = 1.0;
    int warmup_steps = 100;
    int checkpoint_every = 0;   // 0 = final checkpoint only
    int plateau_patience = 0;   // 0 = run to max_steps
    double plateau_tolerance = 1e-4;

    std::string to_json() const;
};

struct Batch {
    std::vector<PackedInput> packs;
};

// First-fit-decreasing packing: traces sorted by length (stable), each placed
// in the first pack with room, new packs opened as needed. Traces longer
// than max_len must have been truncated upstream.
Batch pack_minibatch(const std::vector<const EncodedTrace*>& traces,
                     int max_len = 512);

// Flat view over every parameter tensor, in for_each_tensor order.
template <class T>
struct TensorRef {
    std::string name;
    T* data;
    std::size_t size;
};

template <class T, class Params>
std::vector<TensorRef<T>> tensor_refs(Params& p) {
    std::vector<TensorRef<T>> refs;
    for_each_tensor(p, [&](const std::string& name, auto& tensor) {
        refs.push_back({name, const_cast<T*>(tensor.data()),
                        static_cast<std::size_t>(tensor.size())});
    });
    return refs;
}

template <class T>
struct LossAndGrads {
    T loss = T(0);          // mean negative log-likelihood per predicted token
    long long tokens = 0;   // predicted tokens in the batch
    ModelParams<T> grads;
};

namespace detail {

// dX for one layer-norm application, plus gain/bias gradient accumulation.
// x is the pre-norm input; dy the gradient at the norm output.
template <class T>
MatX<T> layer_norm_backward_rows(const MatX<T>& x, const MatX<T>& dy,
                                 const VecX<T>& gain, VecX<T>& gain_grad,
                                 VecX<T>& bias_grad) {
    const T eps = static_cast<T>(kLayerNormEpsilon);
    const T inv_d = T(1) / static_cast<T>(x.cols());
    MatX<T> dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        T mean = x.row(i).mean();
        T var = (x.row(i).array() - mean).square().sum() * inv_d;
        T inv_sigma = T(1) / std::sqrt(var + eps);
        Eigen::Array<T, 1, Eigen::Dynamic> xhat =
            (x.row(i).array() - mean) * inv_sigma;
        Eigen::Array<T, 1, Eigen::Dynamic> dyr = dy.row(i).array();

        gain_grad.array() += (dyr * xhat).transpose();
        bias_grad.array() += dyr.transpose();

        Eigen::Array<T, 1, Eigen::Dynamic> u = dyr * gain.transpose().array();
        T mean_u = u.mean();
        T mean_ux = (u * xhat).mean();
        dx.row(i) = ((u - mean_u - xhat * mean_ux) * inv_sigma).matrix();
    }
    return dx;
}

// Backward through one pack given d(loss)/d(encoder output), accumulating
// parameter gradients. Returns d(loss)/d(input embeddings). Masked attention
// entries carry zero weight, so no gradient crosses segment boundaries.
template <class T>
MatX<T> encoder_backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
                         MatX<T> dx, ModelParams<T>& grads) {
    const int n_heads = params.config.n_heads;
    const int d_head = params.config.d_head();
    const T scale = T(1) / std::sqrt(static_cast<T>(d_head));

    for (int l = params.config.n_layers - 1; l >= 0; --l) {
        const LayerParams<T>& layer = params.layers[l];
        LayerParams<T>& layer_grads = grads.layers[l];
        const LayerCache<T>& lc = cache.layers[l];

        // x2 = norm(r2), r2 = x1 + ff(x1)
        MatX<T> dr2 = layer_norm_backward_rows(lc.r2, dx, layer.ln2_gain,
                                               layer_grads.ln2_gain, layer_grads.ln2_bias);
        MatX<T> dx1 = dr2;

        // ff = ff_out * gelu(ff_in * x1 + b_in) + b_out
        layer_grads.ff_out.noalias() += dr2.transpose() * lc.ff_act;
        layer_grads.ff_out_bias += dr2.colwise().sum().transpose();
        MatX<T> dact = dr2 * layer.ff_out;
        MatX<T> dpre =
            dact.array() * lc.ff_pre.unaryExpr([](T v) { return gelu_derivative(v); }).array();
        layer_grads.ff_in.noalias() += dpre.transpose() * lc.x1;
        layer_grads.ff_in_bias += dpre.colwise().sum().transpose();
        dx1.noalias() += dpre * layer.ff_in;

        // x1 = norm(r1), r1 = x_in + attention(x_in)
        MatX<T> dr1 = layer_norm_backward_rows(lc.r1, dx1, layer.ln1_gain,
                                               layer_grads.ln1_gain, layer_grads.ln1_bias);
        MatX<T> dx_in = dr1;

        for (int h = 0; h < n_heads; ++h) {
            const MatX<T>& attn = lc.attn[h];
            MatX<T> dhead_out = dr1.middleCols(h * d_head, d_head);
            MatX<T> dattn = dhead_out * lc.v[h].transpose();
            MatX<T> dv = attn.transpose() * dhead_out;
            // softmax rows: ds = a .* (da - sum(da .* a, row))
            VecX<T> row_dot = (dattn.array() * attn.array()).rowwise().sum().matrix();
            MatX<T> ds =
                (attn.array() * (dattn.array().colwise() - row_dot.array())).matrix();
            MatX<T> dq = (ds * lc.k[h]) * scale;
            MatX<T> dk = (ds.transpose() * lc.q[h]) * scale;

            layer_grads.q[h].noalias() += dq.transpose() * lc.x_in;
            layer_grads.k[h].noalias() += dk.transpose() * lc.x_in;
            layer_grads.v[h].noalias() += dv.transpose() * lc.x_in;
            dx_in.noalias() += dq * layer.q[h];
            dx_in.noalias() += dk * layer.k[h];
            dx_in.noalias() += dv * layer.v[h];
        }
        dx = std::move(dx_in);
    }
    return dx;
}

// Scatter input-embedding gradients into the lookup tables.
template <class T>
void embedding_backward(const PackedInput& pack, const MatX<T>& dx0,
                        ModelParams<T>& grads) {
    for (int i = 0; i < pack.n(); ++i) {
        if (pack.input_ids[i] < 0) {
            grads.embed.bos += dx0.row(i).transpose();
            continue;
        }
        grads.embed.token.row(pack.input_ids[i]) += dx0.row(i);
        grads.embed.role.row(static_cast<int>(pack.roles[i])) += dx0.row(i);
        const TreePath& path = pack.paths[i];
        for (std::uint8_t s = 0; s < path.length; ++s)
            grads.embed.step.row(step_row(s, path.right_at(s))) += dx0.row(i);
    }
}

}  // namespace detail

// Forward-only batch loss (mean negative log-likelihood per predicted token).
template <class T>
T lm_loss(const ModelParams<T>& params, const std::vector<PackedInput>& batch) {
    T total = T(0);
    long long tokens = 0;
    for (std::size_t pi = 0; pi < batch.size(); ++pi) {
        T pack_total = T(0);
        auto per_segment = score_pack(params, batch[pi]);
        for (const auto& seg : per_segment)
            for (T lp : seg) {
                pack_total -= lp;
                ++tokens;
            }
        if (!std::isfinite(static_cast<double>(pack_total)))
            throw std::runtime_error("non-finite loss in pack " + std::to_string(pi));
        total += pack_total;
    }
    if (tokens == 0) throw std::invalid_argument("batch predicts no tokens");
    return total / static_cast<T>(tokens);
}

template <class T>
LossAndGrads<T> lm_loss_and_gradients(const ModelParams<T>& params,
                                      const std::vector<PackedInput>& batch) {
    LossAndGrads<T> result;
    result.grads = zero_params<T>(params.config, false);
    for (const auto& pack : batch) result.tokens += pack.target_count();
    if (result.tokens == 0) throw std::invalid_argument("batch predicts no tokens");
    const T weight = T(1) / static_cast<T>(result.tokens);

    for (std::size_t pi = 0; pi < batch.size(); ++pi) {
        const PackedInput& pack = batch[pi];
        MatX<T> x0 = embed_inputs(pack, params);
        ForwardCache<T> cache;
        encoder_forward(x0, pack.mask, params, &cache);

        // Head + cross entropy, restricted to predicting positions.
        T pack_loss = T(0);
        MatX<T> dx_out = MatX<T>::Zero(pack.n(), params.config.d_model);
        for (int i = 0; i < pack.n(); ++i) {
            if (pack.targets[i] < 0) continue;
            VecX<T> s = params.head * cache.x_out.row(i).transpose();
            T mx = s.maxCoeff();
            VecX<T> p = (s.array() - mx).exp();
            T denom = p.sum();
            p /= denom;
            pack_loss -= std::log(p(pack.targets[i]));

            VecX<T> dlogits = p * weight;
            dlogits(pack.targets[i]) -= weight;
            result.grads.head.noalias() += dlogits * cache.x_out.row(i);
            dx_out.row(i) = (dlogits.transpose() * params.head);
        }
        if (!std::isfinite(static_cast<double>(pack_loss)))
            throw std::runtime_error("non-finite loss in pack " + std::to_string(pi));
        result.loss += pack_loss * weight;

        MatX<T> dx0 =
            detail::encoder_backward(params, cache, std::move(dx_out), result.grads);
        detail::embedding_backward(pack, dx0, result.grads);
    }
    return result;
}

// ---------------------------------------------------------------------------
// AdamW

struct OptimizerState {
    long long step = 0;
    double learning_rate = 6e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
struct AdamW {
    OptimizerState state;
    ModelParams<T> m; // first moments, parameter-shaped
    ModelParams<T> v; // second moments

    explicit AdamW(const ModelConfig& config, OptimizerState s = {})
        : state(s), m(zero_params<T>(config, false)), v(zero_params<T>(config, false)) {}
};

// One decoupled-weight-decay update. Decay multiplies parameters directly and
// never enters the moment estimates. lr_scale carries any schedule (warmup).
template <class T>
void adamw_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamW<T>& opt,
                double lr_scale = 1.0) {
    ++opt.state.step;
    const double lr = opt.state.learning_rate * lr_scale;
    const double b1 = opt.state.beta1;
    const double b2 = opt.state.beta2;
    const double eps = opt.state.epsilon;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(opt.state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(opt.state.step));

    auto p_refs = tensor_refs<T>(params);
    auto g_refs = tensor_refs<const T>(grads);
    auto m_refs = tensor_refs<T>(opt.m);
    auto v_refs = tensor_refs<T>(opt.v);
    for (std::size_t t = 0; t < p_refs.size(); ++t) {
        if (p_refs[t].size != g_refs[t].size)
            throw std::invalid_argument("gradient shape mismatch at " + p_refs[t].name);
        T* p = p_refs[t].data;
        const T* g = g_refs[t].data;
        T* m = m_refs[t].data;
        T* v = v_refs[t].data;
        for (std::size_t i = 0; i < p_refs[t].size; ++i) {
            double gi = static_cast<double>(g[i]);
            double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            double update = (mi / bias1) / (std::sqrt(vi / bias2) + eps);
            double pi = static_cast<double>(p[i]);
            pi -= lr * opt.state.weight_decay * pi; // decoupled decay
            pi -= lr * update;
            p[i] = static_cast<T>(pi);
        }
    }
}

// Global-norm gradient clipping; returns the pre-clip norm.
template <class T>
double clip_gradients(ModelParams<T>& grads, double max_norm) {
    double sq = 0.0;
    auto refs = tensor_refs<T>(grads);
    for (const auto& r : refs)
        for (std::size_t i = 0; i < r.size; ++i)
            sq += static_cast<double>(r.data[i]) * static_cast<double>(r.data[i]);
    double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        T scale = static_cast<T>(max_norm / norm);
        for (const auto& r : refs)
            for (std::size_t i = 0; i < r.size; ++i) r.data[i] *= scale;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
};

// Central differences on sampled coordinates per tensor: the highest-|g|
// coordinates plus seeded random ones. Relative error uses
// |fd - g| / max(|fd|, |g|, 1e-6).
template <class T>
std::vector<GradCheckGroup> fd_check_against(ModelParams<T>& params,
                                             const std::vector<PackedInput>& batch,
                                             const ModelParams<T>& analytic,
                                             double step = 1e-4,
                                             int samples_per_tensor = 12,
                                             std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    auto p_refs = tensor_refs<T>(params);
    auto g_refs = tensor_refs<const T>(analytic);

    std::vector<GradCheckGroup> report;
    for (std::size_t t = 0; t < p_refs.size(); ++t) {
        TensorRef<T>& pr = p_refs[t];
        const T* g = g_refs[t].data;

        std::vector<std::size_t> coords(pr.size);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        std::size_t n_top = std::min<std::size_t>(pr.size, samples_per_tensor / 2 + 1);
        std::partial_sort(coords.begin(), coords.begin() + n_top, coords.end(),
                          [&](std::size_t a, std::size_t b) {
                              return std::abs(g[a]) > std::abs(g[b]);
                          });
        std::vector<std::size_t> picked(coords.begin(), coords.begin() + n_top);
        std::uniform_int_distribution<std::size_t> pick(0, pr.size - 1);
        while (picked.size() < std::min<std::size_t>(pr.size, samples_per_tensor))
            picked.push_back(pick(rng));

        double worst = 0.0;
        for (std::size_t idx : picked) {
            T saved = pr.data[idx];
            pr.data[idx] = saved + static_cast<T>(step);
            double up = static_cast<double>(lm_loss(params, batch));
            pr.data[idx] = saved - static_cast<T>(step);
            double down = static_cast<double>(lm_loss(params, batch));
            pr.data[idx] = saved;
            double fd = (up - down) / (2.0 * step);
            double an = static_cast<double>(g[idx]);
            double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, rel);
        }
        report.push_back({pr.name, worst});
    }
    return report;
}

template <class T>
std::vector<GradCheckGroup> finite_difference_check(ModelParams<T>& params,
                                                    const std::vector<PackedInput>& batch,
                                                    double step = 1e-4,
                                                    int samples_per_tensor = 12,
                                                    std::uint64_t seed = 7) {
    ModelParams<T> analytic = lm_loss_and_gradients(params, batch).grads;
    return fd_check_against(params, batch, analytic, step, samples_per_tensor, seed);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainStepLog {
    int step;
    double loss;
    double tokens_per_sec;
};

template <class T>
struct TrainHooks {
    std::function<void(const TrainStepLog&)> on_step;
    std::function<void(int step, const ModelParams<T>&)> on_checkpoint;
};

Batch pack_epoch(const std::vector<EncodedTrace>& corpus, std::mt19937_64& rng,
                 int pack_len);

// Deterministic given the seed: epoch shuffles, packing, and updates all
// draw from one generator. Traces are visited without replacement each epoch.
template <class T>
ModelParams<T> train(const std::vector<EncodedTrace>& corpus, const ModelConfig& config,
                     const TrainConfig& tc, std::vector<TrainStepLog>* history = nullptr,
                     const TrainHooks<T>& callbacks = {}) {
    if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
    ModelParams<T> params = init_params<T>(config, tc.seed);
    AdamW<T> opt(config, OptimizerState{.step = 0,
                                        .learning_rate = tc.learning_rate,
                                        .weight_decay = tc.weight_decay,
                                        .beta1 = tc.beta1,
                                        .beta2 = tc.beta2,
                                        .epsilon = tc.epsilon});
    std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ull);

    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int step = 0;
    std::vector<PackedInput> queue;
    std::size_t queue_pos = 0;

    while (step < tc.max_steps) {
        if (queue_pos >= queue.size()) {
            Batch epoch = pack_epoch(corpus, rng, tc.pack_len);
            queue = std::move(epoch.packs);
            std::shuffle(queue.begin(), queue.end(), rng);
            queue_pos = 0;
        }
        std::vector<PackedInput> batch;
        while (batch.size() < static_cast<std::size_t>(tc.batch_packs) &&
               queue_pos < queue.size())
            batch.push_back(queue[queue_pos++]);

        auto t0 = std::chrono::steady_clock::now();
        LossAndGrads<T> lg = lm_loss_and_gradients(params, batch);
        clip_gradients(lg.grads, tc.grad_clip_norm);
        double warm = tc.warmup_steps > 0
                          ? std::min(1.0, static_cast<double>(step + 1) / tc.warmup_steps)
                          : 1.0;
        adamw_step(params, lg.grads, opt, warm);
        ++step;
        double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();

        TrainStepLog entry{step, static_cast<double>(lg.loss),
                           dt > 0 ? static_cast<double>(lg.tokens) / dt : 0.0};
        if (history) history->push_back(entry);
        if (callbacks.on_step) callbacks.on_step(entry);
        if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 &&
            callbacks.on_checkpoint)
            callbacks.on_checkpoint(step, params);

        if (tc.plateau_patience > 0) {
            if (entry.loss < best_loss - tc.plateau_tolerance) {
                best_loss = entry.loss;
                since_best = 0;
            } else if (++since_best >= tc.plateau_patience) {
                break;
            }
        }
    }
    return params;
}

}  // namespace sentinel

#include "sentinel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>

#include <json.hpp>

namespace sentinel {

std::vector<std::string> flatten_trace(const RawTrace& trace) {
    std::vector<std::string> words;
    for (auto& stream : trace_token_streams(trace))
        for (auto& token : stream) words.push_back(std::move(token));
    return words;
}

// ---------------------------------------------------------------------------
// doc2vec

std::vector<double> negative_sampling_weights(const std::vector<std::uint64_t>& freqs,
                                              double t) {
    std::vector<double> weights(freqs.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (freqs[i] == 0) continue;
        double w = 1.0 - std::sqrt(t / static_cast<double>(freqs[i]));
        weights[i] = std::max(0.0, w);
        total += weights[i];
    }
    if (total > 0)
        for (double& w : weights) w /= total;
    return weights;
}

namespace {

struct Corpus {
    std::vector<std::string> words;                   // id -> text
    std::vector<std::uint64_t> freqs;                 // id -> count
    std::vector<std::vector<int>> docs;               // documents as word ids
    std::uint64_t total_words = 0;
};

Corpus index_corpus(const std::vector<std::vector<std::string>>& docs) {
    Corpus c;
    std::map<std::string, int> ids;
    for (const auto& doc : docs) {
        c.docs.emplace_back();
        for (const auto& w : doc) {
            auto [it, inserted] = ids.emplace(w, static_cast<int>(c.words.size()));
            if (inserted) {
                c.words.push_back(w);
                c.freqs.push_back(0);
            }
            ++c.freqs[it->second];
            ++c.total_words;
            c.docs.back().push_back(it->second);
        }
    }
    return c;
}

MatX<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                           double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    MatX<double> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

// Sampled-softmax step: the candidate set is the target plus drawn
// negatives; probabilities normalize over that set only.
void sampled_softmax_update(VecX<double>& context_grad, MatX<double>& word_vecs,
                            const VecX<double>& context, int target,
                            const std::vector<int>& negatives, double lr) {
    std::vector<int> candidates{target};
    for (int n : negatives)
        if (std::find(candidates.begin(), candidates.end(), n) == candidates.end())
            candidates.push_back(n);

    VecX<double> scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        scores(i) = word_vecs.row(candidates[i]).dot(context.transpose());
    double mx = scores.maxCoeff();
    VecX<double> p = (scores.array() - mx).exp();
    p /= p.sum();

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double coeff = (i == 0 ? 1.0 : 0.0) - p(i);
        context_grad += lr * coeff * word_vecs.row(candidates[i]).transpose();
        word_vecs.row(candidates[i]) += lr * coeff * context.transpose();
    }
}

}  // namespace

HierarchicalSoftmax HierarchicalSoftmax::build(const std::vector<std::uint64_t>& freqs,
                                               int dim, std::mt19937_64& rng,
                                               double init_std) {
    if (freqs.empty()) throw std::invalid_argument("empty vocabulary");
    HierarchicalSoftmax hs;

    struct HuffNode {
        std::uint64_t freq;
        std::size_t order; // deterministic tie-break
        int index;         // leaf: word id; internal: node_vecs index
        bool leaf;
        int left = -1, right = -1;
    };
    std::vector<HuffNode> pool;
    auto cmp = [&](int a, int b) {
        if (pool[a].freq != pool[b].freq) return pool[a].freq > pool[b].freq;
        return pool[a].order > pool[b].order;
    };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
    for (std::size_t w = 0; w < freqs.size(); ++w) {
        pool.push_back({freqs[w], w, static_cast<int>(w), true});
        heap.push(static_cast<int>(pool.size() - 1));
    }
    std::normal_distribution<double> dist(0.0, init_std);
    auto make_vec = [&](int d) {
        VecX<double> v = VecX<double>::Zero(d);
        if (init_std > 0)
            for (int i = 0; i < d; ++i) v(i) = dist(rng);
        return v;
    };
    while (heap.size() > 1) {
        int a = heap.top();
        heap.pop();
        int b = heap.top();
        heap.pop();
        hs.node_vecs_.push_back(make_vec(dim));
        pool.push_back({pool[a].freq + pool[b].freq, pool.size(),
                        static_cast<int>(hs.node_vecs_.size() - 1), false, a, b});
        heap.push(static_cast<int>(pool.size() - 1));
    }

    hs.paths_.resize(freqs.size());
    // Single word: degenerate tree with one internal decision node, so every
    // word still has a non-empty path.
    if (freqs.size() == 1) {
        hs.node_vecs_.push_back(make_vec(dim));
        hs.paths_[0] = {{0, false}};
        return hs;
    }
    std::vector<Step> walk;
    auto assign = [&](auto&& self, int node) -> void {
        const HuffNode& hn = pool[node];
        if (hn.leaf) {
            hs.paths_[hn.index] = walk;
            return;
        }
        walk.push_back({hn.index, false});
        self(self, hn.left);
        walk.back().right = true;
        self(self, hn.right);
        walk.pop_back();
    };
    assign(assign, heap.top());
    return hs;
}

double HierarchicalSoftmax::logprob(int word, const VecX<double>& context) const {
    if (word < 0 || static_cast<std::size_t>(word) >= paths_.size())
        throw std::out_of_range("word id " + std::to_string(word) + " not in code tree");
    double total = 0.0;
    for (const Step& step : paths_[word]) {
        double score = node_vecs_[step.node].dot(context);
        if (step.right) score = -score;
        // log sigmoid(score), stable for both signs
        total += score < 0 ? score - std::log1p(std::exp(score))
                           : -std::log1p(std::exp(-score));
    }
    return total;
}

void HierarchicalSoftmax::accumulate(int word, const VecX<double>& context, double lr,
                                     VecX<double>& ctx_grad) {
    for (const Step& step : paths_[word]) {
        VecX<double>& v = node_vecs_[step.node];
        double sign = step.right ? -1.0 : 1.0;
        double z = 1.0 / (1.0 + std::exp(-sign * v.dot(context)));
        double coeff = sign * (1.0 - z);
        ctx_grad += lr * coeff * v;
        v += lr * coeff * context;
    }
}

Doc2VecModel train_doc2vec(const std::vector<std::vector<std::string>>& docs,
                           const Doc2VecConfig& config) {
    if (docs.empty()) throw std::invalid_argument("doc2vec corpus is empty");
    if (config.dim < 2) throw std::invalid_argument("embedding dimension must be >= 2");
    Corpus corpus = index_corpus(docs);
    if (corpus.words.size() < 2)
        throw std::invalid_argument("degenerate corpus: needs at least two distinct words");

    std::mt19937_64 rng(config.seed);
    Doc2VecModel model;
    model.words = corpus.words;
    double scale = 0.5 / config.dim;
    model.word_vecs = random_matrix(static_cast<Eigen::Index>(corpus.words.size()),
                                    config.dim, rng, scale);
    model.doc_vecs =
        random_matrix(static_cast<Eigen::Index>(docs.size()), config.dim, rng, scale);

    double t = config.sample_t_fraction * static_cast<double>(corpus.total_words);
    std::vector<double> neg_weights = negative_sampling_weights(corpus.freqs, t);
    bool weights_usable =
        std::any_of(neg_weights.begin(), neg_weights.end(), [](double w) { return w > 0; });
    std::discrete_distribution<int> neg_draw(neg_weights.begin(), neg_weights.end());
    std::uniform_int_distribution<int> uniform_word(
        0, static_cast<int>(corpus.words.size()) - 1);

    HierarchicalSoftmax hs = config.sampler == Doc2VecSampler::HIERARCHICAL
                                 ? HierarchicalSoftmax::build(corpus.freqs, config.dim, rng)
                                 : HierarchicalSoftmax();

    auto draw_negatives = [&](std::vector<int>& out) {
        out.clear();
        for (int i = 0; i < config.negatives; ++i)
            out.push_back(weights_usable ? neg_draw(rng) : uniform_word(rng));
    };

    std::vector<int> negatives;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
            const std::vector<int>& doc = corpus.docs[d];
            for (std::size_t pos = 0; pos < doc.size(); ++pos) {
                int target = doc[pos];
                VecX<double> context;
                std::vector<int> context_words;
                if (config.mode == Doc2VecMode::PV_DBOW) {
                    context = model.doc_vecs.row(d).transpose();
                } else {
                    context = model.doc_vecs.row(d).transpose();
                    for (int off = -config.window; off <= config.window; ++off) {
                        if (off == 0) continue;
                        std::ptrdiff_t q = static_cast<std::ptrdiff_t>(pos) + off;
                        if (q < 0 || q >= static_cast<std::ptrdiff_t>(doc.size())) continue;
                        context_words.push_back(doc[q]);
                        context += model.word_vecs.row(doc[q]).transpose();
                    }
                    context /= static_cast<double>(1 + context_words.size());
                }

                VecX<double> ctx_grad = VecX<double>::Zero(config.dim);
                if (config.sampler == Doc2VecSampler::NEGATIVE) {
                    draw_negatives(negatives);
                    sampled_softmax_update(ctx_grad, model.word_vecs, context, target,
                                           negatives, config.learning_rate);
                } else {
                    hs.accumulate(target, context, config.learning_rate, ctx_grad);
                }

                if (config.mode == Doc2VecMode::PV_DBOW) {
                    model.doc_vecs.row(d) += ctx_grad.transpose();
                } else {
                    double share = 1.0 / static_cast<double>(1 + context_words.size());
                    model.doc_vecs.row(d) += share * ctx_grad.transpose();
                    for (int w : context_words)
                        model.word_vecs.row(w) += share * ctx_grad.transpose();
                }
            }
        }
    }
    return model;
}

void save_embeddings(const std::filesystem::path& path,
                     const std::vector<std::string>& names, const MatX<double>& vecs) {
    if (static_cast<Eigen::Index>(names.size()) != vecs.rows())
        throw std::invalid_argument("one name per embedding row required");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write("DOCV1", 5);
    auto write_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    write_u32(static_cast<std::uint32_t>(vecs.rows()));
    write_u32(static_cast<std::uint32_t>(vecs.cols()));
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
        write_u32(static_cast<std::uint32_t>(names[i].size()));
        out.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
        for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
            double v = vecs(i, j);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

std::pair<std::vector<std::string>, MatX<double>> load_embeddings(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "DOCV1", 5) != 0)
        throw std::runtime_error(path.string() + " is not an embedding file");
    auto read_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    std::uint32_t rows = read_u32();
    std::uint32_t cols = read_u32();
    std::vector<std::string> names(rows);
    MatX<double> vecs(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        std::uint32_t len = read_u32();
        names[i].resize(len);
        in.read(names[i].data(), len);
        for (std::uint32_t j = 0; j < cols; ++j) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            double v;
            std::memcpy(&v, &bits, 8);
            vecs(i, j) = v;
        }
    }
    if (!in) throw std::runtime_error("truncated embedding file " + path.string());
    return {std::move(names), std::move(vecs)};
}

// ---------------------------------------------------------------------------
// Gaussian mixture

namespace {

double diag_normal_logpdf(const VecX<double>& x, const Eigen::Ref<const VecX<double>>& mean,
                          const Eigen::Ref<const VecX<double>>& var) {
    const double log2pi = std::log(2.0 * M_PI);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        double diff = x(j) - mean(j);
        acc += -0.5 * (log2pi + std::log(var(j)) + diff * diff / var(j));
    }
    return acc;
}

}  // namespace

double gmm_log_likelihood(const VecX<double>& v, const GaussianMixture& gm) {
    if (v.size() != gm.dim())
        throw std::invalid_argument("vector dimension does not match mixture");
    VecX<double> terms(gm.components());
    for (int c = 0; c < gm.components(); ++c)
        terms(c) = std::log(gm.weights(c)) +
                   diag_normal_logpdf(v, gm.means.row(c).transpose(),
                                      gm.variances.row(c).transpose());
    double mx = terms.maxCoeff();
    return mx + std::log((terms.array() - mx).exp().sum());
}

namespace {

int nearest_centroid(const MatX<double>& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    int best = 0;
    double best_d = (centroids.row(0) - p).squaredNorm();
    for (int c = 1; c < centroids.rows(); ++c) {
        double d = (centroids.row(c) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

// Farthest point from its own centroid; used to revive empty clusters.
// Points whose cluster would be emptied by the move are skipped when any
// other candidate exists.
Eigen::Index farthest_point(const MatX<double>& points, const MatX<double>& centroids,
                            const std::vector<int>& assignment,
                            const std::vector<Eigen::Index>& counts) {
    Eigen::Index worst = 0, worst_movable = -1;
    double worst_d = -1.0, worst_movable_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double d = (points.row(i) - centroids.row(assignment[i])).squaredNorm();
        if (d > worst_d) {
            worst_d = d;
            worst = i;
        }
        if (counts[assignment[i]] >= 2 && d > worst_movable_d) {
            worst_movable_d = d;
            worst_movable = i;
        }
    }
    return worst_movable >= 0 ? worst_movable : worst;
}

}  // namespace

KMeansResult kmeans(const MatX<double>& points, int k, std::uint64_t seed,
                    int max_iterations) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (n < k)
        throw std::invalid_argument("need at least k points, have " + std::to_string(n));

    std::mt19937_64 rng(seed);
    MatX<double> centroids(k, points.cols());

    // k-means++ seeding
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centroids.row(0) = points.row(first(rng));
    std::vector<double> dist2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int cc = 0; cc < c; ++cc)
                best = std::min(best, (points.row(i) - centroids.row(cc)).squaredNorm());
            dist2[i] = best;
            total += best;
        }
        if (total <= 0) {
            // all mass on existing centroids; duplicate points, pick uniformly
            centroids.row(c) = points.row(first(rng));
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        Eigen::Index chosen = n - 1;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += dist2[i];
            if (acc >= target) {
                chosen = i;
                break;
            }
        }
        centroids.row(c) = points.row(chosen);
    }

    KMeansResult result;
    result.assignment.assign(n, -1);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int c = nearest_centroid(centroids, points.row(i));
            if (c != result.assignment[i]) {
                result.assignment[i] = c;
                changed = true;
            }
        }
        result.iterations = iter + 1;

        MatX<double> sums = MatX<double>::Zero(k, points.cols());
        std::vector<Eigen::Index> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(result.assignment[i]) += points.row(i);
            ++counts[result.assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                Eigen::Index far =
                    farthest_point(points, centroids, result.assignment, counts);
                --counts[result.assignment[far]];
                centroids.row(c) = points.row(far);
                result.assignment[far] = c;
                counts[c] = 1;
                changed = true;
            } else {
                centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
            }
        }
        if (!changed) break;
    }

    result.centroids = std::move(centroids);
    result.objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        result.objective +=
            (points.row(i) - result.centroids.row(result.assignment[i])).squaredNorm();
    return result;
}

namespace {

// Closed-form M step over hard assignments.
void refit(const MatX<double>& points, const std::vector<int>& assignment,
           GaussianMixture& gm) {
    const Eigen::Index n = points.rows();
    const int k = gm.components();
    std::vector<Eigen::Index> counts(k, 0);
    gm.means.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        gm.means.row(assignment[i]) += points.row(i);
        ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
        gm.weights(c) = static_cast<double>(counts[c]) / static_cast<double>(n);
        if (counts[c] > 0) gm.means.row(c) /= static_cast<double>(counts[c]);
    }
    gm.variances.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        auto diff = (points.row(i) - gm.means.row(assignment[i])).array();
        gm.variances.row(assignment[i]) += (diff * diff).matrix();
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) gm.variances.row(c) /= static_cast<double>(counts[c]);
        gm.variances.row(c) =
            gm.variances.row(c).cwiseMax(kVarianceFloor);
    }
}

double complete_data_objective(const MatX<double>& points,
                               const std::vector<int>& assignment,
                               const GaussianMixture& gm) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int c = assignment[i];
        total += std::log(gm.weights(c)) +
                 diag_normal_logpdf(points.row(i).transpose(), gm.means.row(c).transpose(),
                                    gm.variances.row(c).transpose());
    }
    return total;
}

}  // namespace

GaussianMixture gmm_fit_em(const MatX<double>& points, int components,
                           std::uint64_t seed, HardEmDiagnostics* diag,
                           int max_iterations) {
    const Eigen::Index n = points.rows();
    if (components < 1) throw std::invalid_argument("component count must be >= 1");
    if (n < components)
        throw std::invalid_argument("need at least as many points as components");

    KMeansResult init = kmeans(points, components, seed);
    GaussianMixture gm;
    gm.weights = VecX<double>::Constant(components, 1.0 / components);
    gm.means = init.centroids;
    gm.variances = MatX<double>::Constant(components, points.cols(), 1.0);
    std::vector<int> assignment = init.assignment;
    refit(points, assignment, gm);

    VecX<double> global_var =
        ((points.rowwise() - points.colwise().mean()).array().square().colwise().mean())
            .transpose()
            .matrix()
            .cwiseMax(kVarianceFloor);

    for (int iter = 0; iter < max_iterations; ++iter) {
        // E step: argmax_c log pi_c + log phi_c(x)
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < components; ++c) {
                double score = std::log(gm.weights(c)) +
                               diag_normal_logpdf(points.row(i).transpose(),
                                                  gm.means.row(c).transpose(),
                                                  gm.variances.row(c).transpose());
                if (score > best_score) {
                    best_score = score;
                    best = c;
                }
            }
            if (best != assignment[i]) {
                assignment[i] = best;
                changed = true;
            }
        }

        // Revive empty components on the farthest point.
        bool reseeded = false;
        std::vector<Eigen::Index> counts(components, 0);
        for (Eigen::Index i = 0; i < n; ++i) ++counts[assignment[i]];
        for (int c = 0; c < components; ++c) {
            if (counts[c] != 0) continue;
            Eigen::Index far = farthest_point(points, gm.means, assignment, counts);
            --counts[assignment[far]];
            assignment[far] = c;
            counts[c] = 1;
            gm.means.row(c) = points.row(far);
            gm.variances.row(c) = global_var.transpose();
            reseeded = true;
            changed = true;
        }

        refit(points, assignment, gm);

        if (diag) {
            diag->objectives.push_back(complete_data_objective(points, assignment, gm));
            diag->reseeded.push_back(reseeded);
            diag->iterations = iter + 1;
        }
        if (!changed) break;
    }
    return gm;
}

int bic_param_count(int components, int dim, CovarianceKind kind) {
    if (components < 1 || dim < 1)
        throw std::invalid_argument("component count and dimension must be >= 1");
    switch (kind) {
        case CovarianceKind::DIAGONAL: return components * (2 * dim + 1);
        case CovarianceKind::FULL: return components * (dim * dim + dim + 1);
        case CovarianceKind::SPHERICAL: return components * (dim + 2);
    }
    return 0;
}

double bic_score(const MatX<double>& points, const GaussianMixture& gm) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        ll += gmm_log_likelihood(points.row(i).transpose(), gm);
    double penalty =
        bic_param_count(gm.components(), gm.dim(), CovarianceKind::DIAGONAL) *
        std::log(static_cast<double>(points.rows()));
    return -2.0 * ll + penalty;
}

BicSelection select_components_bic(const MatX<double>& points,
                                   const std::vector<int>& candidates,
                                   std::uint64_t seed) {
    if (candidates.empty()) throw std::invalid_argument("no candidate component counts");
    BicSelection best;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int c : candidates) {
        if (c < 1 || points.rows() < c) continue;
        GaussianMixture gm = gmm_fit_em(points, c, seed);
        double bic = bic_score(points, gm);
        best.scores.emplace_back(c, bic);
        bool better = bic < best_bic ||
                      (bic == best_bic && best.components > 0 && c < best.components);
        if (better) {
            best_bic = bic;
            best.components = c;
            best.mixture = gm;
        }
    }
    if (best.components == 0)
        throw std::runtime_error("no candidate component count could be fitted");
    return best;
}

void save_mixture(const std::filesystem::path& path, const GaussianMixture& gm) {
    nlohmann::json j;
    j["components"] = gm.components();
    j["weights"] = std::vector<double>(gm.weights.data(), gm.weights.data() + gm.weights.size());
    auto rows_to_json = [](const MatX<double>& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> row(m.cols());
            for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(i, c);
            rows.push_back(row);
        }
        return rows;
    };
    j["means"] = rows_to_json(gm.means);
    j["variances"] = rows_to_json(gm.variances);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

GaussianMixture load_mixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    GaussianMixture gm;
    auto weights = j.at("weights").get<std::vector<double>>();
    int c = static_cast<int>(weights.size());
    gm.weights = Eigen::Map<VecX<double>>(weights.data(), c);
    auto means = j.at("means").get<std::vector<std::vector<double>>>();
    auto variances = j.at("variances").get<std::vector<std::vector<double>>>();
    int d = means.empty() ? 0 : static_cast<int>(means[0].size());
    gm.means.resize(c, d);
    gm.variances.resize(c, d);
    for (int i = 0; i < c; ++i)
        for (int k = 0; k < d; ++k) {
            gm.means(i, k) = means[i][k];
            gm.variances(i, k) = variances[i][k];
        }
    return gm;
}

RankedReport gmm_rank(const std::string& contract, std::vector<ScoredTx> txs,
                      const MatX<double>& embeddings, const GaussianMixture& gm) {
    if (static_cast<Eigen::Index>(txs.size()) != embeddings.rows())
        throw std::invalid_argument("one embedding row per transaction required");
    for (std::size_t i = 0; i < txs.size(); ++i)
        txs[i].log_likelihood =
            gmm_log_likelihood(embeddings.row(static_cast<Eigen::Index>(i)).transpose(), gm);
    return rank(contract, std::move(txs));
}

RankedReport trace_length_rank(const std::string& contract,
                               const std::vector<EncodedTrace>& traces) {
    std::vector<ScoredTx> txs;
    txs.reserve(traces.size());
    for (const auto& t : traces) {
        ScoredTx s;
        s.tx_hash = t.tx_hash;
        s.contract = t.contract;
        s.log_likelihood = -static_cast<double>(t.full_token_count);
        s.token_count = t.full_token_count;
        s.label = t.label;
        s.tags = t.tags;
        txs.push_back(std::move(s));
    }
    return rank(contract, std::move(txs));
}

}  // namespace sentinel

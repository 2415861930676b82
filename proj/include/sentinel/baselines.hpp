#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/embed.hpp"
#include "sentinel/ids.hpp"
#include "sentinel/metrics.hpp"

namespace sentinel {

// One document per transaction: the node token runs in model order.
std::vector<std::string> flatten_trace(const RawTrace& trace);

// ---------------------------------------------------------------------------
// doc2vec

enum class Doc2VecMode { PV_DM, PV_DBOW };
enum class Doc2VecSampler { NEGATIVE, HIERARCHICAL };

struct Doc2VecConfig {
    int dim = 64;
    Doc2VecMode mode = Doc2VecMode::PV_DBOW;
    Doc2VecSampler sampler = Doc2VecSampler::NEGATIVE;
    int epochs = 40;
    int negatives = 5;   // sampled candidates besides the target
    int window = 4;      // PV-DM context radius
    double learning_rate = 0.05;
    double sample_t_fraction = 1e-5; // t as a fraction of total corpus words
    std::uint64_t seed = 1;
};

struct Doc2VecModel {
    std::vector<std::string> words; // word id -> text
    MatX<double> word_vecs;         // |V| x dim
    MatX<double> doc_vecs;          // docs x dim
};

// Candidate weights max(0, 1 - sqrt(t / f(w))), normalized; frequent words
// are preferred as negatives, words rarer than t never drawn.
std::vector<double> negative_sampling_weights(const std::vector<std::uint64_t>& freqs,
                                              double t);

Doc2VecModel train_doc2vec(const std::vector<std::vector<std::string>>& docs,
                           const Doc2VecConfig& config);

void save_embeddings(const std::filesystem::path& path,
                     const std::vector<std::string>& names, const MatX<double>& vecs);
std::pair<std::vector<std::string>, MatX<double>> load_embeddings(
    const std::filesystem::path& path);

// Binary code tree over the vocabulary (Huffman by frequency) with one
// vector per internal node. P(left) = sigmoid(v . h).
class HierarchicalSoftmax {
public:
    static HierarchicalSoftmax build(const std::vector<std::uint64_t>& freqs, int dim,
                                     std::mt19937_64& rng, double init_std = 0.0);

    double logprob(int word, const VecX<double>& context) const;
    // Gradient-ascent update of node vectors for an observed word; adds the
    // context gradient into ctx_grad.
    void accumulate(int word, const VecX<double>& context, double lr,
                    VecX<double>& ctx_grad);

    std::size_t leaf_count() const { return paths_.size(); }
    std::size_t path_length(int word) const { return paths_.at(word).size(); }

private:
    struct Step {
        int node;
        bool right;
    };
    std::vector<VecX<double>> node_vecs_;
    std::vector<std::vector<Step>> paths_; // word -> root-to-leaf steps
};

// ---------------------------------------------------------------------------
// Gaussian mixture with diagonal covariance

inline constexpr double kVarianceFloor = 1e-6;

struct GaussianMixture {
    VecX<double> weights;  // C, positive, sums to 1
    MatX<double> means;    // C x d
    MatX<double> variances; // C x d, each >= kVarianceFloor

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(means.cols()); }
};

double gmm_log_likelihood(const VecX<double>& v, const GaussianMixture& gm);

struct KMeansResult {
    MatX<double> centroids;        // K x d
    std::vector<int> assignment;   // n
    double objective = 0.0;        // sum of squared distances
    int iterations = 0;
};

// K-means++ seeding then Lloyd iterations to an assignment fixpoint.
KMeansResult kmeans(const MatX<double>& points, int k, std::uint64_t seed,
                    int max_iterations = 300);

struct HardEmDiagnostics {
    std::vector<double> objectives;    // complete-data objective per iteration
    std::vector<bool> reseeded;        // an empty component was re-seeded
    int iterations = 0;
};

// Classification EM: argmax assignment, then closed-form per-component
// weight, mean, and floored diagonal variance. K-Means initialized.
GaussianMixture gmm_fit_em(const MatX<double>& points, int components,
                           std::uint64_t seed, HardEmDiagnostics* diag = nullptr,
                           int max_iterations = 200);

enum class CovarianceKind { DIAGONAL, FULL, SPHERICAL };

int bic_param_count(int components, int dim, CovarianceKind kind);

// -2 sum log p(v) + d(C) log N, diagonal parameter count.
double bic_score(const MatX<double>& points, const GaussianMixture& gm);

struct BicSelection {
    int components = 0;
    GaussianMixture mixture;
    std::vector<std::pair<int, double>> scores; // candidate -> BIC
};

BicSelection select_components_bic(const MatX<double>& points,
                                   const std::vector<int>& candidates,
                                   std::uint64_t seed);

// JSON round-trip for fitted mixtures.
void save_mixture(const std::filesystem::path& path, const GaussianMixture& gm);
GaussianMixture load_mixture(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Baseline rankers

// Scores each transaction by mixture log-likelihood of its embedding row and
// ranks ascending (most abnormal first).
RankedReport gmm_rank(const std::string& contract, std::vector<ScoredTx> txs,
                      const MatX<double>& embeddings, const GaussianMixture& gm);

// Longest trace first. Scores are negated full token counts so the shared
// ranking order (ascending score, ties by hash) applies unchanged.
RankedReport trace_length_rank(const std::string& contract,
                               const std::vector<EncodedTrace>& traces);

}  // namespace sentinel

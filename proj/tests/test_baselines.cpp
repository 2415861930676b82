#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sentinel/baselines.hpp"

using namespace sentinel;

namespace {

std::string addr(int n) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%040x", n);
    return std::string("0x") + buf;
}
std::string word(int n) {
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%064x", n);
    return std::string("0x") + buf;
}

RawTrace two_frame_trace() {
    RawTrace t;
    t.tx_hash = word(1);
    t.root.from_addr = addr(1);
    t.root.to_addr = addr(2);
    t.root.input_bytes = "0xaabbccdd";
    t.root.output_bytes = "0x";
    t.root.gas = 50000;
    t.root.value = "0";
    RawCallFrame child = t.root;
    child.kind = CallKind::STATICCALL;
    t.root.children.push_back(child);
    t.state_seq.push_back({StateKind::READ, word(7), word(8), 1});
    return t;
}

MatX<double> blobs(std::mt19937_64& rng, const std::vector<VecX<double>>& centers,
                   int per_cluster, double sigma) {
    std::normal_distribution<double> noise(0.0, sigma);
    int d = static_cast<int>(centers[0].size());
    MatX<double> points(per_cluster * centers.size(), d);
    int row = 0;
    for (const auto& c : centers)
        for (int i = 0; i < per_cluster; ++i, ++row)
            for (int j = 0; j < d; ++j) points(row, j) = c(j) + noise(rng);
    return points;
}

VecX<double> vec2(double a, double b) {
    VecX<double> v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("flattening preserves model token order") {
    RawTrace t = two_frame_trace();
    auto words = flatten_trace(t);
    auto streams = trace_token_streams(t);
    std::size_t total = 0;
    for (const auto& s : streams) total += s.size();
    REQUIRE(words.size() == total);
    // node runs appear contiguously, in traversal order
    std::size_t offset = 0;
    for (const auto& s : streams) {
        for (const auto& tok : s) CHECK(words[offset++] == tok);
    }
    CHECK(flatten_trace(t) == flatten_trace(t)); // deterministic
}

TEST_CASE("negative-sampling weights follow the clamped rule") {
    // f(w) = t -> weight 0; f(w) = 4t -> 1 - sqrt(1/4) = 0.5 before normalizing
    std::vector<std::uint64_t> freqs = {100, 400, 25};
    double t = 100.0;
    auto w = negative_sampling_weights(freqs, t);
    CHECK(w[0] == 0.0);
    CHECK(w[2] == 0.0); // rarer than t clamps at zero
    CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-12)); // only survivor
    // unnormalized value check through a two-survivor case
    auto w2 = negative_sampling_weights({400, 400}, 100.0);
    CHECK(w2[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w2[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("doc2vec separates disjoint-vocabulary clusters") {
    auto cosine = [](const VecX<double>& a, const VecX<double>& b) {
        return a.dot(b) / (a.norm() * b.norm());
    };
    int wins = 0;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        std::vector<std::vector<std::string>> docs;
        std::mt19937_64 rng(seed * 977);
        std::uniform_int_distribution<int> pick(0, 5);
        for (int d = 0; d < 12; ++d) {
            std::vector<std::string> doc;
            const char* prefix = d < 6 ? "alpha" : "beta";
            for (int i = 0; i < 30; ++i)
                doc.push_back(prefix + std::to_string(pick(rng)));
            docs.push_back(doc);
        }
        Doc2VecConfig config;
        config.dim = 16;
        config.epochs = 60;
        config.seed = seed;
        Doc2VecModel model = train_doc2vec(docs, config);

        double within = 0, across = 0;
        int nw = 0, na = 0;
        for (int a = 0; a < 12; ++a)
            for (int b = a + 1; b < 12; ++b) {
                double c = cosine(model.doc_vecs.row(a).transpose(),
                                  model.doc_vecs.row(b).transpose());
                if ((a < 6) == (b < 6)) {
                    within += c;
                    ++nw;
                } else {
                    across += c;
                    ++na;
                }
            }
        if (within / nw > across / na) ++wins;
    }
    CHECK(wins == 5);
}

TEST_CASE("PV-DM with hierarchical softmax trains without issue") {
    std::vector<std::vector<std::string>> docs = {
        {"a", "b", "c", "a", "b", "c", "a", "b"},
        {"x", "y", "z", "x", "y", "z", "x", "y"},
    };
    Doc2VecConfig config;
    config.dim = 8;
    config.mode = Doc2VecMode::PV_DM;
    config.sampler = Doc2VecSampler::HIERARCHICAL;
    config.epochs = 10;
    Doc2VecModel model = train_doc2vec(docs, config);
    CHECK(model.doc_vecs.rows() == 2);
    CHECK(model.doc_vecs.allFinite());
}

TEST_CASE("degenerate corpora are rejected") {
    CHECK_THROWS_AS(train_doc2vec({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(train_doc2vec({{"solo", "solo", "solo"}}, {}),
                    std::invalid_argument);
}

TEST_CASE("hierarchical softmax is a proper distribution over leaves") {
    std::mt19937_64 rng(8);
    std::vector<std::uint64_t> freqs = {50, 30, 10, 5, 3, 1, 1, 1};
    HierarchicalSoftmax hs = HierarchicalSoftmax::build(freqs, 6, rng, 0.3);
    VecX<double> ctx = VecX<double>::Random(6);
    double total = 0;
    for (int w = 0; w < 8; ++w) total += std::exp(hs.logprob(w, ctx));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("zero node scores halve at every branch") {
    std::mt19937_64 rng(9);
    std::vector<std::uint64_t> freqs = {4, 3, 2, 1};
    HierarchicalSoftmax hs = HierarchicalSoftmax::build(freqs, 4, rng, 0.0);
    VecX<double> ctx = VecX<double>::Random(4);
    for (int w = 0; w < 4; ++w)
        CHECK(hs.logprob(w, ctx) ==
              doctest::Approx(hs.path_length(w) * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("single-word trees still produce one sigmoid term") {
    std::mt19937_64 rng(10);
    HierarchicalSoftmax hs = HierarchicalSoftmax::build({7}, 4, rng, 0.0);
    CHECK(hs.path_length(0) == 1);
    VecX<double> ctx = VecX<double>::Zero(4);
    CHECK(hs.logprob(0, ctx) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(hs.logprob(3, ctx), std::out_of_range);
}

TEST_CASE("mixture log-likelihood closed forms") {
    GaussianMixture gm;
    gm.weights = VecX<double>::Ones(1);
    gm.means = MatX<double>::Zero(1, 2);
    gm.variances = MatX<double>::Ones(1, 2);
    VecX<double> origin = VecX<double>::Zero(2);
    // standard bivariate normal at the mean: log(1/(2*pi))
    CHECK(gmm_log_likelihood(origin, gm) ==
          doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
    CHECK(gmm_log_likelihood(origin, gm) == doctest::Approx(-1.8379).epsilon(1e-4));

    // density falls off with distance
    VecX<double> far = VecX<double>::Constant(2, 10.0);
    CHECK(gmm_log_likelihood(origin, gm) > gmm_log_likelihood(far, gm));

    VecX<double> wrong_dim = VecX<double>::Zero(3);
    CHECK_THROWS_AS(gmm_log_likelihood(wrong_dim, gm), std::invalid_argument);
}

TEST_CASE("log-sum-exp matches naive mixture summation on tame inputs") {
    std::mt19937_64 rng(11);
    GaussianMixture gm;
    gm.weights = VecX<double>(3);
    gm.weights << 0.5, 0.3, 0.2;
    gm.means = MatX<double>::Random(3, 2);
    gm.variances = MatX<double>::Constant(3, 2, 1.0) +
                   0.5 * MatX<double>::Random(3, 2).cwiseAbs();
    for (int i = 0; i < 50; ++i) {
        VecX<double> v = VecX<double>::Random(2) * 2.0;
        double naive = 0;
        for (int c = 0; c < 3; ++c) {
            double quad = 0, logdet = 0;
            for (int j = 0; j < 2; ++j) {
                double diff = v(j) - gm.means(c, j);
                quad += diff * diff / gm.variances(c, j);
                logdet += std::log(gm.variances(c, j));
            }
            naive += gm.weights(c) *
                     std::exp(-0.5 * quad - 0.5 * logdet - std::log(2.0 * M_PI));
        }
        CHECK(gmm_log_likelihood(v, gm) ==
              doctest::Approx(std::log(naive)).epsilon(1e-12));
    }
}

TEST_CASE("kmeans closed forms") {
    std::mt19937_64 rng(12);
    MatX<double> points = MatX<double>::Random(20, 3);

    KMeansResult one = kmeans(points, 1, 5);
    CHECK((one.centroids.row(0) - points.colwise().mean()).norm() < 1e-12);

    KMeansResult all = kmeans(points, 20, 5);
    CHECK(all.objective == doctest::Approx(0.0).epsilon(1e-18));

    CHECK_THROWS_AS(kmeans(points, 21, 5), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(points, 0, 5), std::invalid_argument);
}

TEST_CASE("kmeans recovers two well-separated blobs") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 100);
        MatX<double> points = blobs(rng, {vec2(-5, -5), vec2(5, 5)}, 25, 0.5);
        KMeansResult r = kmeans(points, 2, seed);
        bool pure = true;
        for (int i = 1; i < 25; ++i)
            if (r.assignment[i] != r.assignment[0]) pure = false;
        for (int i = 26; i < 50; ++i)
            if (r.assignment[i] != r.assignment[25]) pure = false;
        if (pure && r.assignment[0] != r.assignment[25]) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("single-component fit is the sample moments") {
    std::mt19937_64 rng(13);
    MatX<double> points = MatX<double>::Random(40, 2);
    HardEmDiagnostics diag;
    GaussianMixture gm = gmm_fit_em(points, 1, 3, &diag);
    CHECK(gm.weights(0) == 1.0);
    CHECK((gm.means.row(0) - points.colwise().mean()).norm() < 1e-12);
    VecX<double> expected_var =
        ((points.rowwise() - points.colwise().mean()).array().square().colwise().mean())
            .transpose()
            .matrix();
    CHECK((gm.variances.row(0).transpose() - expected_var).norm() < 1e-12);
}

TEST_CASE("hard-EM objective never decreases between stable iterations") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        std::mt19937_64 rng(seed * 31 + 7);
        MatX<double> points =
            blobs(rng, {vec2(-4, 0), vec2(4, 0), vec2(0, 6)}, 30, 0.8);
        HardEmDiagnostics diag;
        gmm_fit_em(points, 3, seed, &diag);
        REQUIRE_FALSE(diag.objectives.empty());
        for (std::size_t i = 1; i < diag.objectives.size(); ++i) {
            if (diag.reseeded[i]) continue;
            CHECK(diag.objectives[i] >= diag.objectives[i - 1] - 1e-9);
        }
    }
}

TEST_CASE("hard-EM recovers separated gaussians") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed + 500);
        MatX<double> points = blobs(rng, {vec2(-3, 0), vec2(3, 0)}, 40, 0.05);
        GaussianMixture gm = gmm_fit_em(points, 2, seed);
        double d1 = std::min((gm.means.row(0) - vec2(-3, 0).transpose()).norm(),
                             (gm.means.row(1) - vec2(-3, 0).transpose()).norm());
        double d2 = std::min((gm.means.row(0) - vec2(3, 0).transpose()).norm(),
                             (gm.means.row(1) - vec2(3, 0).transpose()).norm());
        if (d1 < 0.1 && d2 < 0.1) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("parameter counts match a brute-force enumeration") {
    for (int c = 1; c <= 5; ++c) {
        for (int d = 1; d <= 4; ++d) {
            // enumerate stored scalars: weights, means, covariance entries
            int weights = c;
            int means = c * d;
            CHECK(bic_param_count(c, d, CovarianceKind::DIAGONAL) ==
                  weights + means + c * d);
            CHECK(bic_param_count(c, d, CovarianceKind::FULL) ==
                  weights + means + c * d * d);
            CHECK(bic_param_count(c, d, CovarianceKind::SPHERICAL) ==
                  weights + means + c);
        }
    }
    CHECK(bic_param_count(3, 2, CovarianceKind::DIAGONAL) == 15);
    CHECK(bic_param_count(1, 1, CovarianceKind::DIAGONAL) == 3);
    CHECK(bic_param_count(1, 1, CovarianceKind::FULL) == 3);
    CHECK(bic_param_count(1, 1, CovarianceKind::SPHERICAL) == 3);
    CHECK(bic_param_count(2, 3, CovarianceKind::FULL) == 26);
}

TEST_CASE("BIC is recomputable from the returned mixture") {
    std::mt19937_64 rng(14);
    MatX<double> points = blobs(rng, {vec2(0, 0)}, 50, 1.0);
    BicSelection sel = select_components_bic(points, {1, 2}, 9);
    double recomputed = bic_score(points, sel.mixture);
    for (const auto& [c, bic] : sel.scores)
        if (c == sel.components) CHECK(bic == doctest::Approx(recomputed).epsilon(1e-9));
}

TEST_CASE("BIC picks one component for a single blob") {
    std::mt19937_64 rng(15);
    MatX<double> points = blobs(rng, {vec2(1, 1)}, 60, 0.5);
    BicSelection sel = select_components_bic(points, {1, 2, 3}, 4);
    CHECK(sel.components == 1);
}

TEST_CASE("BIC finds three separated blobs") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed * 131 + 1);
        MatX<double> points =
            blobs(rng, {vec2(-6, 0), vec2(6, 0), vec2(0, 9)}, 40, 0.6);
        BicSelection sel = select_components_bic(points, {1, 2, 3, 4, 5, 6}, seed);
        if (sel.components == 3) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("mixture JSON round-trips") {
    GaussianMixture gm;
    gm.weights = VecX<double>(2);
    gm.weights << 0.25, 0.75;
    gm.means = MatX<double>::Random(2, 3);
    gm.variances = MatX<double>::Random(2, 3).cwiseAbs() +
                   MatX<double>::Constant(2, 3, 0.1);
    auto path = std::filesystem::temp_directory_path() / "sentinel_gmm_test.json";
    save_mixture(path, gm);
    GaussianMixture back = load_mixture(path);
    CHECK((back.weights - gm.weights).norm() < 1e-15);
    CHECK((back.means - gm.means).norm() < 1e-15);
    CHECK((back.variances - gm.variances).norm() < 1e-15);
}

TEST_CASE("gmm ranking puts a planted outlier first") {
    std::mt19937_64 rng(16);
    MatX<double> points = blobs(rng, {vec2(0, 0)}, 30, 0.4);
    GaussianMixture gm = gmm_fit_em(points, 1, 2);

    MatX<double> embeddings(31, 2);
    embeddings.topRows(30) = points;
    embeddings.row(30) = vec2(25, -25).transpose(); // the outlier
    std::vector<ScoredTx> txs(31);
    for (int i = 0; i < 31; ++i) {
        txs[i].tx_hash = "0x" + std::to_string(i);
        txs[i].token_count = 4;
    }
    RankedReport r = gmm_rank("0xc", txs, embeddings, gm);
    CHECK(r.ranking[0].tx_hash == "0x30");

    // permutation invariance of the score multiset
    std::vector<ScoredTx> shuffled = txs;
    std::reverse(shuffled.begin(), shuffled.end());
    MatX<double> rev = embeddings.colwise().reverse();
    RankedReport r2 = gmm_rank("0xc", shuffled, rev, gm);
    CHECK(r2.ranking[0].tx_hash == "0x30");
}

TEST_CASE("trace length ranking flags the longest trace") {
    std::vector<EncodedTrace> traces(3);
    traces[0].tx_hash = "0xa";
    traces[0].full_token_count = 10;
    traces[1].tx_hash = "0xb";
    traces[1].full_token_count = 500;
    traces[2].tx_hash = "0xc";
    traces[2].full_token_count = 50;
    RankedReport r = trace_length_rank("0xd", traces);
    CHECK(r.ranking[0].tx_hash == "0xb");
    CHECK(r.ranking[1].tx_hash == "0xc");
    CHECK(r.ranking[2].tx_hash == "0xa");

    // ties fall back to hash order
    for (auto& t : traces) t.full_token_count = 7;
    RankedReport tie = trace_length_rank("0xd", traces);
    CHECK(tie.ranking[0].tx_hash == "0xa");
    CHECK(tie.ranking[1].tx_hash == "0xb");
    CHECK(tie.ranking[2].tx_hash == "0xc");

    // the alert interface carries over
    CHECK(alerts(tie, AlarmConfig::absolute(2)).size() == 2);
}

TEST_CASE("embedding files round-trip") {
    std::vector<std::string> names = {"0x1", "0x2", "0x3"};
    MatX<double> vecs = MatX<double>::Random(3, 5);
    auto path = std::filesystem::temp_directory_path() / "sentinel_emb_test.bin";
    save_embeddings(path, names, vecs);
    auto [back_names, back_vecs] = load_embeddings(path);
    CHECK(back_names == names);
    CHECK((back_vecs - vecs).norm() == 0.0);
}

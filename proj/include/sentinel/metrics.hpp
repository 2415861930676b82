#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/ids.hpp"

namespace sentinel {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Undefined rates (zero denominators) surface as empty optionals, never as
// silent zeros.
struct PrecisionRecallF1 {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& counts);
std::optional<double> f_beta(const ConfusionCounts& counts, double beta);

// Joint distribution of binary (attack, alert); cells indexed [x][y].
struct JointDistribution {
    std::array<std::array<double, 2>, 2> p{};

    double marginal_x(int x) const { return p[x][0] + p[x][1]; }
    double marginal_y(int y) const { return p[0][y] + p[1][y]; }
    void validate() const; // non-negative, sums to 1 within 1e-12
};

// Outcome costs in USD, indexed [x][y].
struct CostMatrix {
    std::array<std::array<double, 2>, 2> cost{};

    // Manual inspection of a flagged transaction versus a missed attack.
    static CostMatrix defaults() {
        CostMatrix m;
        m.cost[1][1] = 204.0;        // true positive: operator inspects
        m.cost[0][1] = 204.0;        // false positive: operator inspects
        m.cost[1][0] = 10'000'000.0; // false negative: attack succeeds
        m.cost[0][0] = 0.0;          // true negative
        return m;
    }
};

// Natural-log entropy of a Bernoulli marginal; 0 log 0 := 0.
double entropy(double p1);
double mutual_information(const JointDistribution& joint);

// I(X;Y) / H(X); empty when H(X) = 0.
std::optional<double> cid(const JointDistribution& joint);
std::optional<double> cost_aware_cid(const JointDistribution& joint,
                                     const CostMatrix& costs);

JointDistribution estimate_joint(const std::vector<std::pair<bool, bool>>& observations);

// ---------------------------------------------------------------------------
// Threshold sweep over per-contract rankings

struct ContractOutcome {
    std::string contract;
    std::size_t total_txs = 0;
    std::size_t adversarial_txs = 0;
    bool detected = false;     // at least one adversarial transaction alerted
    std::size_t false_positives = 0;
    double fpr = 0.0;          // false positives / benign transactions
};

struct ThresholdColumn {
    std::string label;     // e.g. "alpha_0.1" or "top_2"
    AlarmConfig config;
    std::vector<ContractOutcome> outcomes;
};

struct BucketRow {
    std::string label; // "0-99", "100-999", "1000-9999", "10000+", "overall"
    std::size_t min_txs = 0;
    std::size_t max_txs = 0; // inclusive; SIZE_MAX for the open bucket
    std::size_t contracts = 0;
    std::size_t attacks = 0; // contracts with at least one adversarial tx
    std::vector<std::size_t> detected;  // per column
    std::vector<double> avg_fpr;        // per column, as a fraction
    std::vector<double> avg_fp;         // per column
};

struct EvaluationTable {
    std::vector<std::string> columns;
    std::vector<BucketRow> rows; // four size buckets then overall
};

// Sweeps every alpha and top-k over each contract's ranking. Reports must
// carry ground-truth labels. `tag` restricts the sweep to contracts whose
// adversarial transactions carry that tag.
EvaluationTable evaluate_thresholds(const std::vector<RankedReport>& reports,
                                    const std::vector<double>& alphas,
                                    const std::vector<std::size_t>& top_ks,
                                    const std::string& tag = "");

// CSV: dataset_size,metric,<column...> with metric rows attacks_detected,
// avg_fpr_pct (3 decimals), avg_fp (1 decimal) per bucket.
void write_evaluation_csv(const EvaluationTable& table, std::ostream& out);
std::string evaluation_csv(const EvaluationTable& table);
void write_evaluation_json(const EvaluationTable& table, std::ostream& out);

}  // namespace sentinel

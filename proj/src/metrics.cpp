#include "sentinel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sentinel {

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
    PrecisionRecallF1 out;
    if (c.tp + c.fp > 0)
        out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0)
        out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (out.precision && out.recall && (*out.precision + *out.recall) > 0)
        out.f1 = 2.0 * *out.precision * *out.recall / (*out.precision + *out.recall);
    return out;
}

std::optional<double> f_beta(const ConfusionCounts& c, double beta) {
    if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
    PrecisionRecallF1 pr = precision_recall_f1(c);
    if (!pr.precision || !pr.recall) return std::nullopt;
    double b2 = beta * beta;
    double denom = b2 * *pr.precision + *pr.recall;
    if (denom == 0) return std::nullopt;
    return (1.0 + b2) * *pr.precision * *pr.recall / denom;
}

void JointDistribution::validate() const {
    double total = 0;
    for (const auto& row : p)
        for (double v : row) {
            if (v < 0) throw std::invalid_argument("joint probabilities must be >= 0");
            total += v;
        }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("joint probabilities must sum to 1");
}

namespace {
double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }
}  // namespace

double entropy(double p1) {
    if (p1 < 0 || p1 > 1) throw std::invalid_argument("probability out of range");
    return -xlogx(p1) - xlogx(1.0 - p1);
}

double mutual_information(const JointDistribution& joint) {
    joint.validate();
    double mi = 0.0;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            double pxy = joint.p[x][y];
            if (pxy <= 0) continue; // 0 log 0 = 0
            mi += pxy * std::log(pxy / (joint.marginal_x(x) * joint.marginal_y(y)));
        }
    return mi;
}

std::optional<double> cid(const JointDistribution& joint) {
    double hx = entropy(joint.marginal_x(1));
    if (hx <= 0) return std::nullopt;
    return mutual_information(joint) / hx;
}

std::optional<double> cost_aware_cid(const JointDistribution& joint,
                                     const CostMatrix& costs) {
    joint.validate();
    double total_cost = 0.0;
    for (const auto& row : costs.cost)
        for (double c : row) {
            if (c < 0) throw std::invalid_argument("costs must be non-negative");
            total_cost += c;
        }
    if (total_cost <= 0) throw std::invalid_argument("costs must not all be zero");
    double hx = entropy(joint.marginal_x(1));
    if (hx <= 0) return std::nullopt;

    double weighted = 0.0;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            double pxy = joint.p[x][y];
            if (pxy <= 0) continue;
            weighted += costs.cost[x][y] * pxy *
                        std::log(pxy / (joint.marginal_x(x) * joint.marginal_y(y)));
        }
    return (weighted / total_cost) / hx;
}

JointDistribution estimate_joint(const std::vector<std::pair<bool, bool>>& obs) {
    if (obs.empty()) throw std::invalid_argument("no observations");
    JointDistribution joint;
    for (auto [x, y] : obs) joint.p[x ? 1 : 0][y ? 1 : 0] += 1.0;
    for (auto& row : joint.p)
        for (double& v : row) v /= static_cast<double>(obs.size());
    return joint;
}

// ---------------------------------------------------------------------------

namespace {

ContractOutcome outcome_for(const RankedReport& report, const AlarmConfig& config) {
    ContractOutcome out;
    out.contract = report.contract;
    out.total_txs = report.ranking.size();
    std::size_t alerted = alert_count(config, report.ranking.size());
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        const ScoredTx& tx = report.ranking[i];
        if (!tx.label)
            throw std::invalid_argument("transaction " + tx.tx_hash +
                                        " carries no ground-truth label");
        bool adversarial = *tx.label == Label::ADVERSARIAL;
        if (adversarial) ++out.adversarial_txs;
        if (i < alerted) {
            if (adversarial)
                out.detected = true;
            else
                ++out.false_positives;
        }
    }
    std::size_t benign = out.total_txs - out.adversarial_txs;
    out.fpr = benign > 0 ? static_cast<double>(out.false_positives) /
                               static_cast<double>(benign)
                         : 0.0;
    return out;
}

bool has_tagged_attack(const RankedReport& report, const std::string& tag) {
    for (const ScoredTx& tx : report.ranking) {
        if (tx.label && *tx.label == Label::ADVERSARIAL &&
            std::find(tx.tags.begin(), tx.tags.end(), tag) != tx.tags.end())
            return true;
    }
    return false;
}

std::string format_alpha(double alpha) {
    std::ostringstream os;
    os << alpha;
    return os.str();
}

}  // namespace

EvaluationTable evaluate_thresholds(const std::vector<RankedReport>& reports,
                                    const std::vector<double>& alphas,
                                    const std::vector<std::size_t>& top_ks,
                                    const std::string& tag) {
    std::vector<const RankedReport*> selected;
    for (const auto& r : reports)
        if (tag.empty() || has_tagged_attack(r, tag)) selected.push_back(&r);

    std::vector<std::pair<std::string, AlarmConfig>> columns;
    for (double a : alphas)
        columns.emplace_back("alpha_" + format_alpha(a), AlarmConfig::percentage(a));
    for (std::size_t k : top_ks)
        columns.emplace_back("top_" + std::to_string(k), AlarmConfig::absolute(k));

    EvaluationTable table;
    for (const auto& [label, config] : columns) table.columns.push_back(label);

    std::vector<BucketRow> rows = {
        {"0-99", 0, 99},
        {"100-999", 100, 999},
        {"1000-9999", 1000, 9999},
        {"10000+", 10000, static_cast<std::size_t>(-1)},
        {"overall", 0, static_cast<std::size_t>(-1)},
    };
    for (auto& row : rows) {
        row.detected.assign(columns.size(), 0);
        row.avg_fpr.assign(columns.size(), 0.0);
        row.avg_fp.assign(columns.size(), 0.0);
    }

    for (const RankedReport* report : selected) {
        std::size_t total = report->ranking.size();
        bool has_attack = std::any_of(
            report->ranking.begin(), report->ranking.end(), [](const ScoredTx& tx) {
                return tx.label && *tx.label == Label::ADVERSARIAL;
            });
        for (auto& row : rows) {
            if (total < row.min_txs || total > row.max_txs) continue;
            ++row.contracts;
            if (has_attack) ++row.attacks;
        }
    }

    for (std::size_t col = 0; col < columns.size(); ++col) {
        for (const RankedReport* report : selected) {
            ContractOutcome outcome = outcome_for(*report, columns[col].second);
            for (auto& row : rows) {
                if (outcome.total_txs < row.min_txs || outcome.total_txs > row.max_txs)
                    continue;
                if (outcome.detected) ++row.detected[col];
                row.avg_fpr[col] += outcome.fpr;
                row.avg_fp[col] += static_cast<double>(outcome.false_positives);
            }
        }
    }
    for (auto& row : rows) {
        if (row.contracts == 0) continue;
        for (std::size_t col = 0; col < columns.size(); ++col) {
            row.avg_fpr[col] /= static_cast<double>(row.contracts);
            row.avg_fp[col] /= static_cast<double>(row.contracts);
        }
    }
    table.rows = std::move(rows);
    return table;
}

void write_evaluation_csv(const EvaluationTable& table, std::ostream& out) {
    out << "dataset_size,metric";
    for (const auto& c : table.columns) out << ',' << c;
    out << '\n';
    char buf[64];
    for (const auto& row : table.rows) {
        out << row.label << ",attacks_detected";
        for (std::size_t c = 0; c < table.columns.size(); ++c)
            out << ',' << row.detected[c];
        out << '\n';
        out << row.label << ",avg_fpr_pct";
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.3f", row.avg_fpr[c] * 100.0);
            out << ',' << buf;
        }
        out << '\n';
        out << row.label << ",avg_fp";
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.1f", row.avg_fp[c]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::string evaluation_csv(const EvaluationTable& table) {
    std::ostringstream os;
    write_evaluation_csv(table, os);
    return os.str();
}

void write_evaluation_json(const EvaluationTable& table, std::ostream& out) {
    nlohmann::json j;
    j["columns"] = table.columns;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : table.rows) {
        j["rows"].push_back({{"dataset_size", row.label},
                             {"contracts", row.contracts},
                             {"attacks", row.attacks},
                             {"attacks_detected", row.detected},
                             {"avg_fpr", row.avg_fpr},
                             {"avg_fp", row.avg_fp}});
    }
    out << j.dump(2) << '\n';
}

}  // namespace sentinel

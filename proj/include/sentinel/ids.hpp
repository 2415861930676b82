#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sentinel/tokenizer.hpp"

namespace sentinel {

struct ScoredTx {
    std::string tx_hash;
    std::string contract;
    double log_likelihood = 0.0;
    std::size_t token_count = 0; // tokens actually scored
    std::optional<Label> label;
    std::vector<std::string> tags;
};

// Most abnormal first: ascending log-likelihood, ties broken by token count
// (longer first), then tx hash.
struct RankedReport {
    std::string contract;
    std::vector<ScoredTx> ranking;
};

enum class AlarmMode { PERCENTAGE, ABSOLUTE };

struct AlarmConfig {
    AlarmMode mode = AlarmMode::PERCENTAGE;
    double alpha = 1.0; // percent, (0, 100]
    std::size_t top_k = 1;

    static AlarmConfig percentage(double alpha);
    static AlarmConfig absolute(std::size_t k);
};

RankedReport rank(const std::string& contract, std::vector<ScoredTx> scores);

// Alert count for a ranking of n entries under the config; alerts are always
// the first `count` entries of the ranking.
std::size_t alert_count(const AlarmConfig& config, std::size_t n);

std::vector<ScoredTx> alerts(const RankedReport& report, const AlarmConfig& config);

// CSV: rank,tx_hash,log_likelihood,token_count,alert
void write_report_csv(const RankedReport& report, const AlarmConfig& config,
                      std::ostream& out);
void write_report_csv(const RankedReport& report, const AlarmConfig& config,
                      const std::filesystem::path& path);

// POSTs each alert row as a JSON object to the given URL.
void post_alerts_webhook(const RankedReport& report, const AlarmConfig& config,
                         const std::string& url);

// Scores file: contract,tx_hash,log_likelihood,token_count,label,tags with
// tags ';'-joined and an empty label for unlabeled transactions.
void write_scores_csv(const std::vector<ScoredTx>& scores,
                      const std::filesystem::path& path);
std::vector<ScoredTx> read_scores_csv(const std::filesystem::path& path);

// Groups by contract (in first-seen order) and ranks each group.
std::vector<RankedReport> rank_by_contract(const std::vector<ScoredTx>& scores);

// Scores one contract's transactions with any scalar scoring function;
// used with trace_log_likelihood over a loaded model. Deliberately takes the
// encoded traces so scoring stays order-independent and parallelizable.
template <class ScoreFn>
std::vector<ScoredTx> score_contract_history(const std::vector<EncodedTrace>& traces,
                                             ScoreFn&& score) {
    std::vector<ScoredTx> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        ScoredTx s;
        s.tx_hash = t.tx_hash;
        s.contract = t.contract;
        s.log_likelihood = static_cast<double>(score(t));
        s.token_count = t.ids.size();
        s.label = t.label;
        s.tags = t.tags;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace sentinel

#include "sentinel/ids.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace sentinel {

AlarmConfig AlarmConfig::percentage(double alpha) {
    if (!(alpha > 0.0) || alpha > 100.0)
        throw std::invalid_argument("alarm percentage must be in (0, 100]");
    return AlarmConfig{AlarmMode::PERCENTAGE, alpha, 0};
}

AlarmConfig AlarmConfig::absolute(std::size_t k) {
    if (k < 1) throw std::invalid_argument("top-k must be at least 1");
    return AlarmConfig{AlarmMode::ABSOLUTE, 0.0, k};
}

RankedReport rank(const std::string& contract, std::vector<ScoredTx> scores) {
    for (const auto& s : scores)
        if (!std::isfinite(s.log_likelihood))
            throw std::invalid_argument("non-finite score for " + s.tx_hash);
    std::sort(scores.begin(), scores.end(), [](const ScoredTx& a, const ScoredTx& b) {
        if (a.log_likelihood != b.log_likelihood)
            return a.log_likelihood < b.log_likelihood;
        if (a.token_count != b.token_count) return a.token_count > b.token_count;
        return a.tx_hash < b.tx_hash;
    });
    return RankedReport{contract, std::move(scores)};
}

std::size_t alert_count(const AlarmConfig& config, std::size_t n) {
    if (config.mode == AlarmMode::PERCENTAGE) {
        if (!(config.alpha > 0.0) || config.alpha > 100.0)
            throw std::invalid_argument("alarm percentage must be in (0, 100]");
        // Ceiling, so any positive threshold inspects at least one entry.
        auto count = static_cast<std::size_t>(
            std::ceil(config.alpha / 100.0 * static_cast<double>(n)));
        return std::min(n, count);
    }
    return std::min(n, config.top_k);
}

std::vector<ScoredTx> alerts(const RankedReport& report, const AlarmConfig& config) {
    std::size_t count = alert_count(config, report.ranking.size());
    return {report.ranking.begin(),
            report.ranking.begin() + static_cast<std::ptrdiff_t>(count)};
}

void write_report_csv(const RankedReport& report, const AlarmConfig& config,
                      std::ostream& out) {
    std::size_t alerted = alert_count(config, report.ranking.size());
    out << "rank,tx_hash,log_likelihood,token_count,alert\n";
    char buf[64];
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        const ScoredTx& s = report.ranking[i];
        std::snprintf(buf, sizeof(buf), "%.9f", s.log_likelihood);
        out << (i + 1) << ',' << s.tx_hash << ',' << buf << ',' << s.token_count << ','
            << (i < alerted ? 1 : 0) << '\n';
    }
}

void write_report_csv(const RankedReport& report, const AlarmConfig& config,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_report_csv(report, config, out);
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

void write_scores_csv(const std::vector<ScoredTx>& scores,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "contract,tx_hash,log_likelihood,token_count,label,tags\n";
    char buf[64];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof(buf), "%.9f", s.log_likelihood);
        out << s.contract << ',' << s.tx_hash << ',' << buf << ',' << s.token_count
            << ',' << (s.label ? to_string(*s.label) : "") << ',';
        for (std::size_t i = 0; i < s.tags.size(); ++i)
            out << (i ? ";" : "") << s.tags[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

std::vector<ScoredTx> read_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<ScoredTx> scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue; // header
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t pos = 0; pos <= line.size(); ++pos) {
            if (pos == line.size() || line[pos] == ',') {
                fields.push_back(line.substr(start, pos - start));
                start = pos + 1;
            }
        }
        if (fields.size() != 6)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 6 columns");
        ScoredTx s;
        s.contract = fields[0];
        s.tx_hash = fields[1];
        s.log_likelihood = std::stod(fields[2]);
        s.token_count = std::stoull(fields[3]);
        if (fields[4] == "benign") s.label = Label::BENIGN;
        else if (fields[4] == "adversarial") s.label = Label::ADVERSARIAL;
        else if (!fields[4].empty())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": bad label '" + fields[4] + "'");
        std::size_t tag_start = 0;
        const std::string& tags = fields[5];
        while (tag_start < tags.size()) {
            std::size_t semi = tags.find(';', tag_start);
            if (semi == std::string::npos) semi = tags.size();
            if (semi > tag_start) s.tags.push_back(tags.substr(tag_start, semi - tag_start));
            tag_start = semi + 1;
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

std::vector<RankedReport> rank_by_contract(const std::vector<ScoredTx>& scores) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<ScoredTx>> grouped;
    for (const auto& s : scores) {
        if (grouped.find(s.contract) == grouped.end()) order.push_back(s.contract);
        grouped[s.contract].push_back(s);
    }
    std::vector<RankedReport> reports;
    reports.reserve(order.size());
    for (const auto& contract : order)
        reports.push_back(rank(contract, std::move(grouped[contract])));
    return reports;
}

void post_alerts_webhook(const RankedReport& report, const AlarmConfig& config,
                         const std::string& url) {
    auto split = url.find('/', url.find("//") + 2);
    std::string host = split == std::string::npos ? url : url.substr(0, split);
    std::string path = split == std::string::npos ? "/" : url.substr(split);

    httplib::Client client(host);
    std::size_t alerted = alert_count(config, report.ranking.size());
    for (std::size_t i = 0; i < alerted; ++i) {
        const ScoredTx& s = report.ranking[i];
        nlohmann::json row = {{"rank", i + 1},
                              {"contract", report.contract},
                              {"tx_hash", s.tx_hash},
                              {"log_likelihood", s.log_likelihood},
                              {"token_count", s.token_count}};
        auto res = client.Post(path, row.dump(), "application/json");
        if (!res || res->status >= 300)
            throw std::runtime_error("webhook POST to " + url + " failed");
    }
}

}  // namespace sentinel

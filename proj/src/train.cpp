#include "sentinel/train.hpp"

#include <json.hpp>

namespace sentinel {

std::string TrainConfig::to_json() const {
    nlohmann::json j = {{"seed", seed},
                        {"max_steps", max_steps},
                        {"batch_packs", batch_packs},
                        {"pack_len", pack_len},
                        {"learning_rate", learning_rate},
                        {"weight_decay", weight_decay},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"epsilon", epsilon},
                        {"grad_clip_norm", grad_clip_norm},
                        {"warmup_steps", warmup_steps},
                        {"plateau_patience", plateau_patience},
                        {"plateau_tolerance", plateau_tolerance}};
    return j.dump();
}

Batch pack_minibatch(const std::vector<const EncodedTrace*>& traces, int max_len) {
    std::vector<std::size_t> order(traces.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return traces[a]->ids.size() > traces[b]->ids.size();
    });

    std::vector<std::vector<const EncodedTrace*>> bins;
    std::vector<int> remaining;
    for (std::size_t idx : order) {
        const EncodedTrace* t = traces[idx];
        int len = static_cast<int>(t->ids.size());
        if (len > max_len)
            throw std::invalid_argument("trace " + t->tx_hash + " has " +
                                        std::to_string(len) +
                                        " tokens, above the pack budget of " +
                                        std::to_string(max_len));
        bool placed = false;
        for (std::size_t b = 0; b < bins.size(); ++b) {
            if (remaining[b] >= len) {
                bins[b].push_back(t);
                remaining[b] -= len;
                placed = true;
                break;
            }
        }
        if (!placed) {
            bins.push_back({t});
            remaining.push_back(max_len - len);
        }
    }

    Batch batch;
    batch.packs.reserve(bins.size());
    for (const auto& bin : bins) {
        // Context slots add one position per trace beyond the token budget.
        batch.packs.push_back(
            make_packed_input(bin, max_len + static_cast<int>(bin.size())));
    }
    return batch;
}

Batch pack_epoch(const std::vector<EncodedTrace>& corpus, std::mt19937_64& rng,
                 int pack_len) {
    std::vector<const EncodedTrace*> ptrs(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) ptrs[i] = &corpus[i];
    std::shuffle(ptrs.begin(), ptrs.end(), rng);
    return pack_minibatch(ptrs, pack_len);
}

}  // namespace sentinel

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentinel/baselines.hpp"
#include "sentinel/ids.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/model.hpp"
#include "sentinel/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sentinel;

namespace {

constexpr const char* kVersion = "trace-sentinel 0.1.0";

// FNV-1a over file bytes, for the run manifests.
std::string digest_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

// Every artifact-producing command records how the artifact was made.
void write_manifest(const fs::path& artifact, const std::string& command,
                    const json& config, const std::vector<fs::path>& inputs) {
    json m;
    m["tool"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    json in = json::object();
    for (const auto& p : inputs) in[p.string()] = digest_file(p);
    m["inputs"] = std::move(in);
    m["artifact"] = artifact.string();
    auto now = std::chrono::system_clock::now().time_since_epoch();
    m["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
    std::ofstream out(artifact.string() + ".manifest.json");
    out << m.dump(2) << '\n';
}

std::vector<EncodedTrace> encode_corpus(const fs::path& corpus_path,
                                        const Vocabulary& vocab, std::size_t max_len,
                                        int max_depth) {
    std::vector<EncodedTrace> encoded;
    for (const RawTrace& t : parse_trace_file(corpus_path))
        encoded.push_back(
            encode_trace(t, vocab, max_len, static_cast<std::uint8_t>(max_depth)));
    return encoded;
}

// Packed scoring of a whole corpus; log-likelihoods come back in corpus
// order. Masking keeps every packed trace's score equal to solo scoring.
template <class T>
std::vector<double> score_corpus(const ModelParams<T>& params,
                                 const std::vector<EncodedTrace>& traces,
                                 long long* scored_tokens = nullptr) {
    std::vector<const EncodedTrace*> ptrs;
    for (const auto& t : traces)
        if (!t.ids.empty()) ptrs.push_back(&t);
    Batch batch = pack_minibatch(ptrs, params.config.max_seq);

    std::map<const EncodedTrace*, double> by_trace;
    long long tokens = 0;
    for (const PackedInput& pack : batch.packs) {
        auto per_segment = score_pack(params, pack);
        for (std::size_t s = 0; s < per_segment.size(); ++s) {
            double total = 0;
            for (double v : per_segment[s]) total += v;
            by_trace[pack.members[s]] = total;
            tokens += static_cast<long long>(per_segment[s].size());
        }
    }
    if (scored_tokens) *scored_tokens = tokens;

    std::vector<double> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        auto it = by_trace.find(&t);
        out.push_back(it == by_trace.end() ? 0.0 : it->second);
    }
    return out;
}

std::vector<ScoredTx> scored_rows(const std::vector<EncodedTrace>& traces,
                                  const std::vector<double>& lls) {
    std::vector<ScoredTx> rows;
    rows.reserve(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
        ScoredTx s;
        s.tx_hash = traces[i].tx_hash;
        s.contract = traces[i].contract;
        s.log_likelihood = lls[i];
        s.token_count = traces[i].ids.size();
        s.label = traces[i].label;
        s.tags = traces[i].tags;
        rows.push_back(std::move(s));
    }
    return rows;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start < csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(std::stod(csv.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

int run_gradcheck(int d_model, int n_heads, int n_layers, int d_ff, int vocab,
                  double step, double threshold, std::uint64_t seed) {
    ModelConfig config;
    config.d_model = d_model;
    config.n_heads = n_heads;
    config.n_layers = n_layers;
    config.d_ff = d_ff;
    config.max_seq = 64;
    config.vocab_size = vocab;
    config.max_depth = 8;
    ModelParams<double> params = init_params<double>(config, seed);

    std::mt19937_64 rng(seed ^ 0xabcdef);
    std::uniform_int_distribution<int> tok(0, vocab - 1);
    std::uniform_int_distribution<int> role(0, static_cast<int>(kContextRoleCount) - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<EncodedTrace> traces(2);
    for (std::size_t t = 0; t < traces.size(); ++t) {
        traces[t].tx_hash = "0x" + std::to_string(t);
        int len = 10 + static_cast<int>(t) * 7;
        TreePath p;
        for (int i = 0; i < len; ++i) {
            traces[t].ids.push_back(tok(rng));
            traces[t].paths.push_back(p);
            traces[t].roles.push_back(static_cast<ContextRole>(role(rng)));
            if (p.length < 7 && coin(rng)) p = p.child(coin(rng));
        }
    }
    Batch batch = pack_minibatch({&traces[0], &traces[1]}, config.max_seq);

    auto report = finite_difference_check(params, batch.packs, step);
    double worst = 0;
    for (const auto& group : report) {
        std::printf("%-24s max_rel_err %.3e\n", group.name.c_str(), group.max_rel_error);
        worst = std::max(worst, group.max_rel_error);
    }
    bool pass = worst < threshold;
    std::printf("max relative error %.3e over %zu parameter groups: %s\n", worst,
                report.size(), pass ? "PASS" : "FAIL");
    return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transaction-trace anomaly ranking"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "Read options from a TOML file");
    app.require_subcommand(1);

    // ---- ingest ----------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Fetch traces over RPC into a JSONL corpus");
    std::string endpoint;
    std::vector<std::string> tx_hashes;
    std::string tx_file;
    std::string ingest_out = "corpus.jsonl";
    int retries = 3;
    ingest->add_option("--endpoint", endpoint, "Archive node URL")
        ->envname("TRACE_SENTINEL_RPC");
    ingest->add_option("--tx", tx_hashes, "Transaction hash (repeatable)");
    ingest->add_option("--tx-file", tx_file, "File with one transaction hash per line");
    ingest->add_option("--out", ingest_out, "Output JSONL path");
    ingest->add_option("--retries", retries, "Transport retry budget");

    // ---- vocab -----------------------------------------------------------
    auto* vocab_cmd = app.add_subcommand("vocab", "Build the frequency-capped vocabulary");
    std::string corpus_path, vocab_out = "vocab.tsv";
    std::size_t vocab_cap = 100000;
    int max_depth = 64;
    vocab_cmd->add_option("--corpus", corpus_path, "JSONL corpus")->required();
    vocab_cmd->add_option("--out", vocab_out, "Output TSV path");
    vocab_cmd->add_option("--cap", vocab_cap, "Maximum non-special vocabulary size");
    vocab_cmd->add_option("--max-depth", max_depth, "Maximum binarized tree depth");

    // ---- train -----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Train the trace language model");
    std::string train_corpus, train_vocab, ckpt_out = "model.ckpt", loss_log;
    ModelConfig mc; // d_model 128, 4 heads, 8 layers, d_ff 512, max_seq 512
    TrainConfig tc;
    train_cmd->add_option("--corpus", train_corpus, "JSONL corpus")->required();
    train_cmd->add_option("--vocab", train_vocab, "Vocabulary TSV")->required();
    train_cmd->add_option("--out", ckpt_out, "Checkpoint path");
    train_cmd->add_option("--log", loss_log, "Per-step CSV loss log");
    train_cmd->add_option("--d-model", mc.d_model, "Embedding width");
    train_cmd->add_option("--heads", mc.n_heads, "Attention heads");
    train_cmd->add_option("--layers", mc.n_layers, "Encoder layers");
    train_cmd->add_option("--d-ff", mc.d_ff, "Feed-forward width");
    train_cmd->add_option("--max-seq", mc.max_seq, "Tokens per trace and per pack");
    train_cmd->add_option("--max-depth", mc.max_depth, "Maximum binarized tree depth");
    train_cmd->add_option("--steps", tc.max_steps, "Optimizer steps");
    train_cmd->add_option("--batch-packs", tc.batch_packs, "Packs per mini-batch");
    train_cmd->add_option("--lr", tc.learning_rate, "Peak learning rate");
    train_cmd->add_option("--weight-decay", tc.weight_decay, "Decoupled weight decay");
    train_cmd->add_option("--warmup", tc.warmup_steps, "Linear warmup steps");
    train_cmd->add_option("--clip", tc.grad_clip_norm, "Gradient clip norm (0 = off)");
    train_cmd->add_option("--seed", tc.seed, "RNG seed");
    train_cmd->add_option("--checkpoint-every", tc.checkpoint_every,
                          "Also checkpoint every N steps (0 = final only)");
    train_cmd->add_option("--plateau-patience", tc.plateau_patience,
                          "Stop after N steps without improvement (0 = off)");

    // ---- score -----------------------------------------------------------
    auto* score_cmd = app.add_subcommand("score", "Log-likelihood per transaction");
    std::string score_corpus_path, score_vocab, score_ckpt, scores_out = "scores.csv";
    score_cmd->add_option("--corpus", score_corpus_path, "JSONL corpus")->required();
    score_cmd->add_option("--vocab", score_vocab, "Vocabulary TSV")->required();
    score_cmd->add_option("--ckpt", score_ckpt, "Model checkpoint")->required();
    score_cmd->add_option("--out", scores_out, "Scores CSV path");

    // ---- rank ------------------------------------------------------------
    auto* rank_cmd = app.add_subcommand("rank", "Rank one contract's transactions");
    std::string rank_scores, rank_contract, report_out = "report.csv", webhook;
    double rank_alpha = 0.0;
    std::size_t rank_topk = 0;
    bool per_token = false;
    rank_cmd->add_option("--scores", rank_scores, "Scores CSV from `score`")->required();
    rank_cmd->add_option("--contract", rank_contract,
                         "Contract to rank (optional when the file has one)");
    rank_cmd->add_option("--alpha", rank_alpha, "Percentage alarm threshold (0,100]");
    rank_cmd->add_option("--topk", rank_topk, "Absolute alarm threshold");
    rank_cmd->add_flag("--per-token", per_token,
                       "Rank by per-token instead of whole-trace log-likelihood");
    rank_cmd->add_option("--out", report_out, "Report CSV path");
    rank_cmd->add_option("--webhook", webhook, "POST alert rows to this URL");

    // ---- eval ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Threshold sweep over labeled scores");
    std::string eval_scores, eval_out = "eval.csv", eval_alpha = "0.01,0.1,0.5,1,10";
    std::string eval_topk = "1,2,3", eval_tag, eval_format = "csv";
    eval_cmd->add_option("--scores", eval_scores, "Scores CSV with labels")->required();
    eval_cmd->add_option("--alpha", eval_alpha, "Comma-separated percentage thresholds");
    eval_cmd->add_option("--topk", eval_topk, "Comma-separated absolute thresholds");
    eval_cmd->add_option("--tag", eval_tag, "Only contracts whose attacks carry this tag");
    eval_cmd->add_option("--format", eval_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    eval_cmd->add_option("--out", eval_out, "Output table path");

    // ---- baseline --------------------------------------------------------
    auto* baseline = app.add_subcommand("baseline", "Benchmark rankers");
    baseline->require_subcommand(1);

    auto* d2v = baseline->add_subcommand("doc2vec", "Train document embeddings");
    std::string d2v_corpus, d2v_out = "embeddings.bin", d2v_mode = "pv-dbow",
                d2v_sampler = "negative";
    Doc2VecConfig d2v_config;
    d2v->add_option("--corpus", d2v_corpus, "JSONL corpus")->required();
    d2v->add_option("--out", d2v_out, "Embedding file path");
    d2v->add_option("--dim", d2v_config.dim, "Embedding dimension");
    d2v->add_option("--epochs", d2v_config.epochs, "Training epochs");
    d2v->add_option("--negatives", d2v_config.negatives, "Negative samples per step");
    d2v->add_option("--window", d2v_config.window, "Context window (PV-DM)");
    d2v->add_option("--lr", d2v_config.learning_rate, "Learning rate");
    d2v->add_option("--seed", d2v_config.seed, "RNG seed");
    d2v->add_option("--mode", d2v_mode, "pv-dbow or pv-dm")
        ->check(CLI::IsMember({"pv-dbow", "pv-dm"}));
    d2v->add_option("--sampler", d2v_sampler, "negative or hierarchical")
        ->check(CLI::IsMember({"negative", "hierarchical"}));

    auto* gmm_cmd = baseline->add_subcommand("gmm", "Mixture-model ranking over embeddings");
    std::string gmm_embeddings, gmm_scores, gmm_report = "gmm_report.csv", gmm_mixture_out;
    std::string gmm_components = "1,2,3,4,5,6";
    std::string gmm_contract;
    std::uint64_t gmm_seed = 1;
    double gmm_alpha = 0.0;
    std::size_t gmm_topk = 0;
    gmm_cmd->add_option("--embeddings", gmm_embeddings, "Embedding file")->required();
    gmm_cmd->add_option("--scores", gmm_scores, "Scores CSV carrying metadata")->required();
    gmm_cmd->add_option("--contract", gmm_contract, "Contract to rank");
    gmm_cmd->add_option("--components", gmm_components, "Candidate component counts");
    gmm_cmd->add_option("--seed", gmm_seed, "RNG seed");
    gmm_cmd->add_option("--alpha", gmm_alpha, "Percentage alarm threshold");
    gmm_cmd->add_option("--topk", gmm_topk, "Absolute alarm threshold");
    gmm_cmd->add_option("--out", gmm_report, "Report CSV path");
    gmm_cmd->add_option("--mixture-out", gmm_mixture_out, "Also save the fitted mixture");

    auto* len_cmd = baseline->add_subcommand("length", "Trace-length heuristic ranking");
    std::string len_corpus, len_report = "length_report.csv", len_contract;
    double len_alpha = 0.0;
    std::size_t len_topk = 0;
    int len_depth = 64;
    len_cmd->add_option("--corpus", len_corpus, "JSONL corpus")->required();
    len_cmd->add_option("--contract", len_contract, "Contract to rank");
    len_cmd->add_option("--alpha", len_alpha, "Percentage alarm threshold");
    len_cmd->add_option("--topk", len_topk, "Absolute alarm threshold");
    len_cmd->add_option("--max-depth", len_depth, "Maximum binarized tree depth");
    len_cmd->add_option("--out", len_report, "Report CSV path");

    // ---- gradcheck -------------------------------------------------------
    auto* gradcheck =
        app.add_subcommand("gradcheck", "Verify gradients with central differences");
    int gc_d_model = 32, gc_heads = 4, gc_layers = 2, gc_ff = 64, gc_vocab = 48;
    double gc_step = 1e-4, gc_threshold = 1e-4;
    std::uint64_t gc_seed = 7;
    gradcheck->add_option("--d-model", gc_d_model, "Embedding width");
    gradcheck->add_option("--heads", gc_heads, "Attention heads");
    gradcheck->add_option("--layers", gc_layers, "Encoder layers");
    gradcheck->add_option("--d-ff", gc_ff, "Feed-forward width");
    gradcheck->add_option("--vocab", gc_vocab, "Vocabulary size");
    gradcheck->add_option("--step", gc_step, "Finite-difference step");
    gradcheck->add_option("--threshold", gc_threshold, "Max relative error to pass");
    gradcheck->add_option("--seed", gc_seed, "RNG seed");

    // ---- bench -----------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Scoring throughput on this machine");
    std::string bench_corpus, bench_vocab, bench_ckpt;
    int bench_repeat = 3;
    bench->add_option("--corpus", bench_corpus, "JSONL corpus")->required();
    bench->add_option("--vocab", bench_vocab, "Vocabulary TSV")->required();
    bench->add_option("--ckpt", bench_ckpt, "Model checkpoint")->required();
    bench->add_option("--repeat", bench_repeat, "Scoring passes to time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1; // usage problems exit 1
    }

    try {
        if (*ingest) {
            if (endpoint.empty()) {
                std::cerr << "ingest: no endpoint (use --endpoint or TRACE_SENTINEL_RPC)\n";
                return 1;
            }
            std::vector<std::string> hashes = tx_hashes;
            if (!tx_file.empty()) {
                std::ifstream in(tx_file);
                if (!in) throw std::runtime_error("cannot open " + tx_file);
                std::string line;
                while (std::getline(in, line))
                    if (!line.empty()) hashes.push_back(line);
            }
            if (hashes.empty()) {
                std::cerr << "ingest: no transaction hashes given\n";
                return 1;
            }
            RpcClient client(RpcConfig{.endpoint = endpoint, .max_retries = retries});
            std::vector<RawTrace> traces;
            for (const auto& h : hashes) traces.push_back(client.fetch_trace(h));
            write_trace_file(ingest_out, traces);
            write_manifest(ingest_out, "ingest",
                           {{"endpoint", endpoint}, {"transactions", hashes.size()}}, {});
            std::cout << "wrote " << traces.size() << " traces to " << ingest_out << '\n';
        } else if (*vocab_cmd) {
            std::vector<std::vector<std::string>> streams;
            for (const RawTrace& t : parse_trace_file(corpus_path))
                for (auto& s : trace_token_streams(t, static_cast<std::uint8_t>(max_depth)))
                    streams.push_back(std::move(s));
            Vocabulary vocab = build_vocab(streams, vocab_cap);
            vocab.save_tsv(vocab_out);
            write_manifest(vocab_out, "vocab", {{"cap", vocab_cap}, {"size", vocab.size()}},
                           {corpus_path});
            std::cout << "vocabulary of " << vocab.size() << " tokens -> " << vocab_out
                      << '\n';
        } else if (*train_cmd) {
            Vocabulary vocab = Vocabulary::load_tsv(train_vocab);
            mc.vocab_size = static_cast<int>(vocab.size());
            mc.validate();
            tc.pack_len = mc.max_seq;
            auto corpus = encode_corpus(train_corpus, vocab, mc.max_seq, mc.max_depth);

            std::ofstream log;
            if (!loss_log.empty()) {
                log.open(loss_log);
                log << "step,loss,tokens_per_sec\n";
            }
            fs::path ckpt_path(ckpt_out);
            ModelParams<float> params;
            TrainCallbacks callbacks;
            callbacks.on_step = [&](const TrainStepLog& entry) {
                if (log.is_open()) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.1f", entry.step, entry.loss,
                                  entry.tokens_per_sec);
                    log << buf << '\n';
                }
                if (entry.step % 50 == 0 || entry.step == 1)
                    std::cout << "step " << entry.step << " loss " << entry.loss << '\n';
            };
            params = train<float>(corpus, mc, tc, nullptr, callbacks);
            save_checkpoint(params, ckpt_path, tc.to_json());
            write_manifest(ckpt_path, "train",
                           json::parse("{\"model\":" + mc.to_json() +
                                       ",\"train\":" + tc.to_json() + "}"),
                           {train_corpus, train_vocab});
            std::cout << "checkpoint -> " << ckpt_out << '\n';
        } else if (*score_cmd) {
            Vocabulary vocab = Vocabulary::load_tsv(score_vocab);
            ModelParams<float> params = load_checkpoint<float>(score_ckpt);
            auto corpus = encode_corpus(score_corpus_path, vocab, params.config.max_seq,
                                        params.config.max_depth);
            auto lls = score_corpus(params, corpus);
            write_scores_csv(scored_rows(corpus, lls), scores_out);
            write_manifest(scores_out, "score", {{"transactions", corpus.size()}},
                           {score_corpus_path, score_vocab, score_ckpt});
            std::cout << corpus.size() << " scores -> " << scores_out << '\n';
        } else if (*rank_cmd) {
            std::vector<ScoredTx> scores = read_scores_csv(rank_scores);
            if (per_token)
                for (auto& s : scores)
                    if (s.token_count > 0)
                        s.log_likelihood /= static_cast<double>(s.token_count);
            auto reports = rank_by_contract(scores);
            const RankedReport* chosen = nullptr;
            if (!rank_contract.empty()) {
                for (const auto& r : reports)
                    if (r.contract == rank_contract) chosen = &r;
                if (!chosen)
                    throw std::runtime_error("contract " + rank_contract +
                                             " not present in " + rank_scores);
            } else if (reports.size() == 1) {
                chosen = &reports.front();
            } else {
                std::cerr << "rank: scores cover " << reports.size()
                          << " contracts; pick one with --contract\n";
                return 1;
            }
            AlarmConfig alarm =
                rank_topk > 0 ? AlarmConfig::absolute(rank_topk)
                              : AlarmConfig::percentage(rank_alpha > 0 ? rank_alpha : 1.0);
            write_report_csv(*chosen, alarm, fs::path(report_out));
            if (!webhook.empty()) post_alerts_webhook(*chosen, alarm, webhook);
            write_manifest(report_out, "rank",
                           {{"contract", chosen->contract},
                            {"mode", rank_topk > 0 ? "topk" : "alpha"}},
                           {rank_scores});
            std::cout << chosen->ranking.size() << " transactions ranked -> " << report_out
                      << '\n';
        } else if (*eval_cmd) {
            auto reports = rank_by_contract(read_scores_csv(eval_scores));
            EvaluationTable table =
                evaluate_thresholds(reports, parse_double_list(eval_alpha),
                                    parse_size_list(eval_topk), eval_tag);
            std::ofstream out(eval_out);
            if (!out) throw std::runtime_error("cannot open " + eval_out);
            if (eval_format == "csv")
                write_evaluation_csv(table, out);
            else
                write_evaluation_json(table, out);
            write_manifest(eval_out, "eval",
                           {{"alpha", eval_alpha}, {"topk", eval_topk}, {"tag", eval_tag}},
                           {eval_scores});
            std::cout << "evaluation table -> " << eval_out << '\n';
        } else if (*d2v) {
            d2v_config.mode = d2v_mode == "pv-dm" ? Doc2VecMode::PV_DM : Doc2VecMode::PV_DBOW;
            d2v_config.sampler = d2v_sampler == "hierarchical"
                                     ? Doc2VecSampler::HIERARCHICAL
                                     : Doc2VecSampler::NEGATIVE;
            std::vector<std::vector<std::string>> docs;
            std::vector<std::string> names;
            for (const RawTrace& t : parse_trace_file(d2v_corpus)) {
                docs.push_back(flatten_trace(t));
                names.push_back(t.tx_hash);
            }
            Doc2VecModel model = train_doc2vec(docs, d2v_config);
            save_embeddings(d2v_out, names, model.doc_vecs);
            write_manifest(d2v_out, "baseline doc2vec",
                           {{"dim", d2v_config.dim},
                            {"mode", d2v_mode},
                            {"sampler", d2v_sampler},
                            {"seed", d2v_config.seed}},
                           {d2v_corpus});
            std::cout << docs.size() << " documents embedded -> " << d2v_out << '\n';
        } else if (*gmm_cmd) {
            auto [names, vecs] = load_embeddings(gmm_embeddings);
            std::vector<ScoredTx> meta = read_scores_csv(gmm_scores);
            std::map<std::string, const ScoredTx*> by_hash;
            for (const auto& s : meta) by_hash[s.tx_hash] = &s;

            std::vector<ScoredTx> txs;
            MatX<double> rows(vecs.rows(), vecs.cols());
            Eigen::Index kept = 0;
            std::string contract = gmm_contract;
            for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
                auto it = by_hash.find(names[i]);
                if (it == by_hash.end()) continue;
                if (!contract.empty() && it->second->contract != contract) continue;
                if (contract.empty()) contract = it->second->contract;
                txs.push_back(*it->second);
                rows.row(kept++) = vecs.row(i);
            }
            if (txs.empty())
                throw std::runtime_error("no embeddings match the scores file");
            rows.conservativeResize(kept, Eigen::NoChange);

            std::vector<int> candidates;
            for (double v : parse_double_list(gmm_components))
                candidates.push_back(static_cast<int>(v));
            BicSelection sel = select_components_bic(rows, candidates, gmm_seed);
            if (!gmm_mixture_out.empty()) save_mixture(gmm_mixture_out, sel.mixture);

            RankedReport report = gmm_rank(contract, std::move(txs), rows, sel.mixture);
            AlarmConfig alarm =
                gmm_topk > 0 ? AlarmConfig::absolute(gmm_topk)
                             : AlarmConfig::percentage(gmm_alpha > 0 ? gmm_alpha : 1.0);
            write_report_csv(report, alarm, fs::path(gmm_report));
            write_manifest(gmm_report, "baseline gmm",
                           {{"components", sel.components}, {"seed", gmm_seed}},
                           {gmm_embeddings, gmm_scores});
            std::cout << "mixture with " << sel.components << " components; report -> "
                      << gmm_report << '\n';
        } else if (*len_cmd) {
            std::vector<EncodedTrace> traces;
            Vocabulary empty_vocab; // length needs no learned vocabulary
            for (const RawTrace& t : parse_trace_file(len_corpus)) {
                EncodedTrace enc = encode_trace(t, empty_vocab, kDefaultMaxTokens,
                                                static_cast<std::uint8_t>(len_depth));
                if (len_contract.empty() || enc.contract == len_contract)
                    traces.push_back(std::move(enc));
            }
            std::string contract = len_contract.empty()
                                       ? (traces.empty() ? "" : traces[0].contract)
                                       : len_contract;
            RankedReport report = trace_length_rank(contract, traces);
            AlarmConfig alarm =
                len_topk > 0 ? AlarmConfig::absolute(len_topk)
                             : AlarmConfig::percentage(len_alpha > 0 ? len_alpha : 1.0);
            write_report_csv(report, alarm, fs::path(len_report));
            write_manifest(len_report, "baseline length", {{"contract", contract}},
                           {len_corpus});
            std::cout << report.ranking.size() << " transactions ranked by length -> "
                      << len_report << '\n';
        } else if (*gradcheck) {
            return run_gradcheck(gc_d_model, gc_heads, gc_layers, gc_ff, gc_vocab, gc_step,
                                 gc_threshold, gc_seed);
        } else if (*bench) {
            Vocabulary vocab = Vocabulary::load_tsv(bench_vocab);
            ModelParams<float> params = load_checkpoint<float>(bench_ckpt);
            auto corpus = encode_corpus(bench_corpus, vocab, params.config.max_seq,
                                        params.config.max_depth);
            long long tokens = 0;
            double best_tps = 0;
            for (int r = 0; r < bench_repeat; ++r) {
                auto t0 = std::chrono::steady_clock::now();
                score_corpus(params, corpus, &tokens);
                double dt =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
                best_tps = std::max(best_tps, corpus.size() / dt);
            }
            std::printf("%zu transactions, %lld scored tokens\n", corpus.size(), tokens);
            std::printf("throughput %.1f tx/s (best of %d)\n", best_tps, bench_repeat);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

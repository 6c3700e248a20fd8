#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hum/balance.hpp"
#include "hum/common.hpp"
#include "hum/corpus.hpp"
#include "hum/encoder.hpp"
#include "hum/eval.hpp"
#include "hum/objective.hpp"
#include "hum/textio.hpp"

#include <nlohmann/json.hpp>

// Training loop: masked user sequences against in-domain negatives, with
// per-domain batch re-weighting driven by windowed loss means. Ablation
// flags disable individual ingredients without touching the rest of the
// pipeline, so an ablated run differs from the full run only in the flagged
// mechanism.

namespace hum {

struct AblationFlags {
    bool no_prompt = false;       // drop the instruction prefix from inputs
    bool no_user_token = false;   // read the state off the last history token
    bool no_mask = false;         // never hide target-domain history items
    bool no_di = false;           // keep uniform domain weights all run
    bool bidirectional = false;   // full attention instead of causal
    bool probability_form = false; // 1 - p+ objective instead of -log p+
};

struct TrainConfig {
    EncoderConfig encoder; // vocab_size 0 means "take it from the vocabulary"

    int batch_size = 32;
    int epochs = 20;
    int patience = 5; // epochs without improvement before stopping; 0 disables
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;

    int n_negatives = 10;
    double mask_ratio = 0.2;
    double alpha = 0.5;     // step size of the multiplicative weight update
    int update_period = 50; // optimizer steps between weight updates
    bool di_use_normalized = false; // feed loss shares instead of raw means

    int l_max = 10;
    int eval_threads = 1;
    std::uint64_t seed = 1;
    AblationFlags ablation;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (patience < 0) throw std::invalid_argument("TrainConfig: patience must be >= 0");
        if (!(lr > 0)) throw std::invalid_argument("TrainConfig: lr must be positive");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
            throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
        if (!(adam_eps > 0)) throw std::invalid_argument("TrainConfig: adam_eps must be positive");
        if (!(weight_decay >= 0))
            throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (n_negatives < 1) throw std::invalid_argument("TrainConfig: n_negatives must be >= 1");
        if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
            throw std::invalid_argument("TrainConfig: mask_ratio must lie in [0, 1]");
        if (!(alpha >= 0)) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
        if (update_period < 1)
            throw std::invalid_argument("TrainConfig: update_period must be >= 1");
        if (l_max < 1) throw std::invalid_argument("TrainConfig: l_max must be >= 1");
        if (eval_threads < 1)
            throw std::invalid_argument("TrainConfig: eval_threads must be >= 1");
    }
};

// Decoupled weight decay: p -= lr * (mhat / (sqrt(vhat) + eps) + wd * p).
// Moments are kept in double regardless of the parameter precision.
template <typename Real>
class AdamW {
  public:
    AdamW(const EncoderConfig& cfg, double lr, double beta1, double beta2, double eps,
          double weight_decay)
        : m_(EncoderParams<double>::zeros(cfg)), v_(EncoderParams<double>::zeros(cfg)), lr_(lr),
          b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(EncoderParams<Real>& params, const EncoderParams<Real>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        auto pt = params.tensors();
        const auto gt = grads.tensors();
        auto mt = m_.tensors();
        auto vt = v_.tensors();
        if (pt.size() != gt.size()) throw std::invalid_argument("AdamW: registry mismatch");
        for (std::size_t i = 0; i < pt.size(); ++i) {
            Mat<Real>& p = *pt[i].second;
            const Mat<Real>& g = *gt[i].second;
            Mat<double>& m = *mt[i].second;
            Mat<double>& v = *vt[i].second;
            if (p.size() != g.size() || p.size() != m.size())
                throw std::invalid_argument("AdamW: shape mismatch for " + pt[i].first);
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = static_cast<double>(g.a[k]);
                m.a[k] = b1_ * m.a[k] + (1.0 - b1_) * gk;
                v.a[k] = b2_ * v.a[k] + (1.0 - b2_) * gk * gk;
                const double mhat = m.a[k] / bc1;
                const double vhat = v.a[k] / bc2;
                const double pk = static_cast<double>(p.a[k]);
                p.a[k] = static_cast<Real>(pk - lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * pk));
            }
        }
    }

    long long steps_taken() const { return t_; }

  private:
    EncoderParams<double> m_, v_;
    double lr_, b1_, b2_, eps_, wd_;
    long long t_ = 0;
};

inline std::string attention_name(AttentionKind k) {
    switch (k) {
    case AttentionKind::causal: return "causal";
    case AttentionKind::bidirectional: return "bidirectional";
    case AttentionKind::bag: return "bag";
    }
    throw std::invalid_argument("attention_name: unknown kind");
}

inline AttentionKind attention_from_name(const std::string& s) {
    if (s == "causal") return AttentionKind::causal;
    if (s == "bidirectional") return AttentionKind::bidirectional;
    if (s == "bag") return AttentionKind::bag;
    throw std::invalid_argument("attention_from_name: unknown kind " + s);
}

namespace detail {

template <typename Real> constexpr const char* dtype_name();
template <> constexpr const char* dtype_name<float>() { return "float32"; }
template <> constexpr const char* dtype_name<double>() { return "float64"; }

inline void append_bits(std::string& out, std::uint32_t bits) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline void append_bits(std::string& out, std::uint64_t bits) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline std::uint64_t read_le(const unsigned char* p, int bytes) {
    std::uint64_t x = 0;
    for (int b = bytes - 1; b >= 0; --b) x = (x << 8) | p[b];
    return x;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace detail

// Checkpoint layout: one JSON header line (dtype, vocabulary hash, encoder
// config, tensor names and shapes), then raw little-endian IEEE values in
// registry order. The writer goes through a temporary file and renames, so a
// crash never leaves a half-written checkpoint at the target path.
template <typename Real>
void save_checkpoint(const EncoderParams<Real>& params, std::uint64_t vocab_hash,
                     const std::string& path) {
    nlohmann::json header;
    header["format"] = "hum-checkpoint-v1";
    header["dtype"] = detail::dtype_name<Real>();
    header["vocab_hash"] = detail::hash_hex(vocab_hash);
    const EncoderConfig& c = params.cfg;
    header["config"] = {{"vocab_size", c.vocab_size}, {"dim", c.dim},
                        {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                        {"ffn_dim", c.ffn_dim},       {"max_len", c.max_len},
                        {"init_scale", c.init_scale}, {"attention", attention_name(c.attention)}};
    nlohmann::json tensors = nlohmann::json::array();
    std::string payload;
    for (const auto& [name, mat] : params.tensors()) {
        tensors.push_back({name, mat->rows, mat->cols});
        for (std::size_t k = 0; k < mat->size(); ++k) {
            if constexpr (sizeof(Real) == 4)
                detail::append_bits(payload, std::bit_cast<std::uint32_t>(mat->a[k]));
            else
                detail::append_bits(payload, std::bit_cast<std::uint64_t>(mat->a[k]));
        }
    }
    header["tensors"] = std::move(tensors);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
        const std::string head = header.dump();
        out.write(head.data(), static_cast<std::streamsize>(head.size()));
        out.put('\n');
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out.good()) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("save_checkpoint: cannot rename " + tmp + " to " + path);
}

template <typename Real>
EncoderParams<Real> load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t nl = blob.find('\n');
    if (nl == std::string::npos) throw std::runtime_error("load_checkpoint: missing header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(0, nl));
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("load_checkpoint: header is not valid JSON");
    }
    if (header.value("format", "") != "hum-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: unrecognized format");
    const std::string dtype = header.value("dtype", "");
    if (dtype != detail::dtype_name<Real>())
        throw std::runtime_error("load_checkpoint: checkpoint dtype " + dtype +
                                 " does not match the requested " +
                                 std::string(detail::dtype_name<Real>()) + " load");
    if (header.value("vocab_hash", "") != detail::hash_hex(expected_vocab_hash))
        throw std::runtime_error("load_checkpoint: vocabulary hash mismatch");

    EncoderConfig cfg;
    try {
        const auto& c = header.at("config");
        cfg.vocab_size = c.at("vocab_size").get<int>();
        cfg.dim = c.at("dim").get<int>();
        cfg.n_layers = c.at("n_layers").get<int>();
        cfg.n_heads = c.at("n_heads").get<int>();
        cfg.ffn_dim = c.at("ffn_dim").get<int>();
        cfg.max_len = c.at("max_len").get<int>();
        cfg.init_scale = c.at("init_scale").get<double>();
        cfg.attention = attention_from_name(c.at("attention").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("load_checkpoint: malformed config");
    }

    auto params = EncoderParams<Real>::zeros(cfg);
    const auto reg = params.tensors();
    const auto& tens = header.at("tensors");
    if (!tens.is_array() || tens.size() != reg.size())
        throw std::runtime_error("load_checkpoint: tensor list does not match the architecture");
    std::size_t total = 0;
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const auto& row = tens.at(i);
        if (row.at(0).get<std::string>() != reg[i].first ||
            row.at(1).get<std::size_t>() != reg[i].second->rows ||
            row.at(2).get<std::size_t>() != reg[i].second->cols)
            throw std::runtime_error("load_checkpoint: tensor list does not match the architecture");
        total += reg[i].second->size();
    }
    const std::size_t expect_bytes = total * sizeof(Real);
    const std::size_t have = blob.size() - nl - 1;
    if (have < expect_bytes) throw std::runtime_error("load_checkpoint: truncated payload");
    if (have > expect_bytes) throw std::runtime_error("load_checkpoint: trailing bytes");

    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + nl + 1;
    for (auto& [name, mat] : reg) {
        for (std::size_t k = 0; k < mat->size(); ++k) {
            if constexpr (sizeof(Real) == 4)
                mat->a[k] = std::bit_cast<float>(
                    static_cast<std::uint32_t>(detail::read_le(p, 4)));
            else
                mat->a[k] = std::bit_cast<double>(detail::read_le(p, 8));
            p += sizeof(Real);
        }
    }
    return params;
}

template <typename Real>
void zero_gradients(EncoderParams<Real>& grads) {
    for (auto& [name, mat] : grads.tensors()) mat->zero();
}

template <typename Real>
struct BatchResult {
    double weighted_loss = 0;
    std::vector<double> raw_losses; // per-example contrastive losses, unweighted
};

// One batch: encode users and the distinct candidate items (each distinct
// item once; upstream gradients are summed before its single backward pass,
// which matches per-copy backward by linearity), apply the contrastive
// objective per example, and accumulate parameter gradients scaled by the
// per-example weight from the domain weighting.
template <typename Real>
BatchResult<Real> process_batch(const EncoderParams<Real>& params, const Vocabulary& vocab,
                                const Corpus& corpus, const std::vector<UserSequence>& seqs,
                                const std::vector<std::vector<std::string>>& candidates,
                                const std::vector<double>& weights, bool probability_form,
                                const InputFlags& flags, EncoderParams<Real>& grads) {
    const std::size_t B = seqs.size();
    if (B == 0) throw std::invalid_argument("process_batch: empty batch");
    if (candidates.size() != B) throw std::invalid_argument("process_batch: size mismatch");

    std::map<std::string, std::size_t> uniq;
    std::vector<const Item*> uniq_items;
    std::vector<std::vector<std::size_t>> cand_idx(B);
    for (std::size_t i = 0; i < B; ++i) {
        if (candidates[i].empty()) throw std::invalid_argument("process_batch: no candidates");
        cand_idx[i].reserve(candidates[i].size());
        for (const auto& id : candidates[i]) {
            auto [it, inserted] = uniq.emplace(id, uniq_items.size());
            if (inserted) uniq_items.push_back(&corpus.items.at(id));
            cand_idx[i].push_back(it->second);
        }
    }

    const std::size_t d = static_cast<std::size_t>(params.cfg.dim);
    std::vector<EncoderCache<Real>> user_cache;
    user_cache.reserve(B);
    for (const auto& seq : seqs)
        user_cache.push_back(encode_forward(
            params, build_user_input(vocab, corpus, seq, params.cfg.max_len, flags)));

    std::vector<EncoderCache<Real>> item_cache;
    std::vector<std::vector<Real>> item_emb;
    item_cache.reserve(uniq_items.size());
    item_emb.reserve(uniq_items.size());
    for (const Item* item : uniq_items) {
        item_cache.push_back(
            encode_forward(params, build_item_input(vocab, *item, params.cfg.max_len, flags)));
        item_emb.push_back(readout_state(item_cache.back()));
    }

    std::vector<ContrastiveResult<Real>> ctr(B);
    std::vector<double> losses(B);
    std::vector<int> domains(B);
    for (std::size_t i = 0; i < B; ++i) {
        std::vector<std::vector<Real>> cand_embs;
        cand_embs.reserve(cand_idx[i].size());
        for (std::size_t u : cand_idx[i]) cand_embs.push_back(item_emb[u]);
        ctr[i] = contrastive_loss(readout_state(user_cache[i]), cand_embs, probability_form);
        losses[i] = ctr[i].loss;
        domains[i] = seqs[i].target_domain;
    }

    const WeightedBatch<Real> wb = weighted_batch_loss<Real>(domains, losses, weights);

    std::vector<std::vector<Real>> item_upstream(uniq_items.size(),
                                                 std::vector<Real>(d, Real(0)));
    std::vector<Real> du(d);
    for (std::size_t i = 0; i < B; ++i) {
        const Real s = wb.example_scale[i];
        for (std::size_t k = 0; k < d; ++k) du[k] = ctr[i].d_user[k] * s;
        encode_backward(params, user_cache[i], du, grads);
        for (std::size_t j = 0; j < cand_idx[i].size(); ++j) {
            std::vector<Real>& up = item_upstream[cand_idx[i][j]];
            const std::vector<Real>& g = ctr[i].d_items[j];
            for (std::size_t k = 0; k < d; ++k) up[k] += g[k] * s;
        }
    }
    for (std::size_t u = 0; u < uniq_items.size(); ++u)
        encode_backward(params, item_cache[u], item_upstream[u], grads);

    return {wb.loss, std::move(losses)};
}

struct StepRecord {
    long long step = 0;
    double loss = 0;              // weighted batch loss
    std::vector<double> weights;  // domain weights in force for this step
};

struct WeightUpdateRecord {
    long long step = 0;
    std::vector<double> window_means; // per-domain mean losses fed to the update
    std::vector<double> importance;   // their normalized shares
    std::vector<double> weights;      // weights after the update
};

struct EpochRecord {
    int epoch = 0; // 1-based
    double mean_train_loss = 0;
    double valid_ndcg10 = std::numeric_limits<double>::quiet_NaN();
    bool improved = false;
};

template <typename Real>
struct TrainResult {
    EncoderParams<Real> params; // best-validation snapshot, last state otherwise
    std::vector<StepRecord> history;
    std::vector<WeightUpdateRecord> weight_updates;
    std::vector<EpochRecord> epochs;
    std::vector<double> final_weights;
    long long steps = 0;
    int best_epoch = 0; // 1-based, 0 when no validation ran
    double best_metric = std::numeric_limits<double>::quiet_NaN();
    bool stopped_early = false;
    std::size_t train_sequences = 0;
    std::size_t valid_sequences = 0;
    std::size_t skipped_train = 0;
};

// Unobserved domains take the mean of the observed ones so the weight update
// sees a finite loss vector. Returns false when nothing was observed at all.
inline bool fill_unobserved(std::vector<double>& means) {
    double sum = 0;
    std::size_t n = 0;
    for (double m : means)
        if (!std::isnan(m)) {
            sum += m;
            ++n;
        }
    if (n == 0) return false;
    const double fallback = sum / static_cast<double>(n);
    for (double& m : means)
        if (std::isnan(m)) m = fallback;
    return true;
}

template <typename Real>
TrainResult<Real> train(const Corpus& corpus, const SplitCorpus& split, const Vocabulary& vocab,
                        const TrainConfig& cfg) {
    cfg.validate();
    EncoderConfig enc = cfg.encoder;
    if (enc.vocab_size == 0) enc.vocab_size = vocab.size();
    else if (enc.vocab_size != vocab.size())
        throw std::invalid_argument("train: encoder vocab_size " +
                                    std::to_string(enc.vocab_size) +
                                    " does not match the vocabulary size " +
                                    std::to_string(vocab.size()));
    if (cfg.ablation.bidirectional) enc.attention = AttentionKind::bidirectional;
    enc.validate();

    const SequenceSet train_set = build_sequences(corpus, split, Phase::train, cfg.l_max);
    if (train_set.sequences.empty()) throw std::invalid_argument("train: no training sequences");
    const SequenceSet valid_set = build_sequences(corpus, split, Phase::valid, cfg.l_max);

    // Negatives come from items seen in the training interactions of the
    // target's domain, so evaluation items never leak into training.
    std::map<int, std::vector<std::string>> pools;
    {
        std::map<int, std::set<std::string>> seen;
        for (const auto& it : split.train)
            seen[corpus.items.at(it.item).domain].insert(it.item);
        for (auto& [dom, ids] : seen) pools.emplace(dom, std::vector<std::string>(ids.begin(), ids.end()));
    }

    const std::size_t n_domains = corpus.domains.size();
    if (n_domains == 0) throw std::invalid_argument("train: corpus has no domains");
    std::vector<double> weights(n_domains, 1.0 / static_cast<double>(n_domains));
    LossLedger ledger(n_domains);

    rng_t init_rng(derive_seed(cfg.seed, fnv1a64("train/init")));
    rng_t shuffle_rng(derive_seed(cfg.seed, fnv1a64("train/shuffle")));
    rng_t mask_rng(derive_seed(cfg.seed, fnv1a64("train/mask")));
    rng_t neg_rng(derive_seed(cfg.seed, fnv1a64("train/negatives")));

    auto params = EncoderParams<Real>::init(enc, init_rng);
    auto grads = EncoderParams<Real>::zeros(enc);
    AdamW<Real> adam(enc, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

    const InputFlags flags{cfg.ablation.no_prompt, cfg.ablation.no_user_token};
    EvalOptions eval_opt;
    eval_opt.input_flags = flags;
    eval_opt.threads = cfg.eval_threads;

    TrainResult<Real> result;
    result.train_sequences = train_set.sequences.size();
    result.valid_sequences = valid_set.sequences.size();
    result.skipped_train = train_set.skipped_empty_history;

    EncoderParams<Real> best = params;
    double best_metric = -std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_improvement = 0;
    long long step = 0;
    bool stop = false;

    std::vector<std::size_t> order(train_set.sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        shuffle_inplace(order, shuffle_rng);
        double epoch_loss_sum = 0;
        std::size_t epoch_batches = 0;

        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            std::vector<UserSequence> batch;
            std::vector<std::vector<std::string>> cands;
            batch.reserve(end - pos);
            cands.reserve(end - pos);
            for (std::size_t b = pos; b < end; ++b) {
                const UserSequence& raw = train_set.sequences[order[b]];
                batch.push_back(cfg.ablation.no_mask ? raw
                                                     : mask_history(raw, cfg.mask_ratio, mask_rng));
                const auto pool_it = pools.find(raw.target_domain);
                if (pool_it == pools.end())
                    throw std::invalid_argument("train: no training items in domain " +
                                                corpus.domains[static_cast<std::size_t>(
                                                                   raw.target_domain)]
                                                    .name);
                std::vector<std::string> c{raw.target};
                auto negs = sample_negatives(
                    pool_it->second, raw.target, cfg.n_negatives,
                    corpus.domains[static_cast<std::size_t>(raw.target_domain)].name, neg_rng);
                c.insert(c.end(), negs.begin(), negs.end());
                cands.push_back(std::move(c));
            }

            zero_gradients(grads);
            const BatchResult<Real> br =
                process_batch(params, vocab, corpus, batch, cands, weights,
                              cfg.ablation.probability_form, flags, grads);
            for (std::size_t i = 0; i < batch.size(); ++i)
                ledger.record(batch[i].target_domain, br.raw_losses[i]);
            adam.step(params, grads);
            ++step;
            epoch_loss_sum += br.weighted_loss;
            ++epoch_batches;
            result.history.push_back({step, br.weighted_loss, weights});

            if (!cfg.ablation.no_di && step % cfg.update_period == 0) {
                std::vector<double> means = ledger.window_means();
                if (fill_unobserved(means)) {
                    const std::vector<double> importance = domain_importance(means);
                    const std::vector<double>& feed = cfg.di_use_normalized ? importance : means;
                    weights = update_weights(weights, feed, cfg.alpha);
                    result.weight_updates.push_back({step, means, importance, weights});
                    ledger.roll();
                }
            }
        }

        EpochRecord er;
        er.epoch = epoch;
        er.mean_train_loss = epoch_batches ? epoch_loss_sum / static_cast<double>(epoch_batches)
                                           : 0.0;
        if (!valid_set.sequences.empty()) {
            er.valid_ndcg10 =
                evaluate_split(params, vocab, corpus, valid_set.sequences, eval_opt).macro.ndcg10;
            if (er.valid_ndcg10 > best_metric) {
                best_metric = er.valid_ndcg10;
                best_epoch = epoch;
                best = params;
                since_improvement = 0;
                er.improved = true;
            } else {
                ++since_improvement;
                if (cfg.patience > 0 && since_improvement >= cfg.patience) {
                    stop = true;
                    result.stopped_early = true;
                }
            }
        }
        result.epochs.push_back(er);
    }

    result.steps = step;
    result.final_weights = weights;
    if (!valid_set.sequences.empty()) {
        result.params = std::move(best);
        result.best_epoch = best_epoch;
        result.best_metric = best_metric;
    } else {
        result.params = std::move(params);
    }
    return result;
}

} // namespace hum

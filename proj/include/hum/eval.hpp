#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hum/corpus.hpp"
#include "hum/encoder.hpp"
#include "hum/objective.hpp"
#include "hum/textio.hpp"

// Full-ranking evaluation: every catalog item of the target's domain is a
// candidate, the target's 1-based rank feeds Recall@K and NDCG@K. With a
// single relevant item NDCG@K reduces to 1/log2(rank+1) for rank <= K.

namespace hum {

struct EvalOptions {
    bool normalize = false; // cosine scores instead of inner products
    InputFlags input_flags; // must match how the encoder was trained
    int threads = 1;
};

struct SequenceRank {
    int domain = 0;
    std::size_t rank = 0;        // 1-based rank of the target item
    std::size_t history_len = 0; // pre-masking history length of the sequence
    std::size_t pool_size = 0;   // candidates ranked against
};

// Rank of the candidate at target_idx under (score desc, id asc). Shared by
// the scorer and by oracle tests that rank via a full sort.
inline std::size_t rank_of_target(const std::vector<double>& scores,
                                  const std::vector<std::string>& ids, std::size_t target_idx) {
    if (scores.size() != ids.size() || target_idx >= ids.size())
        throw std::invalid_argument("rank_of_target: bad input");
    const double st = scores[target_idx];
    const std::string& tid = ids[target_idx];
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j == target_idx) continue;
        if (scores[j] > st || (scores[j] == st && ids[j] < tid)) ++ahead;
    }
    return ahead + 1;
}

namespace detail {

template <typename Real>
double eval_score(const std::vector<Real>& u, const std::vector<Real>& e, bool normalize) {
    const double raw = score(u, e);
    if (!normalize) return raw;
    const double nu = std::sqrt(std::max(score(u, u), 1e-24));
    const double ne = std::sqrt(std::max(score(e, e), 1e-24));
    return raw / (nu * ne);
}

} // namespace detail

// Ranks every sequence's target against all catalog items of its domain.
// Candidate embeddings are computed once per domain per call; sequences are
// then scored independently (optionally across threads), so the result does
// not depend on the thread count.
template <typename Real>
std::vector<SequenceRank> score_sequences(const EncoderParams<Real>& params,
                                          const Vocabulary& vocab, const Corpus& corpus,
                                          const std::vector<UserSequence>& sequences,
                                          const EvalOptions& opt = {}) {
    if (opt.threads < 1) throw std::invalid_argument("score_sequences: threads must be >= 1");

    std::map<int, std::vector<std::string>> pools;
    std::map<int, std::vector<std::vector<Real>>> pool_embs;
    for (const auto& seq : sequences) {
        if (pools.count(seq.target_domain)) continue;
        auto ids = corpus.items_of_domain(seq.target_domain);
        if (ids.empty())
            throw std::invalid_argument("score_sequences: domain " +
                                        std::to_string(seq.target_domain) + " has no items");
        std::vector<std::vector<Real>> embs;
        embs.reserve(ids.size());
        for (const auto& id : ids)
            embs.push_back(encode(params, build_item_input(vocab, corpus.items.at(id),
                                                           params.cfg.max_len, opt.input_flags)));
        pools.emplace(seq.target_domain, std::move(ids));
        pool_embs.emplace(seq.target_domain, std::move(embs));
    }

    std::vector<SequenceRank> ranks(sequences.size());
    auto worker = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scores;
        for (std::size_t s = begin; s < end; ++s) {
            const UserSequence& seq = sequences[s];
            const auto user_emb = encode(
                params, build_user_input(vocab, corpus, seq, params.cfg.max_len, opt.input_flags));
            const auto& ids = pools.at(seq.target_domain);
            const auto& embs = pool_embs.at(seq.target_domain);
            scores.assign(ids.size(), 0.0);
            std::size_t target_idx = ids.size();
            for (std::size_t j = 0; j < ids.size(); ++j) {
                scores[j] = detail::eval_score(user_emb, embs[j], opt.normalize);
                if (ids[j] == seq.target) target_idx = j;
            }
            if (target_idx == ids.size())
                throw std::invalid_argument("score_sequences: target " + seq.target +
                                            " missing from its domain pool");
            ranks[s] = {seq.target_domain, rank_of_target(scores, ids, target_idx),
                        seq.history.size(), ids.size()};
        }
    };

    if (opt.threads == 1 || sequences.size() < 2) {
        worker(0, sequences.size());
    } else {
        const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(opt.threads),
                                                    sequences.size());
        std::vector<std::thread> threads;
        std::exception_ptr error;
        std::mutex error_mu;
        const std::size_t chunk = (sequences.size() + t - 1) / t;
        for (std::size_t i = 0; i < t; ++i) {
            const std::size_t b = i * chunk;
            const std::size_t e = std::min(sequences.size(), b + chunk);
            if (b >= e) break;
            threads.emplace_back([&, b, e] {
                try {
                    worker(b, e);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            });
        }
        for (auto& th : threads) th.join();
        if (error) std::rethrow_exception(error);
    }
    return ranks;
}

inline double recall_from_rank(std::size_t rank, int k) {
    return rank <= static_cast<std::size_t>(k) ? 1.0 : 0.0;
}

inline double ndcg_from_rank(std::size_t rank, int k) {
    if (rank > static_cast<std::size_t>(k)) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

struct DomainMetrics {
    std::size_t count = 0;
    double recall5 = 0, recall10 = 0, ndcg5 = 0, ndcg10 = 0;
};

struct MetricReport {
    std::map<int, DomainMetrics> per_domain;
    DomainMetrics micro; // pooled over sequences
    DomainMetrics macro; // unweighted mean over represented domains
};

inline MetricReport aggregate_metrics(const std::vector<SequenceRank>& ranks) {
    MetricReport rep;
    for (const auto& r : ranks) {
        DomainMetrics& d = rep.per_domain[r.domain];
        ++d.count;
        d.recall5 += recall_from_rank(r.rank, 5);
        d.recall10 += recall_from_rank(r.rank, 10);
        d.ndcg5 += ndcg_from_rank(r.rank, 5);
        d.ndcg10 += ndcg_from_rank(r.rank, 10);
    }
    for (auto& [dom, d] : rep.per_domain) {
        rep.micro.count += d.count;
        rep.micro.recall5 += d.recall5;
        rep.micro.recall10 += d.recall10;
        rep.micro.ndcg5 += d.ndcg5;
        rep.micro.ndcg10 += d.ndcg10;
        const double n = static_cast<double>(d.count);
        d.recall5 /= n;
        d.recall10 /= n;
        d.ndcg5 /= n;
        d.ndcg10 /= n;
    }
    if (rep.micro.count > 0) {
        const double n = static_cast<double>(rep.micro.count);
        rep.micro.recall5 /= n;
        rep.micro.recall10 /= n;
        rep.micro.ndcg5 /= n;
        rep.micro.ndcg10 /= n;
        const double nd = static_cast<double>(rep.per_domain.size());
        rep.macro.count = rep.micro.count;
        for (const auto& [dom, d] : rep.per_domain) {
            rep.macro.recall5 += d.recall5 / nd;
            rep.macro.recall10 += d.recall10 / nd;
            rep.macro.ndcg5 += d.ndcg5 / nd;
            rep.macro.ndcg10 += d.ndcg10 / nd;
        }
    }
    return rep;
}

template <typename Real>
MetricReport evaluate_split(const EncoderParams<Real>& params, const Vocabulary& vocab,
                            const Corpus& corpus, const std::vector<UserSequence>& sequences,
                            const EvalOptions& opt = {}) {
    return aggregate_metrics(score_sequences(params, vocab, corpus, sequences, opt));
}

struct LengthBucket {
    std::string label;
    std::size_t lo = 0, hi = 0; // inclusive history-length range
    DomainMetrics metrics;
};

// Metrics bucketed by history length: short [1,3], medium [4,6], long [7,+).
inline std::vector<LengthBucket> heterogeneity_report(const std::vector<SequenceRank>& ranks) {
    std::vector<LengthBucket> buckets{{"1-3", 1, 3, {}},
                                      {"4-6", 4, 6, {}},
                                      {"7+", 7, std::numeric_limits<std::size_t>::max(), {}}};
    for (const auto& r : ranks)
        for (auto& b : buckets)
            if (r.history_len >= b.lo && r.history_len <= b.hi) {
                ++b.metrics.count;
                b.metrics.recall5 += recall_from_rank(r.rank, 5);
                b.metrics.recall10 += recall_from_rank(r.rank, 10);
                b.metrics.ndcg5 += ndcg_from_rank(r.rank, 5);
                b.metrics.ndcg10 += ndcg_from_rank(r.rank, 10);
            }
    for (auto& b : buckets)
        if (b.metrics.count > 0) {
            const double n = static_cast<double>(b.metrics.count);
            b.metrics.recall5 /= n;
            b.metrics.recall10 /= n;
            b.metrics.ndcg5 /= n;
            b.metrics.ndcg10 /= n;
        }
    return buckets;
}

struct SeesawEntry {
    int domain = 0;
    double joint = 0, reference = 0, delta = 0;
};

struct SeesawReport {
    std::vector<SeesawEntry> entries; // by domain, NDCG@10 deltas
    bool seesaw = false;              // some domain gains while another loses
};

// Compares joint multi-domain training against per-domain reference results.
// A mixed sign pattern in the deltas is the seesaw: improving one domain at
// another's expense.
inline SeesawReport seesaw_diagnostic(const MetricReport& joint,
                                      const std::map<int, double>& reference_ndcg10) {
    SeesawReport rep;
    bool any_up = false, any_down = false;
    for (const auto& [dom, ref] : reference_ndcg10) {
        const auto it = joint.per_domain.find(dom);
        if (it == joint.per_domain.end())
            throw std::invalid_argument("seesaw_diagnostic: domain " + std::to_string(dom) +
                                        " missing from the joint report");
        SeesawEntry e;
        e.domain = dom;
        e.joint = it->second.ndcg10;
        e.reference = ref;
        e.delta = e.joint - ref;
        if (e.delta > 0) any_up = true;
        if (e.delta < 0) any_down = true;
        rep.entries.push_back(e);
    }
    rep.seesaw = any_up && any_down;
    return rep;
}

} // namespace hum

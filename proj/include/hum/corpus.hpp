#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hum/common.hpp"
#include "hum/tensor.hpp"

// Multi-domain interaction data: catalog types, a synthetic generator with
// planted cross-domain structure, JSONL ingestion/export, chronological
// splitting, sequence construction, and noise injection.

namespace hum {

struct DomainId {
    int index = 0;
    std::string name;
};

struct Item {
    std::string id;
    int domain = 0;
    std::string title; // whitespace-separated tokens, non-empty
};

struct Interaction {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
};

struct Corpus {
    std::vector<DomainId> domains;
    std::map<std::string, Item> items; // keyed by item id, ordered for determinism
    std::vector<Interaction> interactions; // ingestion order; ties broken by position

    std::set<std::string> users() const {
        std::set<std::string> u;
        for (const auto& it : interactions) u.insert(it.user);
        return u;
    }

    int domain_index(const std::string& name) const {
        for (const auto& d : domains)
            if (d.name == name) return d.index;
        throw std::invalid_argument("unknown domain: " + name);
    }

    std::vector<std::string> items_of_domain(int domain) const {
        std::vector<std::string> out;
        for (const auto& [id, item] : items)
            if (item.domain == domain) out.push_back(id);
        return out; // sorted by id via map order
    }
};

struct SplitCorpus {
    std::vector<Interaction> train, valid, test;
    std::int64_t boundary_valid = 0;
    std::int64_t boundary_test = 0;
};

enum class Phase { train, valid, test };

struct HistoryItem {
    std::string item;
    int domain = 0;
    std::int64_t timestamp = 0;
};

struct UserSequence {
    std::string user;
    std::vector<HistoryItem> history; // chronological, length in [1, L_max]
    std::string target;
    int target_domain = 0;
    std::int64_t target_timestamp = 0;
};

struct GenConfig {
    int n_domains = 3;
    int users_per_domain = 100;
    int items_per_domain = 200;
    int interactions_per_user = 20;
    int latent_dim = 8;
    double cross_domain_strength = 0.5;
    int topic_count_per_domain = 8;
    int vocab_words_per_topic = 12;
    std::uint64_t seed = 7;
    // Chance a pick stays in the user's home domain before the uniform
    // fallback over all domains; P(home) = p + (1-p)/n_domains.
    double home_domain_prob = 0.6;
    // Optional per-domain user counts for imbalanced corpora; overrides
    // users_per_domain when non-empty (size must equal n_domains).
    std::vector<int> domain_user_counts;

    void validate() const {
        if (n_domains <= 0 || users_per_domain <= 0 || items_per_domain <= 0 ||
            interactions_per_user <= 0 || topic_count_per_domain <= 0 ||
            vocab_words_per_topic <= 0)
            throw std::invalid_argument("GenConfig: all counts must be positive");
        if (latent_dim < 2) throw std::invalid_argument("GenConfig: latent_dim must be >= 2");
        if (cross_domain_strength < 0.0 || cross_domain_strength > 1.0)
            throw std::invalid_argument("GenConfig: cross_domain_strength must be in [0,1]");
        if (home_domain_prob < 0.0 || home_domain_prob > 1.0)
            throw std::invalid_argument("GenConfig: home_domain_prob must be in [0,1]");
        if (!domain_user_counts.empty()) {
            if (static_cast<int>(domain_user_counts.size()) != n_domains)
                throw std::invalid_argument("GenConfig: domain_user_counts size mismatch");
            for (int c : domain_user_counts)
                if (c <= 0) throw std::invalid_argument("GenConfig: all counts must be positive");
        }
    }

    std::vector<int> user_counts() const {
        if (!domain_user_counts.empty()) return domain_user_counts;
        return std::vector<int>(static_cast<std::size_t>(n_domains), users_per_domain);
    }
};

// Latent factors behind a synthetic corpus. Exposed so tests can measure the
// planted cross-domain affinity structure directly, before any sampling.
struct GenLatents {
    // user_effective[u][d] : the user's latent as seen by domain d,
    //   cross_domain_strength * shared + (1 - strength) * per-domain offset.
    std::vector<std::vector<std::vector<double>>> user_effective;
    std::vector<std::vector<double>> user_shared;
    // item_latent[d][j] : latent of item j of domain d (topic vector + noise);
    // topics are a global pool, so item j of any domain derives from topic j % T.
    std::vector<std::vector<std::vector<double>>> item_latent;
    std::vector<int> users_per_domain_resolved;
    int total_users = 0;

    double affinity(int user, int domain, int item) const {
        const auto& y = user_effective[static_cast<std::size_t>(user)][static_cast<std::size_t>(domain)];
        const auto& x = item_latent[static_cast<std::size_t>(domain)][static_cast<std::size_t>(item)];
        double s = 0;
        for (std::size_t k = 0; k < y.size(); ++k) s += y[k] * x[k];
        return s;
    }
};

namespace detail {

inline std::vector<double> draw_vec(int dim, rng_t& rng) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = normal01(rng);
    return v;
}

// Generator-internal constants.
constexpr double kItemNoise = 0.35;       // item latent = topic + noise * N(0,I)
constexpr double kSoftmaxSharpness = 2.0; // scaled by 1/sqrt(latent_dim)

} // namespace detail

inline GenLatents generate_latents(const GenConfig& cfg) {
    cfg.validate();
    GenLatents lat;
    rng_t rng(derive_seed(cfg.seed, fnv1a64("gen-latents")));

    const int T = cfg.topic_count_per_domain;
    std::vector<std::vector<double>> topics;
    topics.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) topics.push_back(detail::draw_vec(cfg.latent_dim, rng));

    lat.item_latent.resize(static_cast<std::size_t>(cfg.n_domains));
    for (int d = 0; d < cfg.n_domains; ++d) {
        auto& dom = lat.item_latent[static_cast<std::size_t>(d)];
        dom.reserve(static_cast<std::size_t>(cfg.items_per_domain));
        for (int j = 0; j < cfg.items_per_domain; ++j) {
            auto x = topics[static_cast<std::size_t>(j % T)];
            for (auto& c : x) c += detail::kItemNoise * normal01(rng);
            dom.push_back(std::move(x));
        }
    }

    lat.users_per_domain_resolved = cfg.user_counts();
    for (int c : lat.users_per_domain_resolved) lat.total_users += c;

    const double s = cfg.cross_domain_strength;
    lat.user_shared.reserve(static_cast<std::size_t>(lat.total_users));
    lat.user_effective.reserve(static_cast<std::size_t>(lat.total_users));
    for (int u = 0; u < lat.total_users; ++u) {
        auto shared = detail::draw_vec(cfg.latent_dim, rng);
        std::vector<std::vector<double>> eff;
        eff.reserve(static_cast<std::size_t>(cfg.n_domains));
        for (int d = 0; d < cfg.n_domains; ++d) {
            auto offset = detail::draw_vec(cfg.latent_dim, rng);
            std::vector<double> y(static_cast<std::size_t>(cfg.latent_dim));
            for (int k = 0; k < cfg.latent_dim; ++k)
                y[static_cast<std::size_t>(k)] =
                    s * shared[static_cast<std::size_t>(k)] + (1.0 - s) * offset[static_cast<std::size_t>(k)];
            eff.push_back(std::move(y));
        }
        lat.user_shared.push_back(std::move(shared));
        lat.user_effective.push_back(std::move(eff));
    }
    return lat;
}

inline std::string synthetic_item_id(int domain, int j) {
    return "d" + std::to_string(domain) + "_i" + std::to_string(j);
}

inline std::string synthetic_title(const GenConfig& cfg, int domain, int j) {
    const int T = cfg.topic_count_per_domain;
    const int W = cfg.vocab_words_per_topic;
    const int t = j % T;
    const int a = (j / T * 7) % W;
    int b = (j / T * 7 + 3) % W;
    if (b == a) b = (b + 1) % W;
    std::string title = "d" + std::to_string(domain) + " t" + std::to_string(t) + " i" +
                        std::to_string(j) + " w" + std::to_string(t) + "_" + std::to_string(a);
    if (W > 1) title += " w" + std::to_string(t) + "_" + std::to_string(b);
    return title;
}

inline Corpus generate_synthetic(const GenConfig& cfg) {
    cfg.validate();
    const GenLatents lat = generate_latents(cfg);

    Corpus corpus;
    for (int d = 0; d < cfg.n_domains; ++d)
        corpus.domains.push_back({d, "d" + std::to_string(d)});
    for (int d = 0; d < cfg.n_domains; ++d)
        for (int j = 0; j < cfg.items_per_domain; ++j) {
            Item item{synthetic_item_id(d, j), d, synthetic_title(cfg, d, j)};
            corpus.items.emplace(item.id, std::move(item));
        }

    rng_t rng(derive_seed(cfg.seed, fnv1a64("gen-interactions")));
    const double beta = detail::kSoftmaxSharpness / std::sqrt(static_cast<double>(cfg.latent_dim));

    std::vector<double> logits(static_cast<std::size_t>(cfg.items_per_domain));
    int user_index = 0;
    for (int home = 0; home < cfg.n_domains; ++home) {
        const int count = lat.users_per_domain_resolved[static_cast<std::size_t>(home)];
        for (int i = 0; i < count; ++i, ++user_index) {
            const std::string user = "u" + std::to_string(user_index);
            for (int step = 1; step <= cfg.interactions_per_user; ++step) {
                int d = home;
                if (uniform01(rng) >= cfg.home_domain_prob)
                    d = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(cfg.n_domains)));
                double mx = -1e300;
                for (int j = 0; j < cfg.items_per_domain; ++j) {
                    logits[static_cast<std::size_t>(j)] = beta * lat.affinity(user_index, d, j);
                    mx = std::max(mx, logits[static_cast<std::size_t>(j)]);
                }
                double z = 0;
                for (auto& l : logits) {
                    l = std::exp(l - mx);
                    z += l;
                }
                double u = uniform01(rng) * z;
                int pick = cfg.items_per_domain - 1;
                double acc = 0;
                for (int j = 0; j < cfg.items_per_domain; ++j) {
                    acc += logits[static_cast<std::size_t>(j)];
                    if (u < acc) {
                        pick = j;
                        break;
                    }
                }
                corpus.interactions.push_back({user, synthetic_item_id(d, pick), step});
            }
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// JSONL ingestion / export
// ---------------------------------------------------------------------------

struct IngestResult {
    Corpus corpus;
    std::size_t duplicates_dropped = 0;
    std::size_t five_core_users_dropped = 0;
    std::size_t five_core_items_dropped = 0;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& rec, const char* name,
                                           std::size_t line_no) {
    auto it = rec.find(name);
    if (it == rec.end())
        throw std::runtime_error("line " + std::to_string(line_no) + ": missing field " + name);
    return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* name, std::size_t line_no) {
    const auto& v = require_field(rec, name, line_no);
    if (!v.is_string())
        throw std::runtime_error("line " + std::to_string(line_no) + ": field " + name +
                                 " must be a string");
    return v.get<std::string>();
}

inline std::int64_t require_int(const nlohmann::json& rec, const char* name, std::size_t line_no) {
    const auto& v = require_field(rec, name, line_no);
    if (!v.is_number_integer())
        throw std::runtime_error("line " + std::to_string(line_no) + ": field " + name +
                                 " must be an integer");
    return v.get<std::int64_t>();
}

} // namespace detail

// Iteratively drops users and items with fewer than min_count interactions.
inline void five_core_filter(Corpus& corpus, std::size_t& users_dropped, std::size_t& items_dropped,
                             std::size_t min_count = 5) {
    users_dropped = 0;
    items_dropped = 0;
    std::unordered_set<std::string> dead_users, dead_items;
    for (;;) {
        std::unordered_map<std::string, std::size_t> user_n, item_n;
        for (const auto& it : corpus.interactions) {
            ++user_n[it.user];
            ++item_n[it.item];
        }
        bool changed = false;
        for (const auto& [u, n] : user_n)
            if (n < min_count && dead_users.insert(u).second) {
                ++users_dropped;
                changed = true;
            }
        for (const auto& [i, n] : item_n)
            if (n < min_count && dead_items.insert(i).second) {
                ++items_dropped;
                changed = true;
            }
        if (!changed) break;
        std::vector<Interaction> kept;
        kept.reserve(corpus.interactions.size());
        for (auto& it : corpus.interactions)
            if (!dead_users.count(it.user) && !dead_items.count(it.item))
                kept.push_back(std::move(it));
        corpus.interactions = std::move(kept);
    }
    for (const auto& id : dead_items) corpus.items.erase(id);
}

inline IngestResult ingest_jsonl(const std::string& path, bool apply_five_core = true) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    IngestResult result;
    Corpus& corpus = result.corpus;
    std::map<std::string, int> domain_index;
    std::set<std::tuple<std::string, std::string, std::int64_t>> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": malformed JSON (" +
                                     e.what() + ")");
        }
        const std::string user = detail::require_string(rec, "user_id", line_no);
        const std::string item_id = detail::require_string(rec, "item_id", line_no);
        const std::string domain = detail::require_string(rec, "domain", line_no);
        const std::string title = detail::require_string(rec, "title", line_no);
        const std::int64_t timestamp = detail::require_int(rec, "timestamp", line_no);
        if (title.empty())
            throw std::runtime_error("line " + std::to_string(line_no) + ": field title is empty");

        auto [dit, inserted] = domain_index.emplace(domain, static_cast<int>(corpus.domains.size()));
        if (inserted) corpus.domains.push_back({dit->second, domain});

        if (!seen.emplace(user, item_id, timestamp).second) {
            ++result.duplicates_dropped;
            continue;
        }
        corpus.items.emplace(item_id, Item{item_id, dit->second, title});
        corpus.interactions.push_back({user, item_id, timestamp});
    }
    if (apply_five_core)
        five_core_filter(corpus, result.five_core_users_dropped, result.five_core_items_dropped);
    return result;
}

inline void export_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& it : corpus.interactions) {
        const Item& item = corpus.items.at(it.item);
        nlohmann::json rec{{"user_id", it.user},
                           {"item_id", it.item},
                           {"domain", corpus.domains[static_cast<std::size_t>(item.domain)].name},
                           {"title", item.title},
                           {"timestamp", it.timestamp}};
        out << rec.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Chronological split and sequence construction
// ---------------------------------------------------------------------------

struct SplitWarnings {
    bool empty_train = false;
    bool empty_valid = false;
    bool empty_test = false;
};

inline SplitCorpus chronological_split(const Corpus& corpus, std::int64_t boundary_valid,
                                       std::int64_t boundary_test,
                                       SplitWarnings* warnings = nullptr) {
    if (boundary_valid >= boundary_test)
        throw std::invalid_argument("chronological_split: boundary_valid must be < boundary_test");
    SplitCorpus split;
    split.boundary_valid = boundary_valid;
    split.boundary_test = boundary_test;
    for (const auto& it : corpus.interactions) {
        if (it.timestamp < boundary_valid)
            split.train.push_back(it);
        else if (it.timestamp < boundary_test)
            split.valid.push_back(it);
        else
            split.test.push_back(it);
    }
    if (warnings) {
        warnings->empty_train = split.train.empty();
        warnings->empty_valid = split.valid.empty();
        warnings->empty_test = split.test.empty();
    }
    return split;
}

struct SequenceSet {
    std::vector<UserSequence> sequences;
    std::size_t skipped_empty_history = 0;
};

// One sequence per interaction of the chosen phase: the target is that
// interaction's item, the history the user's <= L_max most recent strictly
// earlier interactions. Train histories come from train interactions only;
// valid/test histories may draw on all earlier interactions.
inline SequenceSet build_sequences(const Corpus& corpus, const SplitCorpus& split, Phase phase,
                                   int l_max = 10) {
    if (l_max < 1) throw std::invalid_argument("build_sequences: L_max must be >= 1");

    const std::vector<Interaction>* targets = nullptr;
    std::vector<Interaction> pool;
    switch (phase) {
    case Phase::train:
        targets = &split.train;
        pool = split.train;
        break;
    case Phase::valid:
        targets = &split.valid;
        pool = split.train;
        pool.insert(pool.end(), split.valid.begin(), split.valid.end());
        pool.insert(pool.end(), split.test.begin(), split.test.end());
        break;
    case Phase::test:
        targets = &split.test;
        pool = split.train;
        pool.insert(pool.end(), split.valid.begin(), split.valid.end());
        pool.insert(pool.end(), split.test.begin(), split.test.end());
        break;
    }

    // Per-user pool sorted by (timestamp, encounter order); stable sort keeps
    // the ingestion-order tie rule.
    std::unordered_map<std::string, std::vector<HistoryItem>> by_user;
    for (const auto& it : pool) {
        const Item& item = corpus.items.at(it.item);
        by_user[it.user].push_back({it.item, item.domain, it.timestamp});
    }
    for (auto& [user, hist] : by_user)
        std::stable_sort(hist.begin(), hist.end(),
                         [](const HistoryItem& a, const HistoryItem& b) { return a.timestamp < b.timestamp; });

    SequenceSet out;
    for (const auto& it : *targets) {
        const auto pit = by_user.find(it.user);
        std::vector<HistoryItem> history;
        if (pit != by_user.end()) {
            const auto& hist = pit->second;
            // Entries strictly earlier in time than the target.
            auto end = std::lower_bound(hist.begin(), hist.end(), it.timestamp,
                                        [](const HistoryItem& h, std::int64_t t) { return h.timestamp < t; });
            const auto count = std::min<std::ptrdiff_t>(end - hist.begin(), l_max);
            history.assign(end - count, end);
        }
        if (history.empty()) {
            ++out.skipped_empty_history;
            continue;
        }
        const Item& target_item = corpus.items.at(it.item);
        out.sequences.push_back(
            {it.user, std::move(history), it.item, target_item.domain, it.timestamp});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Noise injection
// ---------------------------------------------------------------------------

// Replaces items of randomly chosen interactions for a random subset of users
// with items the user never interacted with. Interactions at or after
// protect_from_timestamp are never touched, which lets evaluation harnesses
// corrupt histories while keeping targets intact. User count, interaction
// count, and timestamps are preserved.
inline Corpus inject_noise(const Corpus& corpus, double user_fraction, int items_per_user,
                           std::uint64_t seed,
                           std::int64_t protect_from_timestamp = std::numeric_limits<std::int64_t>::max()) {
    if (user_fraction < 0.0 || user_fraction > 1.0)
        throw std::invalid_argument("inject_noise: user_fraction must be in [0,1]");
    if (items_per_user < 0) throw std::invalid_argument("inject_noise: items_per_user must be >= 0");

    Corpus noised = corpus;
    if (user_fraction == 0.0 || items_per_user == 0) return noised;

    const std::set<std::string> user_set = corpus.users();
    std::vector<std::string> users(user_set.begin(), user_set.end());
    rng_t rng(derive_seed(seed, fnv1a64("noise")));
    shuffle_inplace(users, rng);
    const std::size_t n_selected =
        static_cast<std::size_t>(user_fraction * static_cast<double>(users.size()));
    std::set<std::string> selected(users.begin(),
                                   users.begin() + static_cast<std::ptrdiff_t>(n_selected));

    std::unordered_map<std::string, std::vector<std::size_t>> eligible; // interaction indices
    std::unordered_map<std::string, std::unordered_set<std::string>> interacted;
    for (std::size_t i = 0; i < corpus.interactions.size(); ++i) {
        const auto& it = corpus.interactions[i];
        interacted[it.user].insert(it.item);
        if (selected.count(it.user) && it.timestamp < protect_from_timestamp)
            eligible[it.user].push_back(i);
    }

    std::vector<std::string> catalog;
    catalog.reserve(corpus.items.size());
    for (const auto& [id, item] : corpus.items) catalog.push_back(id);

    for (const auto& user : selected) { // std::set iteration: deterministic order
        auto eit = eligible.find(user);
        if (eit == eligible.end()) continue;
        auto slots = eit->second;
        if (static_cast<int>(slots.size()) > items_per_user) {
            shuffle_inplace(slots, rng);
            slots.resize(static_cast<std::size_t>(items_per_user));
        }
        const auto& owned = interacted.at(user);
        for (std::size_t idx : slots) {
            std::string replacement;
            for (std::size_t attempt = 0; attempt < catalog.size() * 4 + 16; ++attempt) {
                const auto& cand = catalog[uniform_below(rng, catalog.size())];
                if (!owned.count(cand)) {
                    replacement = cand;
                    break;
                }
            }
            if (!replacement.empty()) noised.interactions[idx].item = replacement;
        }
    }
    return noised;
}

} // namespace hum

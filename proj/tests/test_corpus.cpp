#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hum/corpus.hpp"

using namespace hum;

namespace {

std::string temp_path(const std::string& name) {
    return "corpus_test_" + name + ".jsonl";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// Mean over users and domain pairs of the correlation between the user's
// planted item-affinity profiles in the two domains.
double mean_cross_domain_corr(const GenConfig& cfg) {
    const GenLatents lat = generate_latents(cfg);
    double total = 0;
    int count = 0;
    for (int u = 0; u < lat.total_users; ++u)
        for (int da = 0; da < cfg.n_domains; ++da)
            for (int db = da + 1; db < cfg.n_domains; ++db) {
                std::vector<double> a, b;
                for (int j = 0; j < cfg.items_per_domain; ++j) {
                    a.push_back(lat.affinity(u, da, j));
                    b.push_back(lat.affinity(u, db, j));
                }
                total += pearson(a, b);
                ++count;
            }
    return total / count;
}

Corpus tiny_corpus() {
    Corpus c;
    c.domains = {{0, "books"}, {1, "games"}};
    auto add_item = [&](const std::string& id, int d, const std::string& title) {
        c.items.emplace(id, Item{id, d, title});
    };
    add_item("b1", 0, "alpha tale");
    add_item("b2", 0, "beta tale");
    add_item("b3", 0, "gamma tale");
    add_item("g1", 1, "delta quest");
    add_item("g2", 1, "epsilon quest");
    return c;
}

} // namespace

TEST_CASE("generator is deterministic and well formed") {
    GenConfig cfg;
    cfg.users_per_domain = 20;
    cfg.items_per_domain = 30;
    cfg.interactions_per_user = 12;
    const Corpus a = generate_synthetic(cfg);
    const Corpus b = generate_synthetic(cfg);

    REQUIRE(a.domains.size() == 3);
    REQUIRE(a.items.size() == 3u * 30u);
    REQUIRE(a.users().size() == 3u * 20u);
    REQUIRE(a.interactions.size() == 3u * 20u * 12u);

    REQUIRE(a.interactions.size() == b.interactions.size());
    for (std::size_t i = 0; i < a.interactions.size(); ++i) {
        REQUIRE(a.interactions[i].user == b.interactions[i].user);
        REQUIRE(a.interactions[i].item == b.interactions[i].item);
        REQUIRE(a.interactions[i].timestamp == b.interactions[i].timestamp);
    }

    std::map<std::string, std::set<std::int64_t>> per_user_ts;
    for (const auto& it : a.interactions) {
        REQUIRE(a.items.count(it.item) == 1);
        REQUIRE(it.timestamp >= 1);
        REQUIRE(it.timestamp <= 12);
        REQUIRE(per_user_ts[it.user].insert(it.timestamp).second); // one event per step
    }
    for (const auto& [u, ts] : per_user_ts) REQUIRE(ts.size() == 12);

    for (const auto& [id, item] : a.items) {
        REQUIRE_FALSE(item.title.empty());
        // First title token names the item's domain.
        const auto sp = item.title.find(' ');
        REQUIRE(item.title.substr(0, sp) == a.domains[static_cast<std::size_t>(item.domain)].name);
    }
}

TEST_CASE("generator respects per-domain user count overrides") {
    GenConfig cfg;
    cfg.n_domains = 3;
    cfg.domain_user_counts = {50, 5, 5};
    cfg.users_per_domain = 999; // ignored
    cfg.items_per_domain = 20;
    cfg.interactions_per_user = 6;
    const Corpus c = generate_synthetic(cfg);
    REQUIRE(c.users().size() == 60u);
    REQUIRE(c.interactions.size() == 360u);
}

TEST_CASE("users favor their home domain") {
    GenConfig cfg;
    cfg.users_per_domain = 60;
    cfg.items_per_domain = 40;
    cfg.interactions_per_user = 20;
    const Corpus c = generate_synthetic(cfg);
    // Home selection probability is 0.6 + 0.4/3. Users are laid out in blocks
    // of 60 per home domain, ids in creation order u0, u1, ...
    std::size_t home_hits = 0;
    for (const auto& it : c.interactions) {
        const int uid = std::stoi(it.user.substr(1));
        const int home = uid / 60;
        if (c.items.at(it.item).domain == home) ++home_hits;
    }
    const double frac = static_cast<double>(home_hits) / static_cast<double>(c.interactions.size());
    REQUIRE(frac > 0.70);
    REQUIRE(frac < 0.77);
}

TEST_CASE("home domain probability steers the schedule to its extremes") {
    GenConfig cfg;
    cfg.users_per_domain = 40;
    cfg.items_per_domain = 20;
    cfg.interactions_per_user = 10;

    auto home_fraction = [](const Corpus& c, int block) {
        std::size_t hits = 0;
        for (const auto& it : c.interactions) {
            const int uid = std::stoi(it.user.substr(1));
            if (c.items.at(it.item).domain == uid / block) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(c.interactions.size());
    };

    cfg.home_domain_prob = 1.0;
    REQUIRE(home_fraction(generate_synthetic(cfg), 40) == 1.0);

    // Fallback picks uniformly over all domains, so P(home) = 1/3.
    cfg.home_domain_prob = 0.0;
    const double f0 = home_fraction(generate_synthetic(cfg), 40);
    REQUIRE(f0 > 0.28);
    REQUIRE(f0 < 0.39);

    cfg.home_domain_prob = 1.5;
    REQUIRE_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("planted cross-domain correlation grows with strength") {
    GenConfig cfg;
    cfg.users_per_domain = 30;
    cfg.items_per_domain = 60;
    const double c0 = mean_cross_domain_corr([&] { auto c = cfg; c.cross_domain_strength = 0.0; return c; }());
    const double c5 = mean_cross_domain_corr([&] { auto c = cfg; c.cross_domain_strength = 0.5; return c; }());
    const double c1 = mean_cross_domain_corr([&] { auto c = cfg; c.cross_domain_strength = 1.0; return c; }());
    REQUIRE(std::abs(c0) < 0.15);
    REQUIRE(c5 > c0 + 0.1);
    REQUIRE(c1 > c5 + 0.1);
    REQUIRE(c1 > 0.5);
}

TEST_CASE("config validation rejects bad values") {
    GenConfig cfg;
    cfg.n_domains = 0;
    REQUIRE_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
    cfg = GenConfig{};
    cfg.cross_domain_strength = 1.5;
    REQUIRE_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
    cfg = GenConfig{};
    cfg.latent_dim = 1;
    REQUIRE_THROWS_AS(generate_latents(cfg), std::invalid_argument);
    cfg = GenConfig{};
    cfg.domain_user_counts = {1, 2}; // wrong length for 3 domains
    REQUIRE_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("export then ingest reproduces the corpus") {
    GenConfig cfg;
    cfg.users_per_domain = 10;
    cfg.items_per_domain = 15;
    cfg.interactions_per_user = 8;
    const Corpus a = generate_synthetic(cfg);
    const auto path = temp_path("roundtrip");
    export_jsonl(a, path);
    const IngestResult r = ingest_jsonl(path, /*apply_five_core=*/false);
    std::remove(path.c_str());

    REQUIRE(r.duplicates_dropped == 0);
    REQUIRE(r.corpus.interactions.size() == a.interactions.size());
    for (std::size_t i = 0; i < a.interactions.size(); ++i) {
        REQUIRE(r.corpus.interactions[i].user == a.interactions[i].user);
        REQUIRE(r.corpus.interactions[i].item == a.interactions[i].item);
        REQUIRE(r.corpus.interactions[i].timestamp == a.interactions[i].timestamp);
    }
    for (const auto& [id, item] : a.items) {
        if (!r.corpus.items.count(id)) continue; // items never interacted with are not exported
        const Item& got = r.corpus.items.at(id);
        REQUIRE(got.title == item.title);
        REQUIRE(r.corpus.domains[static_cast<std::size_t>(got.domain)].name ==
                a.domains[static_cast<std::size_t>(item.domain)].name);
    }
}

TEST_CASE("ingest reports line and field errors") {
    const auto path = temp_path("errors");

    write_file(path,
               R"({"user_id":"u1","item_id":"i1","domain":"d","title":"t","timestamp":1})" "\n"
               R"({"user_id":"u1","item_id":"i2","domain":"d","timestamp":2})" "\n");
    REQUIRE_THROWS_WITH(ingest_jsonl(path), "line 2: missing field title");

    write_file(path,
               R"({"user_id":"u1","item_id":"i1","domain":"d","title":"t","timestamp":1})" "\n"
               "not json at all\n");
    REQUIRE_THROWS_WITH(ingest_jsonl(path), Catch::Matchers::StartsWith("line 2: malformed JSON"));

    write_file(path,
               R"({"user_id":"u1","item_id":"i1","domain":"d","title":"t","timestamp":"soon"})" "\n");
    REQUIRE_THROWS_WITH(ingest_jsonl(path), "line 1: field timestamp must be an integer");

    write_file(path, R"({"user_id":"u1","item_id":"i1","domain":"d","title":"","timestamp":1})" "\n");
    REQUIRE_THROWS_WITH(ingest_jsonl(path), "line 1: field title is empty");

    std::remove(path.c_str());
}

TEST_CASE("ingest drops duplicate interactions and counts them") {
    const auto path = temp_path("dups");
    std::string row = R"({"user_id":"u1","item_id":"i1","domain":"d","title":"t","timestamp":5})";
    write_file(path, row + "\n" + row + "\n" + row + "\n");
    const IngestResult r = ingest_jsonl(path, false);
    std::remove(path.c_str());
    REQUIRE(r.corpus.interactions.size() == 1);
    REQUIRE(r.duplicates_dropped == 2);
}

TEST_CASE("five-core filter removes sparse users and items, cascading") {
    Corpus c = tiny_corpus();
    // heavy user/item pair: u1..u6 all hit b1 five+ times via distinct timestamps
    std::int64_t t = 0;
    for (int u = 1; u <= 6; ++u)
        for (int k = 0; k < 5; ++k)
            c.interactions.push_back({"u" + std::to_string(u), "b1", ++t});
    // sparse user u7: 2 interactions; its item g1 has only those 2
    c.interactions.push_back({"u7", "g1", ++t});
    c.interactions.push_back({"u7", "g1", ++t});

    std::size_t users_dropped = 0, items_dropped = 0;
    five_core_filter(c, users_dropped, items_dropped);
    REQUIRE(users_dropped == 1);
    REQUIRE(items_dropped >= 1); // g1 falls with u7; untouched b2/b3/g2 have zero count
    REQUIRE(c.items.count("b1") == 1);
    REQUIRE(c.items.count("g1") == 0);
    for (const auto& it : c.interactions) REQUIRE(it.user != "u7");
    REQUIRE(c.interactions.size() == 30);
}

TEST_CASE("chronological split partitions by timestamp") {
    GenConfig cfg;
    cfg.users_per_domain = 10;
    cfg.items_per_domain = 15;
    cfg.interactions_per_user = 10;
    const Corpus c = generate_synthetic(cfg);
    SplitWarnings w;
    const SplitCorpus s = chronological_split(c, 8, 10, &w);
    REQUIRE(s.train.size() + s.valid.size() + s.test.size() == c.interactions.size());
    for (const auto& it : s.train) REQUIRE(it.timestamp < 8);
    for (const auto& it : s.valid) {
        REQUIRE(it.timestamp >= 8);
        REQUIRE(it.timestamp < 10);
    }
    for (const auto& it : s.test) REQUIRE(it.timestamp >= 10);
    REQUIRE_FALSE(w.empty_valid);
    REQUIRE_FALSE(w.empty_test);

    REQUIRE_THROWS_AS(chronological_split(c, 10, 10, nullptr), std::invalid_argument);
    REQUIRE_THROWS_AS(chronological_split(c, 11, 10, nullptr), std::invalid_argument);

    chronological_split(c, 1, 2, &w); // nothing earlier than t=1
    REQUIRE(w.empty_train);
    chronological_split(c, 100, 200, &w); // everything earlier than t=100
    REQUIRE(w.empty_valid);
    REQUIRE(w.empty_test);
}

TEST_CASE("sequence construction: history window, skips, strictness") {
    Corpus c;
    c.domains = {{0, "d"}};
    for (int j = 1; j <= 20; ++j) {
        const std::string id = "i" + std::to_string(j);
        c.items.emplace(id, Item{id, 0, "title " + std::to_string(j)});
    }
    // u1: one interaction per t = 1..13
    for (int t = 1; t <= 13; ++t)
        c.interactions.push_back({"u1", "i" + std::to_string(t), t});
    // u2: two interactions at the same timestamp
    c.interactions.push_back({"u2", "i1", 4});
    c.interactions.push_back({"u2", "i2", 7});
    c.interactions.push_back({"u2", "i3", 7});

    const SplitCorpus s = chronological_split(c, 13, 14, nullptr);
    REQUIRE(s.valid.size() == 1);

    const SequenceSet valid = build_sequences(c, s, Phase::valid, 10);
    REQUIRE(valid.sequences.size() == 1);
    const UserSequence& q = valid.sequences[0];
    REQUIRE(q.target == "i13");
    REQUIRE(q.history.size() == 10);
    REQUIRE(q.history.front().item == "i3"); // 12 earlier items, most recent 10 kept
    REQUIRE(q.history.back().item == "i12");
    for (std::size_t i = 1; i < q.history.size(); ++i)
        REQUIRE(q.history[i - 1].timestamp <= q.history[i].timestamp);

    const SequenceSet train = build_sequences(c, s, Phase::train, 10);
    // u1 target at t=1 and u2 target at t=4 have no earlier interaction.
    REQUIRE(train.skipped_empty_history == 2);
    for (const auto& sq : train.sequences) {
        REQUIRE_FALSE(sq.history.empty());
        for (const auto& h : sq.history) REQUIRE(h.timestamp < sq.target_timestamp);
        if (sq.user == "u2") {
            // Tied timestamps are excluded: both t=7 targets see only i1.
            REQUIRE(sq.history.size() == 1);
            REQUIRE(sq.history[0].item == "i1");
        }
    }

    REQUIRE_THROWS_AS(build_sequences(c, s, Phase::train, 0), std::invalid_argument);
}

TEST_CASE("valid histories may span split boundaries") {
    Corpus c;
    c.domains = {{0, "d"}};
    for (int j = 1; j <= 6; ++j) {
        const std::string id = "i" + std::to_string(j);
        c.items.emplace(id, Item{id, 0, "t " + std::to_string(j)});
    }
    c.interactions.push_back({"u1", "i1", 1});
    c.interactions.push_back({"u1", "i2", 5});
    c.interactions.push_back({"u1", "i3", 6});
    const SplitCorpus s = chronological_split(c, 5, 6, nullptr);

    const SequenceSet test = build_sequences(c, s, Phase::test, 10);
    REQUIRE(test.sequences.size() == 1);
    REQUIRE(test.sequences[0].history.size() == 2); // train item and valid item both visible
    REQUIRE(test.sequences[0].history[1].item == "i2");
}

TEST_CASE("noise injection conserves structure and avoids owned items") {
    GenConfig cfg;
    cfg.users_per_domain = 20;
    cfg.items_per_domain = 40;
    cfg.interactions_per_user = 10;
    const Corpus c = generate_synthetic(cfg);

    const Corpus n1 = inject_noise(c, 0.4, 2, 123);
    const Corpus n2 = inject_noise(c, 0.4, 2, 123);
    const Corpus n3 = inject_noise(c, 0.4, 2, 124);

    REQUIRE(n1.interactions.size() == c.interactions.size());
    REQUIRE(n1.users() == c.users());
    std::size_t diff12 = 0, diff13 = 0;
    for (std::size_t i = 0; i < c.interactions.size(); ++i) {
        REQUIRE(n1.interactions[i].user == c.interactions[i].user);
        REQUIRE(n1.interactions[i].timestamp == c.interactions[i].timestamp);
        if (n1.interactions[i].item != n2.interactions[i].item) ++diff12;
        if (n1.interactions[i].item != n3.interactions[i].item) ++diff13;
    }
    REQUIRE(diff12 == 0);  // same seed, same result
    REQUIRE(diff13 > 0);   // different seed moves

    // Changed rows belong to exactly floor(0.4 * users) users, and the new
    // item was never interacted with by that user originally.
    std::map<std::string, std::set<std::string>> owned;
    for (const auto& it : c.interactions) owned[it.user].insert(it.item);
    std::set<std::string> touched;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < c.interactions.size(); ++i) {
        if (n1.interactions[i].item == c.interactions[i].item) continue;
        ++changed;
        touched.insert(c.interactions[i].user);
        REQUIRE(owned[c.interactions[i].user].count(n1.interactions[i].item) == 0);
    }
    REQUIRE(touched.size() == 24); // floor(0.4 * 60)
    REQUIRE(changed == 24 * 2);

    const Corpus untouched = inject_noise(c, 0.0, 2, 123);
    for (std::size_t i = 0; i < c.interactions.size(); ++i)
        REQUIRE(untouched.interactions[i].item == c.interactions[i].item);
}

TEST_CASE("noise injection respects the protected-timestamp cutoff") {
    GenConfig cfg;
    cfg.users_per_domain = 15;
    cfg.items_per_domain = 30;
    cfg.interactions_per_user = 10;
    const Corpus c = generate_synthetic(cfg);
    const Corpus n = inject_noise(c, 1.0, 100, 9, /*protect_from_timestamp=*/8);
    for (std::size_t i = 0; i < c.interactions.size(); ++i) {
        if (c.interactions[i].timestamp >= 8)
            REQUIRE(n.interactions[i].item == c.interactions[i].item);
        else
            REQUIRE(n.interactions[i].item != c.interactions[i].item);
    }
}

#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hum/config.hpp"
#include "hum/corpus.hpp"
#include "hum/eval.hpp"
#include "hum/trainloop.hpp"

// Orchestration shared by the command-line tool and the end-to-end tests:
// prepare a corpus, train, evaluate, and write a run directory whose bytes
// are a pure function of the configuration.

namespace hum {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_file: cannot open " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.good()) throw std::runtime_error("write_file: write failed for " + path);
}

inline std::string history_csv(const std::vector<StepRecord>& history,
                               const std::vector<DomainId>& domains) {
    std::string out = "step,loss";
    for (const auto& d : domains) out += ",w_" + d.name;
    out += "\n";
    for (const auto& row : history) {
        out += std::to_string(row.step) + "," + format_double(row.loss);
        for (double w : row.weights) out += "," + format_double(w);
        out += "\n";
    }
    return out;
}

inline std::string weights_csv(const std::vector<WeightUpdateRecord>& updates,
                               const std::vector<DomainId>& domains) {
    std::string out = "step";
    for (const auto& d : domains) out += ",mean_" + d.name;
    for (const auto& d : domains) out += ",di_" + d.name;
    for (const auto& d : domains) out += ",w_" + d.name;
    out += "\n";
    for (const auto& row : updates) {
        out += std::to_string(row.step);
        for (double v : row.window_means) out += "," + format_double(v);
        for (double v : row.importance) out += "," + format_double(v);
        for (double v : row.weights) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

// Generated corpus with training-era noise applied when configured. The
// split boundaries shield validation and test interactions from rewrites.
inline Corpus prepare_corpus(RunConfig rc) {
    rc.split.resolve(rc.gen.interactions_per_user);
    Corpus corpus = generate_synthetic(rc.gen);
    if (rc.noise.user_fraction > 0.0) {
        const std::int64_t cutoff = rc.noise.protect_eval
                                        ? rc.split.valid_from
                                        : std::numeric_limits<std::int64_t>::max();
        corpus = inject_noise(corpus, rc.noise.user_fraction, rc.noise.items_per_user,
                              rc.noise.seed, cutoff);
    }
    return corpus;
}

struct RunSummary {
    MetricReport valid;
    MetricReport test;
    std::vector<LengthBucket> heterogeneity; // over the test sequences
    long long steps = 0;
    int best_epoch = 0;
    double best_metric = std::numeric_limits<double>::quiet_NaN();
    bool stopped_early = false;
    std::vector<double> final_weights;
    std::size_t train_sequences = 0;
    std::size_t valid_sequences = 0;
    std::size_t test_sequences = 0;
};

inline nlohmann::json summary_to_json(const RunSummary& s, const std::vector<DomainId>& domains) {
    nlohmann::json weights = nlohmann::json::array();
    for (double w : s.final_weights) weights.push_back(w);
    nlohmann::json het = nlohmann::json::array();
    for (const auto& b : s.heterogeneity) {
        nlohmann::json row = metrics_to_json(b.metrics);
        row["bucket"] = b.label;
        het.push_back(row);
    }
    return {{"valid", report_to_json(s.valid, domains)},
            {"test", report_to_json(s.test, domains)},
            {"heterogeneity", het},
            {"steps", s.steps},
            {"best_epoch", s.best_epoch},
            {"best_metric", s.best_metric},
            {"stopped_early", s.stopped_early},
            {"final_weights", weights},
            {"train_sequences", s.train_sequences},
            {"valid_sequences", s.valid_sequences},
            {"test_sequences", s.test_sequences}};
}

// Trains on the split, evaluates validation and test sequences with the
// returned snapshot, and (when out_dir is non-empty) writes the full run
// directory: resolved config, vocabulary, checkpoint, step history, weight
// updates, summary, and a manifest of output hashes.
template <typename Real>
RunSummary run_train_eval(const Corpus& corpus, const SplitCorpus& split, const RunConfig& rc,
                          const std::string& out_dir) {
    const Vocabulary vocab = Vocabulary::build(corpus);
    const TrainResult<Real> tr = train<Real>(corpus, split, vocab, rc.train);

    EvalOptions eval_opt = rc.eval;
    eval_opt.input_flags =
        InputFlags{rc.train.ablation.no_prompt, rc.train.ablation.no_user_token};

    RunSummary s;
    s.steps = tr.steps;
    s.best_epoch = tr.best_epoch;
    s.best_metric = tr.best_metric;
    s.stopped_early = tr.stopped_early;
    s.final_weights = tr.final_weights;
    s.train_sequences = tr.train_sequences;
    s.valid_sequences = tr.valid_sequences;

    const SequenceSet valid_set = build_sequences(corpus, split, Phase::valid, rc.train.l_max);
    if (!valid_set.sequences.empty())
        s.valid = evaluate_split(tr.params, vocab, corpus, valid_set.sequences, eval_opt);
    const SequenceSet test_set = build_sequences(corpus, split, Phase::test, rc.train.l_max);
    s.test_sequences = test_set.sequences.size();
    if (!test_set.sequences.empty()) {
        const auto ranks = score_sequences(tr.params, vocab, corpus, test_set.sequences, eval_opt);
        s.test = aggregate_metrics(ranks);
        s.heterogeneity = heterogeneity_report(ranks);
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto p = [&](const char* name) { return out_dir + "/" + name; };
        write_file(p("resolved_config.json"), dump_run_config(rc).dump(2) + "\n");
        vocab.save(p("vocab.json"));
        save_checkpoint(tr.params, vocab.hash(), p("checkpoint.bin"));
        write_file(p("history.csv"), history_csv(tr.history, corpus.domains));
        write_file(p("weights.csv"), weights_csv(tr.weight_updates, corpus.domains));
        write_file(p("summary.json"), summary_to_json(s, corpus.domains).dump(2) + "\n");
        nlohmann::json files = nlohmann::json::object();
        for (const char* name : {"resolved_config.json", "vocab.json", "checkpoint.bin",
                                 "history.csv", "weights.csv", "summary.json"})
            files[name] = detail::hash_hex(hash_file(p(name)));
        write_file(p("manifest.json"),
                   nlohmann::json{{"command", "train"}, {"files", files}}.dump(2) + "\n");
    }
    return s;
}

inline RunSummary run_train_eval_dispatch(const Corpus& corpus, const SplitCorpus& split,
                                          const RunConfig& rc, const std::string& out_dir) {
    return rc.use_float64 ? run_train_eval<double>(corpus, split, rc, out_dir)
                          : run_train_eval<float>(corpus, split, rc, out_dir);
}

// The seven standard variants: the full method plus single-mechanism
// removals, in the fixed order reports list them.
inline std::vector<std::pair<std::string, TrainConfig>> ablation_grid(const TrainConfig& base) {
    std::vector<std::pair<std::string, TrainConfig>> grid;
    grid.emplace_back("HUM", base);
    {
        TrainConfig c = base;
        c.ablation.no_prompt = true;
        grid.emplace_back("HUM w/o prompt", c);
    }
    {
        TrainConfig c = base;
        c.ablation.no_user_token = true;
        grid.emplace_back("HUM w/o user token", c);
    }
    {
        TrainConfig c = base;
        c.ablation.no_user_token = true;
        c.ablation.no_prompt = true;
        grid.emplace_back("HUM w/o user token & prompt", c);
    }
    {
        TrainConfig c = base;
        c.ablation.no_mask = true;
        grid.emplace_back("HUM w/o mask", c);
    }
    {
        TrainConfig c = base;
        c.ablation.no_di = true;
        grid.emplace_back("HUM w/o DI", c);
    }
    {
        TrainConfig c = base;
        c.ablation.bidirectional = true;
        grid.emplace_back("HUM w/ bidirectional atten.", c);
    }
    return grid;
}

inline std::string slugify(const std::string& name) {
    std::string s;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!s.empty() && s.back() != '-')
            s.push_back('-');
    }
    while (!s.empty() && s.back() == '-') s.pop_back();
    return s;
}

// Trains and evaluates every ablation variant on the same corpus and split.
inline nlohmann::json run_ablate(const Corpus& corpus, const SplitCorpus& split,
                                 const RunConfig& rc, const std::string& out_dir) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [name, train_cfg] : ablation_grid(rc.train)) {
        RunConfig vc = rc;
        vc.train = train_cfg;
        const std::string sub = out_dir.empty() ? "" : out_dir + "/" + slugify(name);
        const RunSummary s = run_train_eval_dispatch(corpus, split, vc, sub);
        nlohmann::json row = {{"name", name}, {"test", report_to_json(s.test, corpus.domains)}};
        rows.push_back(row);
    }
    nlohmann::json report = {{"variants", rows}};
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/ablation_report.json", report.dump(2) + "\n");
    }
    return report;
}

// One-dimensional sweeps. "mask_ratio" retrains on the same corpus,
// "noise_fraction" re-injects noise into a fresh copy of the base corpus,
// "n_domains" regenerates the corpus per value.
inline nlohmann::json run_sweep(const RunConfig& rc, const std::string& key,
                                const std::vector<double>& values, const std::string& out_dir) {
    if (values.empty()) throw std::invalid_argument("run_sweep: no values");
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        const double value = values[vi];
        RunConfig vc = rc;
        if (key == "mask_ratio") {
            vc.train.mask_ratio = value;
        } else if (key == "noise_fraction") {
            vc.noise.user_fraction = value;
        } else if (key == "n_domains") {
            if (value < 1 || value != std::floor(value))
                throw std::invalid_argument("run_sweep: n_domains values must be positive integers");
            vc.gen.n_domains = static_cast<int>(value);
            vc.gen.domain_user_counts.clear();
        } else {
            throw std::invalid_argument("run_sweep: unknown key " + key +
                                        " (expected mask_ratio, noise_fraction, or n_domains)");
        }
        vc.split.resolve(vc.gen.interactions_per_user);
        const Corpus corpus = prepare_corpus(vc);
        const SplitCorpus split =
            chronological_split(corpus, vc.split.valid_from, vc.split.test_from);
        const std::string sub =
            out_dir.empty() ? "" : out_dir + "/" + key + "-" + format_double(value);
        const RunSummary s = run_train_eval_dispatch(corpus, split, vc, sub);
        rows.push_back({{"key", key},
                        {"value", value},
                        {"test", report_to_json(s.test, corpus.domains)},
                        {"macro_ndcg10", s.test.macro.ndcg10}});
    }
    nlohmann::json report = {{"sweep", key}, {"rows", rows}};
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/sweep_report.json", report.dump(2) + "\n");
    }
    return report;
}

struct HoldoutResult {
    MetricReport holdout;    // test sequences targeting the held-out domain
    MetricReport trained;    // test sequences targeting the training domains
    std::size_t holdout_sequences = 0;
};

// Trains with every interaction of one domain removed from the training and
// validation splits, then evaluates test sequences that target it. Histories
// may still contain the held-out domain's items: the point is whether the
// encoder transfers to targets it never trained on.
template <typename Real>
HoldoutResult holdout_domain_eval(const Corpus& corpus, const SplitCorpus& split,
                                  const RunConfig& rc, int holdout_domain) {
    if (holdout_domain < 0 || holdout_domain >= static_cast<int>(corpus.domains.size()))
        throw std::invalid_argument("holdout_domain_eval: bad domain index");

    SplitCorpus filtered = split;
    auto drop = [&](std::vector<Interaction>& v) {
        std::erase_if(v, [&](const Interaction& it) {
            return corpus.items.at(it.item).domain == holdout_domain;
        });
    };
    drop(filtered.train);
    drop(filtered.valid);

    const Vocabulary vocab = Vocabulary::build(corpus);
    const SequenceSet guard = build_sequences(corpus, filtered, Phase::train, rc.train.l_max);
    for (const auto& seq : guard.sequences)
        if (seq.target_domain == holdout_domain)
            throw std::logic_error("holdout_domain_eval: held-out domain leaked into training");

    const TrainResult<Real> tr = train<Real>(corpus, filtered, vocab, rc.train);

    EvalOptions eval_opt = rc.eval;
    eval_opt.input_flags =
        InputFlags{rc.train.ablation.no_prompt, rc.train.ablation.no_user_token};
    const SequenceSet test_set = build_sequences(corpus, split, Phase::test, rc.train.l_max);
    std::vector<UserSequence> held, rest;
    for (const auto& seq : test_set.sequences)
        (seq.target_domain == holdout_domain ? held : rest).push_back(seq);

    HoldoutResult out;
    out.holdout_sequences = held.size();
    if (!held.empty()) out.holdout = evaluate_split(tr.params, vocab, corpus, held, eval_opt);
    if (!rest.empty()) out.trained = evaluate_split(tr.params, vocab, corpus, rest, eval_opt);
    return out;
}

} // namespace hum

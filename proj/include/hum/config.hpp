#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hum/common.hpp"
#include "hum/corpus.hpp"
#include "hum/eval.hpp"
#include "hum/trainloop.hpp"

// Run configuration: one JSON document covering generation, split, training,
// evaluation, and noise settings. Unknown keys are rejected with their path
// so typos fail loudly instead of silently falling back to defaults.

namespace hum {

struct SplitSpec {
    // Interactions with timestamp >= valid_from go to validation, those with
    // timestamp >= test_from to test. 0 means "derive from the generator":
    // the last timestamp per user is test, the one before it validation.
    std::int64_t valid_from = 0;
    std::int64_t test_from = 0;

    void resolve(std::int64_t interactions_per_user) {
        if (valid_from == 0) valid_from = interactions_per_user - 1;
        if (test_from == 0) test_from = interactions_per_user;
    }
};

struct NoiseSpec {
    double user_fraction = 0.0;
    int items_per_user = 2;
    std::uint64_t seed = 99;
    bool protect_eval = true; // never rewrite validation or test interactions
};

struct RunConfig {
    GenConfig gen;
    SplitSpec split;
    TrainConfig train;
    NoiseSpec noise;
    EvalOptions eval;
    bool use_float64 = false; // train in double instead of float
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                           const std::string& path) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw std::invalid_argument("config: unknown key " + path + key);
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out) {
    const auto it = obj.find(key);
    if (it != obj.end()) out = it->get<T>();
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config: document must be an object");
    detail::reject_unknown(doc, {"gen", "split", "train", "eval", "noise", "use_float64"}, "");
    RunConfig rc;
    detail::take(doc, "use_float64", rc.use_float64);

    if (doc.contains("gen")) {
        const auto& g = doc.at("gen");
        detail::reject_unknown(g,
                               {"n_domains", "users_per_domain", "items_per_domain",
                                "interactions_per_user", "latent_dim", "cross_domain_strength",
                                "topic_count_per_domain", "vocab_words_per_topic", "seed",
                                "home_domain_prob", "domain_user_counts"},
                               "gen.");
        detail::take(g, "n_domains", rc.gen.n_domains);
        detail::take(g, "users_per_domain", rc.gen.users_per_domain);
        detail::take(g, "items_per_domain", rc.gen.items_per_domain);
        detail::take(g, "interactions_per_user", rc.gen.interactions_per_user);
        detail::take(g, "latent_dim", rc.gen.latent_dim);
        detail::take(g, "cross_domain_strength", rc.gen.cross_domain_strength);
        detail::take(g, "topic_count_per_domain", rc.gen.topic_count_per_domain);
        detail::take(g, "vocab_words_per_topic", rc.gen.vocab_words_per_topic);
        detail::take(g, "seed", rc.gen.seed);
        detail::take(g, "home_domain_prob", rc.gen.home_domain_prob);
        detail::take(g, "domain_user_counts", rc.gen.domain_user_counts);
    }
    if (doc.contains("split")) {
        const auto& s = doc.at("split");
        detail::reject_unknown(s, {"valid_from", "test_from"}, "split.");
        detail::take(s, "valid_from", rc.split.valid_from);
        detail::take(s, "test_from", rc.split.test_from);
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        detail::reject_unknown(
            t, {"dim",        "n_layers",    "n_heads",       "ffn_dim",
                "max_len",    "init_scale",  "attention",     "batch_size",
                "epochs",     "patience",    "lr",            "beta1",
                "beta2",      "adam_eps",    "weight_decay",  "n_negatives",
                "mask_ratio", "alpha",       "update_period", "di_use_normalized",
                "l_max",      "eval_threads", "seed",         "ablation"},
            "train.");
        detail::take(t, "dim", rc.train.encoder.dim);
        detail::take(t, "n_layers", rc.train.encoder.n_layers);
        detail::take(t, "n_heads", rc.train.encoder.n_heads);
        detail::take(t, "ffn_dim", rc.train.encoder.ffn_dim);
        detail::take(t, "max_len", rc.train.encoder.max_len);
        detail::take(t, "init_scale", rc.train.encoder.init_scale);
        if (t.contains("attention"))
            rc.train.encoder.attention = attention_from_name(t.at("attention").get<std::string>());
        detail::take(t, "batch_size", rc.train.batch_size);
        detail::take(t, "epochs", rc.train.epochs);
        detail::take(t, "patience", rc.train.patience);
        detail::take(t, "lr", rc.train.lr);
        detail::take(t, "beta1", rc.train.beta1);
        detail::take(t, "beta2", rc.train.beta2);
        detail::take(t, "adam_eps", rc.train.adam_eps);
        detail::take(t, "weight_decay", rc.train.weight_decay);
        detail::take(t, "n_negatives", rc.train.n_negatives);
        detail::take(t, "mask_ratio", rc.train.mask_ratio);
        detail::take(t, "alpha", rc.train.alpha);
        detail::take(t, "update_period", rc.train.update_period);
        detail::take(t, "di_use_normalized", rc.train.di_use_normalized);
        detail::take(t, "l_max", rc.train.l_max);
        detail::take(t, "eval_threads", rc.train.eval_threads);
        detail::take(t, "seed", rc.train.seed);
        if (t.contains("ablation")) {
            const auto& a = t.at("ablation");
            detail::reject_unknown(a,
                                   {"no_prompt", "no_user_token", "no_mask", "no_di",
                                    "bidirectional", "probability_form"},
                                   "train.ablation.");
            detail::take(a, "no_prompt", rc.train.ablation.no_prompt);
            detail::take(a, "no_user_token", rc.train.ablation.no_user_token);
            detail::take(a, "no_mask", rc.train.ablation.no_mask);
            detail::take(a, "no_di", rc.train.ablation.no_di);
            detail::take(a, "bidirectional", rc.train.ablation.bidirectional);
            detail::take(a, "probability_form", rc.train.ablation.probability_form);
        }
    }
    if (doc.contains("eval")) {
        const auto& e = doc.at("eval");
        detail::reject_unknown(e, {"normalize", "threads"}, "eval.");
        detail::take(e, "normalize", rc.eval.normalize);
        detail::take(e, "threads", rc.eval.threads);
    }
    if (doc.contains("noise")) {
        const auto& n = doc.at("noise");
        detail::reject_unknown(n, {"user_fraction", "items_per_user", "seed", "protect_eval"},
                               "noise.");
        detail::take(n, "user_fraction", rc.noise.user_fraction);
        detail::take(n, "items_per_user", rc.noise.items_per_user);
        detail::take(n, "seed", rc.noise.seed);
        detail::take(n, "protect_eval", rc.noise.protect_eval);
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + path + " is not valid JSON (" +
                                    std::string(e.what()) + ")");
    }
    return parse_run_config(doc);
}

// Resolved-config echo: every effective value, written with the run outputs
// so a run directory fully describes how it was produced.
inline nlohmann::json dump_run_config(const RunConfig& rc) {
    nlohmann::json doc;
    doc["gen"] = {{"n_domains", rc.gen.n_domains},
                  {"users_per_domain", rc.gen.users_per_domain},
                  {"items_per_domain", rc.gen.items_per_domain},
                  {"interactions_per_user", rc.gen.interactions_per_user},
                  {"latent_dim", rc.gen.latent_dim},
                  {"cross_domain_strength", rc.gen.cross_domain_strength},
                  {"topic_count_per_domain", rc.gen.topic_count_per_domain},
                  {"vocab_words_per_topic", rc.gen.vocab_words_per_topic},
                  {"seed", rc.gen.seed},
                  {"home_domain_prob", rc.gen.home_domain_prob},
                  {"domain_user_counts", rc.gen.domain_user_counts}};
    doc["split"] = {{"valid_from", rc.split.valid_from}, {"test_from", rc.split.test_from}};
    const TrainConfig& t = rc.train;
    doc["train"] = {{"dim", t.encoder.dim},
                    {"n_layers", t.encoder.n_layers},
                    {"n_heads", t.encoder.n_heads},
                    {"ffn_dim", t.encoder.ffn_dim},
                    {"max_len", t.encoder.max_len},
                    {"init_scale", t.encoder.init_scale},
                    {"attention", attention_name(t.encoder.attention)},
                    {"batch_size", t.batch_size},
                    {"epochs", t.epochs},
                    {"patience", t.patience},
                    {"lr", t.lr},
                    {"beta1", t.beta1},
                    {"beta2", t.beta2},
                    {"adam_eps", t.adam_eps},
                    {"weight_decay", t.weight_decay},
                    {"n_negatives", t.n_negatives},
                    {"mask_ratio", t.mask_ratio},
                    {"alpha", t.alpha},
                    {"update_period", t.update_period},
                    {"di_use_normalized", t.di_use_normalized},
                    {"l_max", t.l_max},
                    {"eval_threads", t.eval_threads},
                    {"seed", t.seed},
                    {"ablation",
                     {{"no_prompt", t.ablation.no_prompt},
                      {"no_user_token", t.ablation.no_user_token},
                      {"no_mask", t.ablation.no_mask},
                      {"no_di", t.ablation.no_di},
                      {"bidirectional", t.ablation.bidirectional},
                      {"probability_form", t.ablation.probability_form}}}};
    doc["eval"] = {{"normalize", rc.eval.normalize}, {"threads", rc.eval.threads}};
    doc["noise"] = {{"user_fraction", rc.noise.user_fraction},
                    {"items_per_user", rc.noise.items_per_user},
                    {"seed", rc.noise.seed},
                    {"protect_eval", rc.noise.protect_eval}};
    doc["use_float64"] = rc.use_float64;
    return doc;
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash_file: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(blob);
}

// Minimal JSON Schema checker: type / required / properties / items /
// additionalProperties / enum, which is all the report schema uses. Returns
// every violation with its path.
inline void schema_check_impl(const nlohmann::json& schema, const nlohmann::json& doc,
                              const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const std::string t = schema.at("type").get<std::string>();
        const bool ok = (t == "object" && doc.is_object()) || (t == "array" && doc.is_array()) ||
                        (t == "string" && doc.is_string()) ||
                        (t == "number" && doc.is_number()) ||
                        (t == "integer" && doc.is_number_integer()) ||
                        (t == "boolean" && doc.is_boolean()) || (t == "null" && doc.is_null());
        if (!ok) {
            errors.push_back(path + ": expected " + t);
            return;
        }
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& v : schema.at("enum"))
            if (v == doc) found = true;
        if (!found) errors.push_back(path + ": value not in enum");
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& r : schema.at("required"))
                if (!doc.contains(r.get<std::string>()))
                    errors.push_back(path + ": missing required key " + r.get<std::string>());
        const bool allow_extra = !schema.contains("additionalProperties") ||
                                 schema.at("additionalProperties").get<bool>();
        if (schema.contains("properties")) {
            const auto& props = schema.at("properties");
            for (const auto& [key, sub] : props.items())
                if (doc.contains(key)) schema_check_impl(sub, doc.at(key), path + "/" + key, errors);
            if (!allow_extra)
                for (const auto& [key, value] : doc.items())
                    if (!props.contains(key)) errors.push_back(path + ": unexpected key " + key);
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        const auto& sub = schema.at("items");
        for (std::size_t i = 0; i < doc.size(); ++i)
            schema_check_impl(sub, doc.at(i), path + "/" + std::to_string(i), errors);
    }
}

inline std::vector<std::string> schema_check(const nlohmann::json& schema,
                                             const nlohmann::json& doc) {
    std::vector<std::string> errors;
    schema_check_impl(schema, doc, "#", errors);
    return errors;
}

inline nlohmann::json metrics_to_json(const DomainMetrics& m) {
    return {{"count", m.count},   {"recall5", m.recall5}, {"recall10", m.recall10},
            {"ndcg5", m.ndcg5},   {"ndcg10", m.ndcg10}};
}

inline nlohmann::json report_to_json(const MetricReport& rep,
                                     const std::vector<DomainId>& domains) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [dom, m] : rep.per_domain) {
        nlohmann::json row = metrics_to_json(m);
        row["domain"] = domains.at(static_cast<std::size_t>(dom)).name;
        per[domains.at(static_cast<std::size_t>(dom)).name] = row;
    }
    return {{"per_domain", per},
            {"micro", metrics_to_json(rep.micro)},
            {"macro", metrics_to_json(rep.macro)}};
}

} // namespace hum

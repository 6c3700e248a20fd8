#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hum/config.hpp"
#include "hum/runner.hpp"

// Command-line front end. Every command writes its outputs under --out as a
// pure function of the configuration and seed, so rerunning a command
// reproduces its artifacts byte for byte.

namespace {

using nlohmann::json;

int env_threads() {
    const char* v = std::getenv("HUM_THREADS");
    if (!v) return 0;
    try {
        const int n = std::stoi(v);
        return n >= 1 ? n : 0;
    } catch (...) {
        return 0;
    }
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("--values: bad number " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("--values: no values given");
    return out;
}

hum::RunConfig load_config_or_default(const std::string& path) {
    return path.empty() ? hum::RunConfig{} : hum::load_run_config(path);
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& files) {
    json doc;
    doc["command"] = command;
    json fh = json::object();
    for (const auto& f : files) fh[f] = hum::detail::hash_hex(hum::hash_file(out_dir + "/" + f));
    doc["files"] = fh;
    hum::write_file(out_dir + "/manifest.json", doc.dump(2) + "\n");
}

void cmd_gen(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
             bool seed_set) {
    hum::RunConfig rc = load_config_or_default(config_path);
    if (seed_set) rc.gen.seed = seed;
    const hum::Corpus corpus = hum::prepare_corpus(rc);
    std::filesystem::create_directories(out_dir);
    hum::export_jsonl(corpus, out_dir + "/corpus.jsonl");

    json per_domain = json::object();
    std::map<int, std::size_t> counts;
    for (const auto& it : corpus.interactions) ++counts[corpus.items.at(it.item).domain];
    for (const auto& d : corpus.domains)
        per_domain[d.name] = counts.count(d.index) ? counts[d.index] : 0;
    const json summary = {{"users", corpus.users().size()},
                          {"items", corpus.items.size()},
                          {"interactions", corpus.interactions.size()},
                          {"domains", corpus.domains.size()},
                          {"interactions_per_domain", per_domain}};
    hum::write_file(out_dir + "/gen_summary.json", summary.dump(2) + "\n");
    hum::write_file(out_dir + "/resolved_config.json", hum::dump_run_config(rc).dump(2) + "\n");
    write_manifest(out_dir, "gen", {"corpus.jsonl", "gen_summary.json", "resolved_config.json"});
    std::printf("wrote %s/corpus.jsonl: %zu interactions, %zu items, %zu users\n",
                out_dir.c_str(), corpus.interactions.size(), corpus.items.size(),
                corpus.users().size());
}

void cmd_train(const std::string& config_path, const std::string& data_path,
               const std::string& out_dir, std::uint64_t seed, bool seed_set, int threads,
               bool f64, bool no_five_core) {
    hum::RunConfig rc = load_config_or_default(config_path);
    if (seed_set) rc.train.seed = seed;
    if (threads >= 1) {
        rc.eval.threads = threads;
        rc.train.eval_threads = threads;
    }
    if (f64) rc.use_float64 = true;
    rc.split.resolve(rc.gen.interactions_per_user);

    const hum::IngestResult ing = hum::ingest_jsonl(data_path, !no_five_core);
    const hum::SplitCorpus split =
        hum::chronological_split(ing.corpus, rc.split.valid_from, rc.split.test_from);
    const hum::RunSummary s = hum::run_train_eval_dispatch(ing.corpus, split, rc, out_dir);
    std::printf("trained %lld steps (best epoch %d), test macro ndcg@10 %s\n", s.steps,
                s.best_epoch, hum::format_double(s.test.macro.ndcg10).c_str());
    std::printf("run directory: %s\n", out_dir.c_str());
}

void cmd_eval(const std::string& run_dir, const std::string& data_path,
              const std::string& out_dir, const std::string& phase, bool normalize, int threads,
              bool no_five_core) {
    const hum::RunConfig rc = hum::load_run_config(run_dir + "/resolved_config.json");
    hum::RunConfig rc2 = rc;
    rc2.split.resolve(rc2.gen.interactions_per_user);
    if (normalize) rc2.eval.normalize = true;
    if (threads >= 1) rc2.eval.threads = threads;

    const hum::Vocabulary vocab = hum::Vocabulary::load(run_dir + "/vocab.json");
    const hum::IngestResult ing = hum::ingest_jsonl(data_path, !no_five_core);
    const hum::SplitCorpus split =
        hum::chronological_split(ing.corpus, rc2.split.valid_from, rc2.split.test_from);
    const hum::Phase ph = phase == "valid" ? hum::Phase::valid : hum::Phase::test;
    const hum::SequenceSet seqs =
        hum::build_sequences(ing.corpus, split, ph, rc2.train.l_max);
    if (seqs.sequences.empty()) throw std::runtime_error("eval: no sequences in phase " + phase);

    hum::EvalOptions opt = rc2.eval;
    opt.input_flags =
        hum::InputFlags{rc2.train.ablation.no_prompt, rc2.train.ablation.no_user_token};

    json report;
    auto run_with = [&](auto real_tag) {
        using Real = decltype(real_tag);
        const auto params =
            hum::load_checkpoint<Real>(run_dir + "/checkpoint.bin", vocab.hash());
        const auto ranks = hum::score_sequences(params, vocab, ing.corpus, seqs.sequences, opt);
        const hum::MetricReport rep = hum::aggregate_metrics(ranks);
        json het = json::array();
        for (const auto& b : hum::heterogeneity_report(ranks)) {
            json row = hum::metrics_to_json(b.metrics);
            row["bucket"] = b.label;
            het.push_back(row);
        }
        report = {{"phase", phase},
                  {"sequences", seqs.sequences.size()},
                  {"normalize", opt.normalize},
                  {"metrics", hum::report_to_json(rep, ing.corpus.domains)},
                  {"heterogeneity", het}};
    };
    if (rc2.use_float64) run_with(double{});
    else run_with(float{});

    std::filesystem::create_directories(out_dir);
    hum::write_file(out_dir + "/report.json", report.dump(2) + "\n");
    write_manifest(out_dir, "eval", {"report.json"});
    std::printf("macro ndcg@10 %s over %zu %s sequences\n",
                hum::format_double(report["metrics"]["macro"]["ndcg10"].get<double>()).c_str(),
                seqs.sequences.size(), phase.c_str());
}

void cmd_ablate(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                bool seed_set, int threads) {
    hum::RunConfig rc = load_config_or_default(config_path);
    if (seed_set) rc.train.seed = seed;
    if (threads >= 1) {
        rc.eval.threads = threads;
        rc.train.eval_threads = threads;
    }
    rc.split.resolve(rc.gen.interactions_per_user);
    const hum::Corpus corpus = hum::prepare_corpus(rc);
    const hum::SplitCorpus split =
        hum::chronological_split(corpus, rc.split.valid_from, rc.split.test_from);
    const json report = hum::run_ablate(corpus, split, rc, out_dir);
    for (const auto& row : report.at("variants"))
        std::printf("%-28s macro ndcg@10 %s\n", row.at("name").get<std::string>().c_str(),
                    hum::format_double(
                        row.at("test").at("macro").at("ndcg10").get<double>())
                        .c_str());
}

void cmd_sweep(const std::string& config_path, const std::string& key, const std::string& values,
               const std::string& out_dir, int threads) {
    hum::RunConfig rc = load_config_or_default(config_path);
    if (threads >= 1) {
        rc.eval.threads = threads;
        rc.train.eval_threads = threads;
    }
    const json report = hum::run_sweep(rc, key, parse_values(values), out_dir);
    for (const auto& row : report.at("rows"))
        std::printf("%s=%s macro ndcg@10 %s\n", key.c_str(),
                    hum::format_double(row.at("value").get<double>()).c_str(),
                    hum::format_double(row.at("macro_ndcg10").get<double>()).c_str());
}

void print_metric_block(const json& metrics) {
    std::printf("%-12s %8s %8s %8s %8s %8s\n", "domain", "count", "recall5", "recall10", "ndcg5",
                "ndcg10");
    auto line = [](const std::string& name, const json& m) {
        std::printf("%-12s %8zu %8.4f %8.4f %8.4f %8.4f\n", name.c_str(),
                    m.at("count").get<std::size_t>(), m.at("recall5").get<double>(),
                    m.at("recall10").get<double>(), m.at("ndcg5").get<double>(),
                    m.at("ndcg10").get<double>());
    };
    for (const auto& [name, m] : metrics.at("per_domain").items()) line(name, m);
    line("micro", metrics.at("micro"));
    line("macro", metrics.at("macro"));
}

void cmd_report(const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("report: cannot open " + in_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("report: " + in_path + " is not valid JSON (" + e.what() + ")");
    }
    if (doc.contains("variants")) {
        std::printf("%-28s %8s %8s %8s %8s\n", "variant", "recall5", "recall10", "ndcg5",
                    "ndcg10");
        for (const auto& row : doc.at("variants")) {
            const json& m = row.at("test").at("macro");
            std::printf("%-28s %8.4f %8.4f %8.4f %8.4f\n",
                        row.at("name").get<std::string>().c_str(), m.at("recall5").get<double>(),
                        m.at("recall10").get<double>(), m.at("ndcg5").get<double>(),
                        m.at("ndcg10").get<double>());
        }
    } else if (doc.contains("rows")) {
        std::printf("%-20s %10s %10s\n", "key", "value", "ndcg10");
        for (const auto& row : doc.at("rows"))
            std::printf("%-20s %10.4f %10.4f\n", row.at("key").get<std::string>().c_str(),
                        row.at("value").get<double>(), row.at("macro_ndcg10").get<double>());
    } else if (doc.contains("metrics")) {
        std::printf("phase %s, %zu sequences\n", doc.at("phase").get<std::string>().c_str(),
                    doc.at("sequences").get<std::size_t>());
        print_metric_block(doc.at("metrics"));
    } else if (doc.contains("test")) {
        std::printf("test metrics:\n");
        print_metric_block(doc.at("test"));
    } else {
        throw std::runtime_error("report: unrecognized report shape in " + in_path);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-domain sequential recommender: generate, train, evaluate"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, run_dir, in_path;
    std::string phase = "test", key, values;
    std::uint64_t seed = 0;
    int threads = env_threads();
    bool f64 = false, no_five_core = false, normalize = false;

    std::function<void()> action;

    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
    gen->add_option("--config", config_path, "JSON run configuration");
    gen->add_option("--out", out_dir, "Output directory")->required();
    auto* gen_seed = gen->add_option("--seed", seed, "Override the generator seed");
    gen->callback([&] { action = [&] { cmd_gen(config_path, out_dir, seed, gen_seed->count() > 0); }; });

    auto* tr = app.add_subcommand("train", "Train on a JSONL interaction corpus");
    tr->add_option("--config", config_path, "JSON run configuration");
    tr->add_option("--data", data_path, "Interaction corpus (JSONL)")->required();
    tr->add_option("--out", out_dir, "Run directory to write")->required();
    auto* tr_seed = tr->add_option("--seed", seed, "Override the training seed");
    tr->add_option("--threads", threads, "Evaluation threads (or HUM_THREADS)");
    tr->add_flag("--f64", f64, "Train in double precision");
    tr->add_flag("--no-five-core", no_five_core, "Skip the five-core ingest filter");
    tr->callback([&] {
        action = [&] {
            cmd_train(config_path, data_path, out_dir, seed, tr_seed->count() > 0, threads, f64,
                      no_five_core);
        };
    });

    auto* ev = app.add_subcommand("eval", "Evaluate a trained run directory");
    ev->add_option("--run", run_dir, "Run directory from train")->required();
    ev->add_option("--data", data_path, "Interaction corpus (JSONL)")->required();
    ev->add_option("--out", out_dir, "Output directory")->required();
    ev->add_option("--phase", phase, "valid or test")
        ->check(CLI::IsMember({"valid", "test"}));
    ev->add_flag("--normalize", normalize, "Cosine scores instead of inner products");
    ev->add_option("--threads", threads, "Evaluation threads (or HUM_THREADS)");
    ev->add_flag("--no-five-core", no_five_core, "Skip the five-core ingest filter");
    ev->callback([&] {
        action = [&] {
            cmd_eval(run_dir, data_path, out_dir, phase, normalize, threads, no_five_core);
        };
    });

    auto* ab = app.add_subcommand("ablate", "Train and compare the standard variants");
    ab->add_option("--config", config_path, "JSON run configuration");
    ab->add_option("--out", out_dir, "Output directory")->required();
    auto* ab_seed = ab->add_option("--seed", seed, "Override the training seed");
    ab->add_option("--threads", threads, "Evaluation threads (or HUM_THREADS)");
    ab->callback([&] {
        action = [&] { cmd_ablate(config_path, out_dir, seed, ab_seed->count() > 0, threads); };
    });

    auto* sw = app.add_subcommand("sweep", "Sweep one configuration key");
    sw->add_option("--config", config_path, "JSON run configuration");
    sw->add_option("--key", key, "mask_ratio, noise_fraction, or n_domains")->required();
    sw->add_option("--values", values, "Comma-separated values")->required();
    sw->add_option("--out", out_dir, "Output directory")->required();
    sw->add_option("--threads", threads, "Evaluation threads (or HUM_THREADS)");
    sw->callback([&] { action = [&] { cmd_sweep(config_path, key, values, out_dir, threads); }; });

    auto* rp = app.add_subcommand("report", "Pretty-print a report JSON");
    rp->add_option("--in", in_path, "Report file")->required();
    rp->callback([&] { action = [&] { cmd_report(in_path); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        action();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

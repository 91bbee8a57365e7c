// disent: companion-loss representation learning toolkit.
//
// Subcommands:
//   embed              corpus CSV + word vectors -> binary feature cache
//   train-classifier   softmax classifier with optional companion loss
//   train-autoencoder  autoencoder with optional companion loss + clustering
//   cluster-eval       k-means + cluster quality metrics over a cache
//
// Exit codes: 0 success, 2 usage/input error, 1 runtime failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <disent/disent.hpp>

namespace fs = std::filesystem;
using namespace disent;

namespace {

constexpr const char* kDefaultSeeds = "42,1234,73,1024,31415926";
constexpr Index kSilhouetteMaxN = 10000;  // O(n^2) metric; skipped above this

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int num_classes_of(const std::vector<int>& labels) {
    int k = 0;
    for (int v : labels) k = std::max(k, v + 1);
    return k;
}

EmbeddedDataset load_cache_checked(const std::string& path) {
    try {
        return read_cache(path);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
}

// Runs fn(i) for i in [0, count) on up to `jobs` worker threads. Each unit of
// work is independent and self-seeded, so scheduling cannot change results.
void run_parallel(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const auto workers = static_cast<std::size_t>(std::clamp<int>(
        jobs, 1, static_cast<int>(std::min<std::size_t>(count, 64))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_run_meta(const fs::path& out_dir, const std::string& command, double elapsed_seconds,
                    int jobs) {
    Json meta;
    meta["command"] = command;
    meta["elapsed_seconds"] = elapsed_seconds;
    meta["jobs"] = jobs;
    write_json(meta, (out_dir / "run_meta.json").string());
}

Json seeds_json(const std::vector<std::uint64_t>& seeds) {
    Json j = Json::array();
    for (auto s : seeds) j.push_back(s);
    return j;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedArgs {
    std::string corpus, vectors, output, classes, stopword_file;
    bool scale = false;
};

int run_embed(const EmbedArgs& args) {
    try {
        std::vector<std::string> class_names;
        if (!args.classes.empty()) {
            std::ifstream in(args.classes);
            if (!in) throw InputError("cannot open class list: " + args.classes);
            std::string line;
            while (std::getline(in, line)) {
                while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
                    line.pop_back();
                if (!line.empty()) class_names.push_back(line);
            }
            if (class_names.empty()) throw InputError("empty class list: " + args.classes);
        }
        const LabeledCorpus corpus = load_corpus_csv(args.corpus, class_names);
        const WordVectorTable table = load_word_vectors(args.vectors);
        const auto stops =
            args.stopword_file.empty() ? english_stopword_set() : load_stopwords(args.stopword_file);

        if (const auto parent = fs::path(args.output).parent_path(); !parent.empty())
            fs::create_directories(parent);
        const CorpusEmbedding emb =
            build_embedding_cache(corpus, table, args.output, stops, args.scale);
        std::cout << "embedded " << emb.dataset.rows() << " documents (dim " << emb.dataset.dim()
                  << ", " << corpus.class_names.size() << " classes); " << emb.flagged_count()
                  << " fully out-of-vocabulary\n"
                  << "wrote " << args.output << "\n";
        return 0;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        // loaders flag malformed/missing inputs with runtime_error
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

// ---------------------------------------------------------------------------
// train-classifier

struct TrainClassifierArgs {
    std::string cache, test_cache, out_dir, arch = "ffn";
    double alpha = 100.0, lr = 1e-3, eta = 1.0, gamma = 0.55;
    int epochs = 0;  // 0 = architecture default (ffn 30, cnn 50)
    int batch_size = 256;
    int jobs = 1;
    std::vector<std::uint64_t> seeds;
};

int run_train_classifier(const TrainClassifierArgs& args) {
    EmbeddedDataset train, test;
    bool have_test = false;
    int k = 0;
    try {
        train = load_cache_checked(args.cache);
        k = num_classes_of(train.labels);
        if (k < 2) throw InputError("training cache has fewer than 2 classes");
        if (args.arch != "ffn" && args.arch != "cnn")
            throw InputError("unknown architecture '" + args.arch + "' (expected ffn or cnn)");
        if (!args.test_cache.empty()) {
            test = load_cache_checked(args.test_cache);
            have_test = true;
            if (test.dim() != train.dim())
                throw InputError("test cache dimension does not match training cache");
            if (num_classes_of(test.labels) > k)
                throw InputError("test cache contains labels unseen in training");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    const int epochs = args.epochs > 0 ? args.epochs : (args.arch == "cnn" ? 50 : 30);
    const auto started = std::chrono::steady_clock::now();
    try {
        const fs::path out_dir(args.out_dir);
        fs::create_directories(out_dir);
        std::vector<SeedMetrics> results(args.seeds.size());

        run_parallel(args.seeds.size(), args.jobs, [&](std::size_t i) {
            const std::uint64_t seed = args.seeds[i];
            auto rng = make_rng(seed);
            Network net = args.arch == "cnn" ? build_cnn_classifier(train.dim(), k, rng)
                                             : build_ffn_classifier(train.dim(), k, rng);
            TrainConfig cfg;
            cfg.alpha = args.alpha;
            cfg.epochs = epochs;
            cfg.batch_size = args.batch_size;
            cfg.seed = seed;
            cfg.schedule = {args.eta, args.gamma};
            cfg.adam.lr = args.lr;
            const TrainHistory history = train_classifier(net, train.features, train.labels, cfg);

            const fs::path seed_dir = out_dir / std::to_string(seed);
            fs::create_directories(seed_dir);
            write_history_jsonl(history, (seed_dir / "history.jsonl").string());
            save_network(net, (seed_dir / "model.nnw").string());

            SeedMetrics m;
            m.seed = seed;
            const auto& last = history.epochs.back();
            m.values["final_primary_loss"] = last.primary_loss;
            m.values["final_snnl_loss"] = last.snnl_loss;
            m.values["final_total_loss"] = last.total_loss;
            const auto train_pred = predict_labels(net, train.features);
            const auto train_scores = classification_metrics(train.labels, train_pred, k);
            m.values["train_accuracy"] = train_scores.accuracy;
            m.values["train_macro_f1"] = train_scores.macro_f1;
            m.values["train_weighted_f1"] = train_scores.weighted_f1;
            if (have_test) {
                const auto test_pred = predict_labels(net, test.features);
                const auto test_scores = classification_metrics(test.labels, test_pred, k);
                m.values["test_accuracy"] = test_scores.accuracy;
                m.values["test_macro_f1"] = test_scores.macro_f1;
                m.values["test_weighted_f1"] = test_scores.weighted_f1;
            }
            results[i] = std::move(m);
        });

        for (std::size_t i = 0; i < args.seeds.size(); ++i)
            std::cout << "seed " << args.seeds[i]
                      << ": train_accuracy=" << results[i].values.at("train_accuracy")
                      << (have_test
                              ? " test_accuracy=" + std::to_string(results[i].values.at("test_accuracy"))
                              : "")
                      << "\n";

        Json config;
        config["cache"] = args.cache;
        if (have_test) config["test_cache"] = args.test_cache;
        config["arch"] = args.arch;
        config["alpha"] = args.alpha;
        config["epochs"] = epochs;
        config["batch_size"] = args.batch_size;
        config["lr"] = args.lr;
        config["eta"] = args.eta;
        config["gamma"] = args.gamma;
        config["seeds"] = seeds_json(args.seeds);
        write_json(build_report("train-classifier", config, results),
                   (out_dir / "report.json").string());
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_run_meta(out_dir, "train-classifier", elapsed, args.jobs);
        std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------
// train-autoencoder

struct TrainAutoencoderArgs {
    std::string cache, out_dir, mode = "all_hidden";
    double alpha = 100.0, lr = 1e-3, eta = 1.0, gamma = 0.55;
    int epochs = 30;
    int batch_size = 256;
    int latent_dim = 128;
    int latent_units = 100;
    int cluster_k = 0;  // 0 = number of classes in the cache
    int jobs = 1;
    std::vector<std::uint64_t> seeds;
};

int run_train_autoencoder(const TrainAutoencoderArgs& args) {
    EmbeddedDataset data;
    DisentMode mode;
    int k = 0;
    try {
        data = load_cache_checked(args.cache);
        mode = parse_mode(args.mode);
        if ((data.features.array() < 0.0).any() || (data.features.array() > 1.0).any())
            throw InputError(
                "features must lie in [0, 1] for the reconstruction loss; rebuild the cache "
                "with `embed --scale`");
        k = args.cluster_k > 0 ? args.cluster_k : num_classes_of(data.labels);
        if (k < 2) throw InputError("need at least 2 clusters (set --cluster-k)");
        if (args.latent_dim < 1) throw InputError("--latent-dim must be >= 1");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    const auto started = std::chrono::steady_clock::now();
    try {
        const fs::path out_dir(args.out_dir);
        fs::create_directories(out_dir);
        std::vector<SeedMetrics> results(args.seeds.size());
        const int truth_k = num_classes_of(data.labels);
        const bool with_accuracy = std::max(k, truth_k) <= 8;
        const bool with_silhouette = data.rows() <= kSilhouetteMaxN;

        run_parallel(args.seeds.size(), args.jobs, [&](std::size_t i) {
            const std::uint64_t seed = args.seeds[i];
            auto rng = make_rng(seed);
            Network net = build_autoencoder(data.dim(), args.latent_dim, rng);
            TrainConfig cfg;
            cfg.alpha = args.alpha;
            cfg.epochs = args.epochs;
            cfg.batch_size = args.batch_size;
            cfg.seed = seed;
            cfg.schedule = {args.eta, args.gamma};
            cfg.adam.lr = args.lr;
            cfg.mode = mode;
            cfg.latent_units = args.latent_units;
            const TrainHistory history = train_autoencoder(net, data.features, data.labels, cfg);

            const fs::path seed_dir = out_dir / std::to_string(seed);
            fs::create_directories(seed_dir);
            write_history_jsonl(history, (seed_dir / "history.jsonl").string());
            save_network(net, (seed_dir / "model.nnw").string());

            const Matrix latent = encode(net, data.features);
            EmbeddedDataset latent_ds;
            latent_ds.features = latent;
            latent_ds.labels = data.labels;
            write_cache(latent_ds, (seed_dir / "latent.emb").string());

            const ClusterResult clusters = kmeans(latent, k, seed);

            SeedMetrics m;
            m.seed = seed;
            const auto& last = history.epochs.back();
            m.values["final_primary_loss"] = last.primary_loss;
            m.values["final_snnl_loss"] = last.snnl_loss;
            m.values["final_total_loss"] = last.total_loss;
            m.values["kmeans_inertia"] = clusters.inertia;
            m.values["davies_bouldin"] = davies_bouldin(latent, clusters.assignments);
            m.values["calinski_harabasz"] = calinski_harabasz(latent, clusters.assignments);
            m.values["nmi"] = nmi(data.labels, clusters.assignments);
            m.values["adjusted_rand"] = adjusted_rand(data.labels, clusters.assignments);
            if (with_accuracy)
                m.values["accuracy"] = clustering_accuracy(data.labels, clusters.assignments);
            if (with_silhouette)
                m.values["silhouette"] = silhouette(latent, clusters.assignments);
            results[i] = std::move(m);
        });

        for (std::size_t i = 0; i < args.seeds.size(); ++i)
            std::cout << "seed " << args.seeds[i]
                      << ": nmi=" << results[i].values.at("nmi")
                      << " davies_bouldin=" << results[i].values.at("davies_bouldin") << "\n";

        Json config;
        config["cache"] = args.cache;
        config["mode"] = args.mode;
        config["alpha"] = args.alpha;
        config["epochs"] = args.epochs;
        config["batch_size"] = args.batch_size;
        config["lr"] = args.lr;
        config["eta"] = args.eta;
        config["gamma"] = args.gamma;
        config["latent_dim"] = args.latent_dim;
        config["latent_units"] = args.latent_units;
        config["cluster_k"] = k;
        config["seeds"] = seeds_json(args.seeds);
        write_json(build_report("train-autoencoder", config, results),
                   (out_dir / "report.json").string());
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_run_meta(out_dir, "train-autoencoder", elapsed, args.jobs);
        std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------
// cluster-eval

struct ClusterEvalArgs {
    std::string cache, out_dir;
    int k = 0;    // 0 = number of classes in the cache
    int pca = 0;  // 0 = no projection
    int jobs = 1;
    std::vector<std::uint64_t> seeds;
};

int run_cluster_eval(const ClusterEvalArgs& args) {
    EmbeddedDataset data;
    int k = 0;
    try {
        data = load_cache_checked(args.cache);
        k = args.k > 0 ? args.k : num_classes_of(data.labels);
        if (k < 2) throw InputError("need at least 2 clusters (set --k)");
        if (args.pca < 0 || args.pca > data.dim())
            throw InputError("--pca must lie in [1, dim] (or 0 to disable)");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    const auto started = std::chrono::steady_clock::now();
    try {
        const fs::path out_dir(args.out_dir);
        fs::create_directories(out_dir);
        Matrix features = data.features;
        if (args.pca > 0) features = pca_project(features, args.pca).projected;

        const int truth_k = num_classes_of(data.labels);
        const bool with_accuracy = std::max(k, truth_k) <= 8;
        std::vector<SeedMetrics> results(args.seeds.size());
        run_parallel(args.seeds.size(), args.jobs, [&](std::size_t i) {
            const std::uint64_t seed = args.seeds[i];
            const ClusterResult clusters = kmeans(features, k, seed);
            SeedMetrics m;
            m.seed = seed;
            m.values["inertia"] = clusters.inertia;
            m.values["davies_bouldin"] = davies_bouldin(features, clusters.assignments);
            m.values["silhouette"] = silhouette(features, clusters.assignments);
            m.values["calinski_harabasz"] = calinski_harabasz(features, clusters.assignments);
            m.values["nmi"] = nmi(data.labels, clusters.assignments);
            m.values["adjusted_rand"] = adjusted_rand(data.labels, clusters.assignments);
            if (with_accuracy)
                m.values["accuracy"] = clustering_accuracy(data.labels, clusters.assignments);
            results[i] = std::move(m);
        });

        for (std::size_t i = 0; i < args.seeds.size(); ++i)
            std::cout << "seed " << args.seeds[i] << ": nmi=" << results[i].values.at("nmi")
                      << " silhouette=" << results[i].values.at("silhouette") << "\n";

        Json config;
        config["cache"] = args.cache;
        config["k"] = k;
        config["pca"] = args.pca;
        config["seeds"] = seeds_json(args.seeds);
        write_json(build_report("cluster-eval", config, results),
                   (out_dir / "report.json").string());
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_run_meta(out_dir, "cluster-eval", elapsed, args.jobs);
        std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void add_seed_jobs_options(CLI::App* sub, std::vector<std::uint64_t>& seeds, int& jobs) {
    sub->add_option("--seeds", seeds, "Comma-separated run seeds")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--jobs", jobs, "Seeds trained in parallel")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
}

std::vector<std::uint64_t> default_seeds() {
    return {42, 1234, 73, 1024, 31415926};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"companion-loss representation learning toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file");

    EmbedArgs embed_args;
    auto* embed_cmd = app.add_subcommand("embed", "Embed a labeled corpus into a feature cache");
    embed_cmd->add_option("--corpus", embed_args.corpus, "CSV with header label,text")
        ->required()
        ->check(CLI::ExistingFile);
    embed_cmd->add_option("--vectors", embed_args.vectors, "Word-vector text file")
        ->required()
        ->check(CLI::ExistingFile);
    embed_cmd->add_option("--output", embed_args.output, "Cache file to write")->required();
    embed_cmd->add_option("--classes", embed_args.classes, "Class-name list, one per line")
        ->check(CLI::ExistingFile);
    embed_cmd->add_option("--stopwords", embed_args.stopword_file,
                          "Stop-word list overriding the built-in one")
        ->check(CLI::ExistingFile);
    embed_cmd->add_flag("--scale", embed_args.scale, "Min-max scale features to [0, 1]");

    TrainClassifierArgs cls_args;
    cls_args.seeds = default_seeds();
    auto* cls_cmd = app.add_subcommand("train-classifier", "Train a softmax classifier");
    cls_cmd->add_option("--cache", cls_args.cache, "Training feature cache")
        ->required()
        ->check(CLI::ExistingFile);
    cls_cmd->add_option("--test-cache", cls_args.test_cache, "Held-out feature cache")
        ->check(CLI::ExistingFile);
    cls_cmd->add_option("--out-dir", cls_args.out_dir, "Output directory")->required();
    cls_cmd->add_option("--arch", cls_args.arch, "ffn or cnn")->capture_default_str();
    cls_cmd->add_option("--alpha", cls_args.alpha, "Companion loss weight (0 disables)")
        ->capture_default_str();
    cls_cmd->add_option("--epochs", cls_args.epochs, "Epochs (0 = architecture default)")
        ->capture_default_str();
    cls_cmd->add_option("--batch-size", cls_args.batch_size, "Minibatch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cls_cmd->add_option("--lr", cls_args.lr, "Adam learning rate")->capture_default_str();
    cls_cmd->add_option("--eta", cls_args.eta, "Temperature schedule offset")
        ->capture_default_str();
    cls_cmd->add_option("--gamma", cls_args.gamma, "Temperature schedule decay")
        ->capture_default_str();
    add_seed_jobs_options(cls_cmd, cls_args.seeds, cls_args.jobs);

    TrainAutoencoderArgs ae_args;
    ae_args.seeds = default_seeds();
    auto* ae_cmd = app.add_subcommand("train-autoencoder", "Train an autoencoder and cluster it");
    ae_cmd->add_option("--cache", ae_args.cache, "Feature cache (values in [0, 1])")
        ->required()
        ->check(CLI::ExistingFile);
    ae_cmd->add_option("--out-dir", ae_args.out_dir, "Output directory")->required();
    ae_cmd->add_option("--mode", ae_args.mode, "baseline, all_hidden, or latent_partial")
        ->capture_default_str();
    ae_cmd->add_option("--alpha", ae_args.alpha, "Companion loss weight (0 disables)")
        ->capture_default_str();
    ae_cmd->add_option("--epochs", ae_args.epochs, "Epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ae_cmd->add_option("--batch-size", ae_args.batch_size, "Minibatch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ae_cmd->add_option("--lr", ae_args.lr, "Adam learning rate")->capture_default_str();
    ae_cmd->add_option("--eta", ae_args.eta, "Temperature schedule offset")->capture_default_str();
    ae_cmd->add_option("--gamma", ae_args.gamma, "Temperature schedule decay")
        ->capture_default_str();
    ae_cmd->add_option("--latent-dim", ae_args.latent_dim, "Latent code width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ae_cmd->add_option("--latent-units", ae_args.latent_units,
                       "Latent slice width for latent_partial")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ae_cmd->add_option("--cluster-k", ae_args.cluster_k, "Clusters (0 = class count)")
        ->capture_default_str();
    add_seed_jobs_options(ae_cmd, ae_args.seeds, ae_args.jobs);

    ClusterEvalArgs ce_args;
    ce_args.seeds = default_seeds();
    auto* ce_cmd = app.add_subcommand("cluster-eval", "k-means + quality metrics over a cache");
    ce_cmd->add_option("--cache", ce_args.cache, "Feature cache")
        ->required()
        ->check(CLI::ExistingFile);
    ce_cmd->add_option("--out-dir", ce_args.out_dir, "Output directory")->required();
    ce_cmd->add_option("--k", ce_args.k, "Clusters (0 = class count)")->capture_default_str();
    ce_cmd->add_option("--pca", ce_args.pca, "Project to this many principal components first")
        ->capture_default_str();
    add_seed_jobs_options(ce_cmd, ce_args.seeds, ce_args.jobs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 2;
    }

    if (embed_cmd->parsed()) return run_embed(embed_args);
    if (cls_cmd->parsed()) return run_train_classifier(cls_args);
    if (ae_cmd->parsed()) return run_train_autoencoder(ae_args);
    if (ce_cmd->parsed()) return run_cluster_eval(ce_args);
    std::cerr << "error: no subcommand\n";
    return 2;
}

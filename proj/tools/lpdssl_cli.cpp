// Command-line front end: synthetic data generation, standalone label
// propagation, the full iterative training loop, and plot-data export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpdssl/dataset.hpp"
#include "lpdssl/diffusion.hpp"
#include "lpdssl/io.hpp"
#include "lpdssl/model.hpp"
#include "lpdssl/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GraphFlags {
    std::size_t k = 50;
    double gamma = 3.0;
    double alpha = 0.99;
    std::size_t cg_iters = 20;
    double cg_tol = 1e-6;
    bool no_normalize = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--k", k, "neighbors per point");
        cmd->add_option("--gamma", gamma, "affinity exponent");
        cmd->add_option("--alpha", alpha, "diffusion strength in [0,1)");
        cmd->add_option("--cg-iters", cg_iters, "CG iteration cap");
        cmd->add_option("--cg-tol", cg_tol, "CG relative residual tolerance");
        cmd->add_flag("--no-normalize", no_normalize,
                      "skip l2 normalization of input embeddings before graph construction");
    }

    lpdssl::GraphConfig graph() const {
        if (gamma < 0.0) throw std::invalid_argument("--gamma must be nonnegative");
        return {k, gamma};
    }

    lpdssl::DiffusionConfig diffusion() const {
        lpdssl::DiffusionConfig c{alpha, cg_iters, cg_tol};
        c.validate();
        return c;
    }
};

lpdssl::Dataset load_dataset(const fs::path& embeddings_path, const fs::path& labels_path,
                             const std::optional<fs::path>& ground_truth_path, bool normalize) {
    lpdssl::Dataset ds;
    ds.inputs = lpdssl::read_embeddings(embeddings_path);
    ds.descriptors = ds.inputs;
    if (normalize) lpdssl::l2_normalize_rows(ds.descriptors);

    const std::size_t n = ds.inputs.rows();
    ds.labels.assign(n, -1);
    int max_class = -1;
    for (const auto& [index, cls] : lpdssl::read_labels_csv(labels_path)) {
        if (index >= n)
            throw std::invalid_argument("label index " + std::to_string(index) +
                                        " out of range for " + std::to_string(n) + " embeddings");
        ds.labels[index] = cls;
        ds.labeled_indices.push_back(index);
        max_class = std::max(max_class, cls);
    }
    std::sort(ds.labeled_indices.begin(), ds.labeled_indices.end());

    if (ground_truth_path) {
        ds.ground_truth.assign(n, -1);
        for (const auto& [index, cls] : lpdssl::read_labels_csv(*ground_truth_path)) {
            if (index >= n)
                throw std::invalid_argument("ground-truth index out of range: " +
                                            std::to_string(index));
            ds.ground_truth[index] = cls;
            max_class = std::max(max_class, cls);
        }
    }
    ds.num_classes = static_cast<std::size_t>(max_class + 1);
    ds.validate();
    return ds;
}

json output_to_json(const lpdssl::DiffusionOutput& out) {
    json doc;
    doc["pseudo_labels"] = json::array();
    for (std::size_t u = 0; u < out.unlabeled.size(); ++u)
        doc["pseudo_labels"].push_back({{"index", out.unlabeled[u]}, {"class", out.pseudo_labels[u]}});
    doc["omega"] = out.omega;
    doc["zeta"] = out.zeta;
    doc["cg_residuals"] = out.cg_residuals;
    return doc;
}

void write_text(const std::optional<fs::path>& path, const std::string& text) {
    if (!path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*path, std::ios::binary);
    if (!out) throw lpdssl::io_error("cannot open for writing: " + path->string());
    out << text;
}

json report_to_json(const lpdssl::EpochReport& r) {
    json doc;
    doc["epoch"] = r.epoch;
    doc["pseudo_accuracy"] = r.pseudo_accuracy ? json(*r.pseudo_accuracy) : json(nullptr);
    doc["mean_omega"] = r.mean_omega;
    doc["class_populations"] = r.class_populations;
    doc["train_loss"] = r.train_loss;
    doc["test_error"] = r.test_error ? json(*r.test_error) : json(nullptr);
    doc["cg_residuals"] = r.cg_residuals;
    return doc;
}

void cmd_gen_data(std::size_t n, std::size_t n_first, std::size_t n_second, double noise,
                  std::size_t per_class, std::uint64_t seed, std::size_t n_test,
                  const fs::path& out_dir) {
    if (per_class == 0) throw std::invalid_argument("--per-class must be at least 1");
    fs::create_directories(out_dir);

    lpdssl::Dataset ds = (n_first > 0 || n_second > 0)
                             ? lpdssl::generate_two_moons(n_first, n_second, noise, seed)
                             : lpdssl::generate_two_moons(n, noise, seed);
    lpdssl::select_labels(ds, per_class, seed);

    lpdssl::write_embeddings(ds.inputs, out_dir / "embeddings.bin");
    std::vector<std::pair<std::size_t, int>> labels;
    for (std::size_t i : ds.labeled_indices) labels.emplace_back(i, ds.labels[i]);
    lpdssl::write_labels_csv(labels, out_dir / "labels.csv");
    std::vector<std::pair<std::size_t, int>> truth;
    for (std::size_t i = 0; i < ds.size(); ++i) truth.emplace_back(i, ds.ground_truth[i]);
    lpdssl::write_labels_csv(truth, out_dir / "ground_truth.csv");

    if (n_test > 0) {
        // Disjoint RNG stream for the held-out set.
        lpdssl::Dataset test = lpdssl::generate_two_moons(n_test, noise, seed + 7919);
        lpdssl::write_embeddings(test.inputs, out_dir / "test_embeddings.bin");
        std::vector<std::pair<std::size_t, int>> test_truth;
        for (std::size_t i = 0; i < test.size(); ++i) test_truth.emplace_back(i, test.ground_truth[i]);
        lpdssl::write_labels_csv(test_truth, out_dir / "test_labels.csv");
    }
    std::cout << "wrote " << ds.size() << " points, " << ds.labeled_indices.size()
              << " labels to " << out_dir.string() << "\n";
}

void cmd_propagate(const fs::path& embeddings, const fs::path& labels,
                   const std::optional<fs::path>& ground_truth, const GraphFlags& flags,
                   const std::optional<fs::path>& json_out, const std::optional<fs::path>& csv_out) {
    lpdssl::Dataset ds = load_dataset(embeddings, labels, ground_truth, !flags.no_normalize);
    lpdssl::DiffusionOutput out = lpdssl::propagate(ds, flags.graph(), flags.diffusion());

    json doc = output_to_json(out);
    doc["config"] = {{"k", flags.k},           {"gamma", flags.gamma},
                     {"alpha", flags.alpha},   {"cg_iters", flags.cg_iters},
                     {"cg_tol", flags.cg_tol}, {"normalize", !flags.no_normalize}};
    if (!ds.ground_truth.empty() && !out.unlabeled.empty()) {
        std::size_t correct = 0;
        for (std::size_t u = 0; u < out.unlabeled.size(); ++u)
            if (out.pseudo_labels[u] == ds.ground_truth[out.unlabeled[u]]) ++correct;
        doc["accuracy"] = static_cast<double>(correct) / static_cast<double>(out.unlabeled.size());
    }
    write_text(json_out, doc.dump(2) + "\n");

    if (csv_out) {
        std::string csv;
        for (std::size_t u = 0; u < out.unlabeled.size(); ++u)
            csv += std::to_string(out.unlabeled[u]) + ',' + std::to_string(out.pseudo_labels[u]) +
                   ',' + json(out.omega[u]).dump() + '\n';
        write_text(csv_out, csv);
    }
}

struct TrainFlags {
    GraphFlags graph;
    std::size_t epochs_supervised = 30;
    std::size_t epochs_iterative = 70;
    std::size_t batch_labeled = 10;
    std::size_t batch_unlabeled = 50;
    double lr = 0.05;
    double momentum = 0.9;
    std::size_t cosine_horizon = 0;
    std::uint64_t seed = 1;
    std::size_t hidden_dim = 64;
    std::size_t descriptor_dim = 16;
    bool no_omega = false;
    bool no_zeta = false;
    bool use_network_predictions = false;
};

void cmd_train_toy(const fs::path& embeddings, const fs::path& labels,
                   const std::optional<fs::path>& ground_truth,
                   const std::optional<fs::path>& test_embeddings,
                   const std::optional<fs::path>& test_labels, const fs::path& out_dir,
                   const TrainFlags& flags) {
    lpdssl::Dataset ds = load_dataset(embeddings, labels, ground_truth, false);

    std::optional<lpdssl::TestSet> test;
    if (test_embeddings && test_labels) {
        test.emplace();
        test->inputs = lpdssl::read_embeddings(*test_embeddings);
        test->labels.assign(test->inputs.rows(), -1);
        for (const auto& [index, cls] : lpdssl::read_labels_csv(*test_labels)) {
            if (index >= test->labels.size())
                throw std::invalid_argument("test label index out of range");
            test->labels[index] = cls;
        }
    } else if (test_embeddings || test_labels) {
        throw std::invalid_argument("--test-embeddings and --test-labels must be given together");
    }

    lpdssl::ModelConfig model_config{ds.inputs.cols(), flags.hidden_dim, flags.descriptor_dim,
                                     ds.num_classes, flags.seed};
    lpdssl::TrainConfig train_config;
    train_config.epochs_supervised = flags.epochs_supervised;
    train_config.epochs_iterative = flags.epochs_iterative;
    train_config.batch_labeled = flags.batch_labeled;
    train_config.batch_unlabeled = flags.batch_unlabeled;
    train_config.learning_rate = flags.lr;
    train_config.momentum = flags.momentum;
    train_config.cosine_horizon = flags.cosine_horizon;
    train_config.seed = flags.seed;
    train_config.use_certainty_weights = !flags.no_omega;
    train_config.use_class_weights = !flags.no_zeta;
    train_config.use_network_predictions = flags.use_network_predictions;
    train_config.validate();

    lpdssl::GraphConfig graph_config = flags.graph.graph();
    lpdssl::DiffusionConfig diffusion_config = flags.graph.diffusion();

    fs::create_directories(out_dir);
    {
        json cfg;
        cfg["k"] = graph_config.k;
        cfg["gamma"] = graph_config.gamma;
        cfg["alpha"] = diffusion_config.alpha;
        cfg["cg_iters"] = diffusion_config.max_cg_iters;
        cfg["cg_tol"] = diffusion_config.cg_tolerance;
        cfg["epochs_supervised"] = train_config.epochs_supervised;
        cfg["epochs_iterative"] = train_config.epochs_iterative;
        cfg["batch_labeled"] = train_config.batch_labeled;
        cfg["batch_unlabeled"] = train_config.batch_unlabeled;
        cfg["lr"] = train_config.learning_rate;
        cfg["momentum"] = train_config.momentum;
        cfg["cosine_horizon"] = train_config.effective_horizon();
        cfg["seed"] = train_config.seed;
        cfg["hidden_dim"] = flags.hidden_dim;
        cfg["descriptor_dim"] = flags.descriptor_dim;
        cfg["use_omega"] = train_config.use_certainty_weights;
        cfg["use_zeta"] = train_config.use_class_weights;
        cfg["use_network_predictions"] = train_config.use_network_predictions;
        std::ofstream out(out_dir / "config.json", std::ios::binary);
        out << cfg.dump(2) << "\n";
    }

    lpdssl::RunResult result = lpdssl::run_lpdssl(ds, model_config, graph_config, diffusion_config,
                                                  train_config, test ? &*test : nullptr);

    {
        std::ofstream out(out_dir / "reports.jsonl", std::ios::binary);
        for (const auto& report : result.reports) out << report_to_json(report).dump() << "\n";
    }
    lpdssl::save_checkpoint(result.model, out_dir / "model.ckpt");

    // Final per-point view for plotting: pseudo-labels and certainty of the
    // last propagation, with true labels and weight 1 on labeled points.
    if (ds.inputs.cols() == 2 && !ds.unlabeled_indices().empty()) {
        lpdssl::DiffusionOutput out = lpdssl::propagate(ds, graph_config, diffusion_config);
        json points = json::array();
        std::vector<int> cls_of(ds.size(), -1);
        std::vector<double> omega_of(ds.size(), 1.0);
        for (std::size_t i : ds.labeled_indices) cls_of[i] = ds.labels[i];
        for (std::size_t u = 0; u < out.unlabeled.size(); ++u) {
            cls_of[out.unlabeled[u]] = out.pseudo_labels[u];
            omega_of[out.unlabeled[u]] = out.omega[u];
        }
        for (std::size_t i = 0; i < ds.size(); ++i)
            points.push_back({{"x", ds.inputs(i, 0)},
                              {"y", ds.inputs(i, 1)},
                              {"class", cls_of[i]},
                              {"omega", omega_of[i]}});
        std::ofstream pout(out_dir / "points.json", std::ios::binary);
        pout << points.dump() << "\n";
    }

    std::string final_line = "final:";
    if (!result.reports.empty()) {
        const auto& last = result.reports.back();
        if (last.pseudo_accuracy)
            final_line += " pseudo_accuracy=" + json(*last.pseudo_accuracy).dump();
        if (last.test_error)
            final_line += " test_accuracy=" + json(1.0 - *last.test_error).dump();
        final_line += " train_loss=" + json(last.train_loss).dump();
    }
    std::cout << final_line << "\n";
}

void cmd_export_plot(const fs::path& run_dir, const std::string& what,
                     const std::optional<fs::path>& out) {
    if (what == "points") {
        fs::path src = run_dir / "points.json";
        if (!fs::exists(src)) throw std::invalid_argument("no points.json in " + run_dir.string());
        std::ifstream in(src);
        json points = json::parse(in);
        std::string csv;
        for (const auto& p : points)
            csv += json(p.at("x").get<double>()).dump() + ',' +
                   json(p.at("y").get<double>()).dump() + ',' +
                   std::to_string(p.at("class").get<int>()) + ',' +
                   json(p.at("omega").get<double>()).dump() + '\n';
        write_text(out, csv);
    } else {  // accuracy
        fs::path src = run_dir / "reports.jsonl";
        if (!fs::exists(src)) throw std::invalid_argument("no reports.jsonl in " + run_dir.string());
        std::ifstream in(src);
        std::string line, csv;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json r = json::parse(line);
            csv += std::to_string(r.at("epoch").get<std::size_t>()) + ',';
            csv += r.at("pseudo_accuracy").is_null() ? "nan" : r.at("pseudo_accuracy").dump();
            csv += '\n';
        }
        write_text(out, csv);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-diffusion label propagation for semi-supervised learning"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a two-moons toy dataset");
    std::size_t gen_n = 300, gen_n_first = 0, gen_n_second = 0, gen_per_class = 3, gen_n_test = 0;
    double gen_noise = 0.1;
    std::uint64_t gen_seed = 1;
    fs::path gen_out_dir;
    gen->add_option("--n", gen_n, "total point count, split evenly between moons");
    gen->add_option("--n-first", gen_n_first, "points on the first moon (overrides --n)");
    gen->add_option("--n-second", gen_n_second, "points on the second moon (overrides --n)");
    gen->add_option("--noise", gen_noise, "Gaussian noise stddev per coordinate");
    gen->add_option("--per-class", gen_per_class, "labeled examples per class");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--n-test", gen_n_test, "held-out test points (0 = none)");
    gen->add_option("--out-dir", gen_out_dir, "output directory")->required();
    gen->callback([&] {
        cmd_gen_data(gen_n, gen_n_first, gen_n_second, gen_noise, gen_per_class, gen_seed,
                     gen_n_test, gen_out_dir);
    });

    // propagate
    auto* prop = app.add_subcommand("propagate", "standalone label propagation on embedding files");
    fs::path prop_embeddings, prop_labels;
    std::string prop_ground_truth, prop_json_out, prop_csv_out;
    GraphFlags prop_flags;
    prop->add_option("--embeddings", prop_embeddings, "embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    prop->add_option("--labels", prop_labels, "label CSV")->required()->check(CLI::ExistingFile);
    prop->add_option("--ground-truth", prop_ground_truth, "ground-truth CSV for accuracy")
        ->check(CLI::ExistingFile);
    prop_flags.add_to(prop);
    prop->add_option("--out", prop_json_out, "JSON output path (default: stdout)");
    prop->add_option("--csv", prop_csv_out, "optional index,class,omega CSV path");
    prop->callback([&] {
        cmd_propagate(prop_embeddings, prop_labels,
                      prop_ground_truth.empty() ? std::nullopt
                                                : std::optional<fs::path>(prop_ground_truth),
                      prop_flags,
                      prop_json_out.empty() ? std::nullopt : std::optional<fs::path>(prop_json_out),
                      prop_csv_out.empty() ? std::nullopt : std::optional<fs::path>(prop_csv_out));
    });

    // train-toy
    auto* train = app.add_subcommand("train-toy", "run the full iterative training loop");
    fs::path train_embeddings, train_labels, train_out_dir;
    std::string train_ground_truth, train_test_embeddings, train_test_labels;
    TrainFlags train_flags;
    train->add_option("--embeddings", train_embeddings, "embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--labels", train_labels, "label CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--ground-truth", train_ground_truth, "ground-truth CSV for pseudo accuracy")
        ->check(CLI::ExistingFile);
    train->add_option("--test-embeddings", train_test_embeddings, "test embedding file")
        ->check(CLI::ExistingFile);
    train->add_option("--test-labels", train_test_labels, "test label CSV")
        ->check(CLI::ExistingFile);
    train->add_option("--out-dir", train_out_dir, "run directory")->required();
    train_flags.graph.add_to(train);
    train->add_option("--epochs-supervised", train_flags.epochs_supervised, "warm-up epochs T");
    train->add_option("--epochs-iterative", train_flags.epochs_iterative, "iterative epochs T'");
    train->add_option("--batch-labeled", train_flags.batch_labeled, "labeled examples per batch");
    train->add_option("--batch-unlabeled", train_flags.batch_unlabeled,
                      "unlabeled examples per batch");
    train->add_option("--lr", train_flags.lr, "initial learning rate");
    train->add_option("--momentum", train_flags.momentum, "SGD momentum");
    train->add_option("--cosine-horizon", train_flags.cosine_horizon,
                      "cosine annealing horizon in epochs (0 = derived)");
    train->add_option("--seed", train_flags.seed, "RNG seed");
    train->add_option("--hidden-dim", train_flags.hidden_dim, "MLP hidden width");
    train->add_option("--descriptor-dim", train_flags.descriptor_dim, "descriptor dimension");
    train->add_flag("--no-omega", train_flags.no_omega, "disable certainty weights");
    train->add_flag("--no-zeta", train_flags.no_zeta, "disable class weights");
    train->add_flag("--use-network-predictions", train_flags.use_network_predictions,
                    "pseudo-labels from the classifier instead of diffusion");
    train->callback([&] {
        auto opt = [](const std::string& s) {
            return s.empty() ? std::nullopt : std::optional<fs::path>(s);
        };
        cmd_train_toy(train_embeddings, train_labels, opt(train_ground_truth),
                      opt(train_test_embeddings), opt(train_test_labels), train_out_dir,
                      train_flags);
    });

    // export-plot
    auto* plot = app.add_subcommand("export-plot", "export CSV plot data from a run directory");
    fs::path plot_run_dir;
    std::string plot_what, plot_out;
    plot->add_option("--run-dir", plot_run_dir, "run directory")->required();
    plot->add_option("--what", plot_what, "points | accuracy")
        ->required()
        ->check(CLI::IsMember({"points", "accuracy"}));
    plot->add_option("--out", plot_out, "output path (default: stdout)");
    plot->callback([&] {
        cmd_export_plot(plot_run_dir, plot_what,
                        plot_out.empty() ? std::nullopt : std::optional<fs::path>(plot_out));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// gtlm: command-line entry point for dataset generation, feature dumps,
// property verification, training, evaluation, generation, and attention
// inspection.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gtlm/data.hpp"
#include "gtlm/model.hpp"
#include "gtlm/verify.hpp"

namespace fs = std::filesystem;
using namespace gtlm;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("GTLM_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

struct ModelFlags {
    ModelConfig cfg;
    bool no_spd = false, no_rrwp = false, no_mag = false;

    void attach(CLI::App* app) {
        app->add_option("--layers", cfg.n_layers, "transformer layers");
        app->add_option("--heads", cfg.n_heads, "attention heads");
        app->add_option("--d-model", cfg.d_model, "model width");
        app->add_option("--d-head", cfg.d_head, "per-head width");
        app->add_option("--d-ffn", cfg.d_ffn, "feed-forward width");
        app->add_option("--max-spd", cfg.bias.max_spd, "shortest-path buckets");
        app->add_option("--rrwp-steps", cfg.bias.rrwp_steps, "random-walk steps K");
        app->add_option("--rrwp-hidden", cfg.bias.rrwp_hidden, "RRWP MLP hidden width");
        app->add_option("--mag-q", cfg.bias.mag_q, "magnetic potential q");
        app->add_option("--mag-dim", cfg.bias.mag_dim, "spectral kernel channels");
        app->add_option("--deepset-hidden", cfg.bias.deepset_hidden, "Deep Set lift width");
        app->add_option("--mag-hidden", cfg.bias.mag_hidden, "Magnetic MLP hidden width");
        app->add_flag("--no-spd", no_spd, "disable the SPD bias");
        app->add_flag("--no-rrwp", no_rrwp, "disable the RRWP bias");
        app->add_flag("--no-mag", no_mag, "disable the Magnetic bias");
    }
    ModelConfig resolve() const {
        ModelConfig c = cfg;
        c.bias_flags.spd = !no_spd;
        c.bias_flags.rrwp = !no_rrwp;
        c.bias_flags.mag = !no_mag;
        c.validate();
        return c;
    }
};

void write_resolved_config(const std::string& next_to, const nlohmann::json& j) {
    std::string path = next_to + ".config.json";
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

std::vector<TextAttributedGraph> load_dataset(const std::string& path,
                                              const std::string& format) {
    std::vector<TextAttributedGraph> graphs = load_graphs(path);
    if (format == "incidence")
        for (auto& g : graphs) g = to_incidence(g);
    else if (format != "standard")
        fail("UsageError", "unknown --format " + format);
    return graphs;
}

int report_checks(const std::vector<CheckResult>& checks, std::ostream& os) {
    int failures = 0;
    for (const CheckResult& c : checks) {
        os << "check=" << c.name << " status=" << (c.pass ? "pass" : "fail")
           << " worst=" << c.worst << " tolerance=" << c.tolerance;
        if (!c.note.empty()) os << " note=\"" << c.note << "\"";
        os << "\n";
        failures += !c.pass;
    }
    return failures;
}

template <typename Real>
void collect_property_checks(std::vector<CheckResult>& checks, double tol,
                             std::uint64_t seed) {
    ModelConfig cfg;  // desk default: 2 layers, 4 heads
    GtlmModel model = GtlmModel::init(cfg, seed);
    randomize_bias_params(model, substream(seed, 11));
    checks.push_back(check_backward_compat<Real>(model, 5, substream(seed, 12), tol));

    TaskSpec spec{"reachability", 1, substream(seed, 13), 6, 6, 0.5};
    TextAttributedGraph g = generate_dataset(spec)[0];
    checks.push_back(check_equivariance<Real>(model, g, 5, substream(seed, 14), tol));
}

int cmd_verify(int precision, const std::string& report_path, std::uint64_t seed) {
    std::vector<CheckResult> checks;
    if (precision == 64)
        collect_property_checks<double>(checks, 1e-12, seed);
    else
        collect_property_checks<float>(checks, 1e-4, seed);

    for (CheckResult& c : check_feature_oracles(50, 12, substream(seed, 21)))
        checks.push_back(std::move(c));
    for (CheckResult& c : check_kernel_fixtures(substream(seed, 22)))
        checks.push_back(std::move(c));

    if (precision == 64) {
        ModelConfig small;
        small.n_layers = 2;
        small.n_heads = 2;
        small.d_model = 16;
        small.d_head = 8;
        small.d_ffn = 32;
        small.bias.rrwp_steps = 4;
        small.bias.rrwp_hidden = 8;
        small.bias.mag_dim = 4;
        small.bias.deepset_hidden = 4;
        small.bias.mag_hidden = 8;
        GtlmModel model = GtlmModel::init(small, substream(seed, 31));
        randomize_bias_params(model, substream(seed, 32));
        TaskSpec spec{"reachability", 2, substream(seed, 33), 4, 5, 0.5};
        std::vector<TrainExample> batch;
        for (const auto& ex : generate_dataset(spec)) batch.push_back(make_example(model, ex));
        // eps balances truncation against roundoff; 1e-6 drowns small
        // gradients in floating-point noise
        checks.push_back(check_gradients(model, batch, 60, 1e-4, 1e-4, substream(seed, 34)));
    }

    int failures = report_checks(checks, std::cout);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) fail("IoError", "cannot open " + report_path + " for writing");
        report_checks(checks, out);
    }
    return failures ? 1 : 0;
}

std::vector<TrainExample> to_examples(const GtlmModel& model,
                                      const std::vector<TextAttributedGraph>& graphs) {
    std::vector<TrainExample> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(make_example(model, g));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GTLM: graph transformer language model workflows"};
    app.require_subcommand(1);

    // --- gen-data ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
    std::string gd_task = "reachability", gd_sizes = "train=200,val=50,test=50";
    std::string gd_out = ".";
    std::uint64_t gd_seed = default_seed();
    double gd_scale = 1.0;
    int gd_min_nodes = 5, gd_max_nodes = 15;
    double gd_geometric_p = 0.5;
    gen->add_option("--task", gd_task, "task name");
    gen->add_option("--sizes", gd_sizes, "split sizes, e.g. train=2000,val=200");
    gen->add_option("--seed", gd_seed, "base seed (env GTLM_SEED)");
    gen->add_option("--scale", gd_scale, "multiplier applied to every split size");
    gen->add_option("--out", gd_out, "output directory");
    gen->add_option("--min-nodes", gd_min_nodes, "minimum graph size");
    gen->add_option("--max-nodes", gd_max_nodes, "maximum graph size");
    gen->add_option("--geometric-p", gd_geometric_p, "KG edge-count geometric parameter");

    // --- features --------------------------------------------------------------
    auto* feat = app.add_subcommand("features", "dump structural features");
    std::string ft_data, ft_out = "-";
    int ft_index = 0, ft_max_spd = 8, ft_steps = 16;
    double ft_q = 0.25;
    feat->add_option("--data", ft_data, "dataset file")->required();
    feat->add_option("--index", ft_index, "record index");
    feat->add_option("--out", ft_out, "output file, - for stdout");
    feat->add_option("--max-spd", ft_max_spd, "shortest-path buckets");
    feat->add_option("--rrwp-steps", ft_steps, "random-walk steps");
    feat->add_option("--mag-q", ft_q, "magnetic potential");

    // --- verify ------------------------------------------------------------------
    auto* ver = app.add_subcommand("verify", "run the property battery");
    int vf_precision = 64;
    std::string vf_report;
    std::uint64_t vf_seed = default_seed();
    ver->add_option("--precision", vf_precision, "32 or 64")
        ->check(CLI::IsMember({32, 64}));
    ver->add_option("--report", vf_report, "write the line report here too");
    ver->add_option("--seed", vf_seed, "base seed");

    // --- train ----------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_data, tr_val, tr_ckpt = "model.ckpt", tr_format = "standard";
    int tr_epochs = 5, tr_batch = 8;
    double tr_lr = 1e-3, tr_lr_bias = 1e-2;
    std::uint64_t tr_seed = default_seed();
    bool tr_freeze_backbone = false;
    ModelFlags tr_model;
    tr->add_option("--data", tr_data, "training dataset")->required();
    tr->add_option("--val", tr_val, "validation dataset");
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint output path");
    tr->add_option("--format", tr_format, "incidence|standard");
    tr->add_option("--epochs", tr_epochs, "training epochs");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--lr", tr_lr, "backbone learning rate");
    tr->add_option("--lr-bias", tr_lr_bias, "bias learning rate");
    tr->add_option("--seed", tr_seed, "init/shuffle seed");
    tr->add_flag("--freeze-backbone", tr_freeze_backbone, "train only bias parameters");
    std::string tr_init_from;
    tr->add_option("--init-from", tr_init_from,
                   "start from this checkpoint instead of random init");
    tr_model.attach(tr);

    // --- eval ---------------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ev_data, ev_ckpt, ev_report, ev_format = "standard";
    ev->add_option("--data", ev_data, "dataset")->required();
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint")->required();
    ev->add_option("--report", ev_report, "per-example report path");
    ev->add_option("--format", ev_format, "incidence|standard");

    // --- generate --------------------------------------------------------------
    auto* gn = app.add_subcommand("generate", "greedy-decode one record");
    std::string gn_data, gn_ckpt, gn_format = "standard";
    int gn_index = 0, gn_max_new = 12;
    gn->add_option("--data", gn_data, "dataset")->required();
    gn->add_option("--checkpoint", gn_ckpt, "checkpoint")->required();
    gn->add_option("--index", gn_index, "record index");
    gn->add_option("--max-new-tokens", gn_max_new, "decode budget");
    gn->add_option("--format", gn_format, "incidence|standard");

    // --- attn-dump --------------------------------------------------------------
    auto* ad = app.add_subcommand("attn-dump", "node-aggregated attention matrices");
    std::string ad_data, ad_ckpt, ad_out = "-";
    int ad_index = 0;
    ad->add_option("--data", ad_data, "dataset")->required();
    ad->add_option("--checkpoint", ad_ckpt, "checkpoint")->required();
    ad->add_option("--index", ad_index, "record index");
    ad->add_option("--out", ad_out, "output file, - for stdout");

    // --- param-count --------------------------------------------------------------
    auto* pc = app.add_subcommand("param-count", "bias parameter breakdown");
    BiasConfig pc_cfg;
    pc_cfg.n_layers = 16;
    pc_cfg.n_heads = 32;
    pc->add_option("--layers", pc_cfg.n_layers, "layers");
    pc->add_option("--heads", pc_cfg.n_heads, "heads");
    pc->add_option("--max-spd", pc_cfg.max_spd, "shortest-path buckets");
    pc->add_option("--rrwp-steps", pc_cfg.rrwp_steps, "random-walk steps");
    pc->add_option("--rrwp-hidden", pc_cfg.rrwp_hidden, "RRWP hidden width");
    pc->add_option("--mag-dim", pc_cfg.mag_dim, "spectral channels");
    pc->add_option("--deepset-hidden", pc_cfg.deepset_hidden, "Deep Set width");
    pc->add_option("--mag-hidden", pc_cfg.mag_hidden, "Magnetic hidden width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            TaskSpec spec;
            spec.task = gd_task;
            spec.min_nodes = gd_min_nodes;
            spec.max_nodes = gd_max_nodes;
            spec.geometric_p = gd_geometric_p;
            fs::create_directories(gd_out);
            nlohmann::json resolved = {{"task", gd_task},         {"sizes", gd_sizes},
                                       {"seed", gd_seed},         {"scale", gd_scale},
                                       {"min_nodes", gd_min_nodes}, {"max_nodes", gd_max_nodes},
                                       {"geometric_p", gd_geometric_p}};
            int stream = 0;
            std::stringstream sizes(gd_sizes);
            std::string part;
            while (std::getline(sizes, part, ',')) {
                size_t eq = part.find('=');
                if (eq == std::string::npos) fail("UsageError", "--sizes wants name=count");
                std::string split = part.substr(0, eq);
                spec.count = (int)std::lround(std::stod(part.substr(eq + 1)) * gd_scale);
                spec.seed = substream(gd_seed, ++stream);
                std::string path = gd_out + "/" + gd_task + "." + split + ".jsonl";
                save_graphs(path, generate_dataset(spec));
                resolved["files"][split] = path;
                std::cout << "wrote " << path << " (" << spec.count << " records)\n";
            }
            write_resolved_config(gd_out + "/" + gd_task, resolved);
        } else if (*feat) {
            auto graphs = load_graphs(ft_data);
            if (ft_index < 0 || ft_index >= (int)graphs.size())
                fail("UsageError", "record index out of range");
            StructuralFeatures f = compute_features(graphs[ft_index], ft_max_spd, ft_steps, ft_q);
            std::ofstream file;
            if (ft_out != "-") file.open(ft_out);
            std::ostream& os = ft_out == "-" ? std::cout : file;
            const int n = f.num_nodes();
            os << "nodes " << n << "\nspd\n";
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) os << (j ? " " : "") << f.spd(i, j);
                os << "\n";
            }
            for (int k = 0; k < f.rrwp_steps(); ++k) {
                os << "rrwp " << k << "\n";
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < n; ++j) os << (j ? " " : "") << f.rrwp[k](i, j);
                    os << "\n";
                }
            }
            os << "mag_eigvals\n";
            for (int i = 0; i < n; ++i) os << (i ? " " : "") << f.mag_eigvals[i];
            os << "\nmag_eigvecs_real\n";
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) os << (j ? " " : "") << f.mag_eigvecs(i, j).real();
                os << "\n";
            }
            os << "mag_eigvecs_imag\n";
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) os << (j ? " " : "") << f.mag_eigvecs(i, j).imag();
                os << "\n";
            }
        } else if (*ver) {
            return cmd_verify(vf_precision, vf_report, vf_seed);
        } else if (*tr) {
            GtlmModel model = tr_init_from.empty()
                                  ? GtlmModel::init(tr_model.resolve(), tr_seed)
                                  : load_checkpoint(tr_init_from);
            if (!tr_init_from.empty()) {
                // the --no-* flags still apply so a pretrained backbone can be
                // continued with a different bias mix than it was saved with
                model.cfg.bias_flags.spd = !tr_model.no_spd;
                model.cfg.bias_flags.rrwp = !tr_model.no_rrwp;
                model.cfg.bias_flags.mag = !tr_model.no_mag;
            }
            auto train_graphs = load_dataset(tr_data, tr_format);
            if (train_graphs.empty()) fail("UsageError", "empty training set");
            std::vector<TrainExample> examples = to_examples(model, train_graphs);

            OptimizerState opt;
            const double lr = tr_freeze_backbone ? 0.0 : tr_lr;
            Rng shuffle_rng = make_rng(substream(tr_seed, 99));
            for (int epoch = 0; epoch < tr_epochs; ++epoch) {
                std::shuffle(examples.begin(), examples.end(), shuffle_rng);
                double total = 0.0;
                int batches = 0;
                for (size_t at = 0; at < examples.size(); at += tr_batch) {
                    std::vector<TrainExample> batch(
                        examples.begin() + at,
                        examples.begin() + std::min(at + tr_batch, examples.size()));
                    total += train_step(model, batch, lr, tr_lr_bias, opt);
                    ++batches;
                }
                std::cout << "epoch " << epoch << " loss " << total / batches;
                if (!tr_val.empty()) {
                    EvalResult r = evaluate_accuracy(model, load_dataset(tr_val, tr_format));
                    std::cout << " val_acc " << r.accuracy;
                }
                std::cout << std::endl;
            }
            save_checkpoint(tr_ckpt, model);
            nlohmann::json resolved = model.cfg;
            resolved["data"] = tr_data;
            resolved["val"] = tr_val;
            resolved["format"] = tr_format;
            resolved["epochs"] = tr_epochs;
            resolved["batch"] = tr_batch;
            resolved["lr"] = lr;
            resolved["lr_bias"] = tr_lr_bias;
            resolved["seed"] = tr_seed;
            write_resolved_config(tr_ckpt, resolved);
            std::cout << "wrote " << tr_ckpt << "\n";
        } else if (*ev) {
            GtlmModel model = load_checkpoint(ev_ckpt);
            EvalResult r = evaluate_accuracy(model, load_dataset(ev_data, ev_format));
            std::cout << "accuracy " << r.accuracy << "\n";
            if (!ev_report.empty()) {
                std::ofstream out(ev_report);
                if (!out) fail("IoError", "cannot open " + ev_report + " for writing");
                out << "accuracy " << r.accuracy << "\n";
                for (const EvalRecord& rec : r.records)
                    out << "status=" << (rec.correct ? "correct" : "wrong") << " gold=\""
                        << rec.gold << "\" predicted=\"" << rec.predicted << "\"\n";
            }
        } else if (*gn) {
            GtlmModel model = load_checkpoint(gn_ckpt);
            auto graphs = load_dataset(gn_data, gn_format);
            if (gn_index < 0 || gn_index >= (int)graphs.size())
                fail("UsageError", "record index out of range");
            std::cout << generate(model, graphs[gn_index], gn_max_new) << "\n";
        } else if (*ad) {
            GtlmModel model = load_checkpoint(ad_ckpt);
            auto graphs = load_graphs(ad_data);
            if (ad_index < 0 || ad_index >= (int)graphs.size())
                fail("UsageError", "record index out of range");
            ProbeResult probe = probe_message_passing(model, graphs[ad_index]);
            std::ofstream file;
            if (ad_out != "-") file.open(ad_out);
            write_attention_dump(ad_out == "-" ? std::cout : file, probe);
        } else if (*pc) {
            ParamCountBreakdown b = count_parameters(pc_cfg);
            std::cout << "spd=" << b.spd << "\nrrwp=" << b.rrwp << "\nmag=" << b.mag
                      << "\ntotal=" << b.total << "\n";
        }
    } catch (const GtlmError& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return e.code() == "UsageError" ? 2 : 1;
    }
    return 0;
}

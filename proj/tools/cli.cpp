#include "cli.hpp"

#include "angcn/all.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace angcn::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::uint64_t seed = 0;
    std::string out;
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Every option of `app` with its resolved value (flag, config file or default).
void collect_options(const CLI::App* app, json& out) {
    for (const CLI::Option* o : app->get_options()) {
        const std::string name = o->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        if (o->count() > 0) {
            const auto r = o->results();
            if (o->get_expected_max() > 1 || r.size() > 1)
                out[name] = r;
            else
                out[name] = r.front();
        } else if (!o->get_default_str().empty()) {
            out[name] = o->get_default_str();
        } else {
            out[name] = nullptr;
        }
    }
}

class Run {
public:
    Run(std::string command, const Global& g, std::vector<const CLI::App*> apps)
        : command_(std::move(command)), dir_(g.out), seed_(g.seed) {
        for (const CLI::App* a : apps) collect_options(a, config_);
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }
    fs::path path(const std::string& name) {
        outputs_.insert(name);
        return dir_ / name;
    }
    void add_output(const fs::path& p) { outputs_.insert(p.string()); }
    json& metrics() { return metrics_; }

    void finish() {
        write_json(path("metrics.json"), metrics_);
        json m = {{"tool", "angcn"},
                  {"version", ANGCN_VERSION},
                  {"command", command_},
                  {"timestamp", utc_timestamp()},
                  {"seed", seed_},
                  {"config", config_},
                  {"outputs", std::vector<std::string>(outputs_.begin(), outputs_.end())},
                  {"metrics", metrics_}};
        write_json(dir_ / "manifest.json", m);
    }

private:
    std::string command_;
    fs::path dir_;
    std::uint64_t seed_;
    json config_ = json::object();
    json metrics_ = json::object();
    std::set<std::string> outputs_;
};

const std::vector<std::size_t>& eval_indices(const Graph& g, std::vector<std::size_t>& all) {
    if (!g.masks().test.empty()) return g.masks().test;
    all.resize(g.n_nodes());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

Graph load_labeled(const std::string& path) {
    Graph g = read_graph(path);
    if (!g.has_labels()) throw UsageError("graph '" + path + "' has no labels");
    return g;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    std::vector<std::string> cora;
    std::string synth;
    std::string output;
    bool row_normalize = false;
    std::size_t train = 140, val = 500, test = 1000;
};

int cmd_ingest(const IngestOpts& o, Run& run) {
    if (o.cora.empty() == o.synth.empty()) throw UsageError("ingest needs exactly one of --cora or --synth");
    const fs::path out = o.output.empty() ? run.path("graph.json") : fs::path(o.output);
    if (!o.output.empty()) run.add_output(out);
    json report;
    Graph g;
    if (!o.cora.empty()) {
        CoraData d = load_cora(o.cora[0], o.cora[1], SplitSizes{o.train, o.val, o.test});
        g = std::move(d.graph);
        report = {{"source", "cora"},
                  {"skipped_cites", d.skipped_cites},
                  {"self_citations", d.self_citations},
                  {"duplicate_cites", d.duplicate_cites},
                  {"class_names", d.class_names}};
    } else {
        g = synth_graph(parse_synth_spec(o.synth));
        report = {{"source", "synth"}, {"spec", o.synth}};
    }
    if (o.row_normalize) g = row_normalize_features(g);
    write_graph(out, g);
    report["n_nodes"] = g.n_nodes();
    report["n_edges"] = g.edges().size();
    report["n_features"] = g.n_features();
    report["n_classes"] = g.num_classes();
    write_json(run.path("ingest_report.json"), report);
    run.metrics() = {{"n_nodes", g.n_nodes()}, {"n_edges", g.edges().size()}, {"n_classes", g.num_classes()}};
    std::cout << "wrote " << out.string() << ": " << g.n_nodes() << " nodes, " << g.edges().size() << " edges\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string graph;
    std::string model = "spectral";
    int epochs = 200;
    double lr = 0.01;
    double l2 = 5e-4;
    std::string optimizer = "adam";
    int hidden = 16;
    std::string laplacian = "symmetric-normalized";
    std::string activation = "relu";
    int filter_power = 1;
    std::string propagation = "renormalized";
};

int cmd_train(const TrainOpts& o, const Global& gl, Run& run) {
    const Graph g = load_labeled(o.graph);
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.lr = o.lr;
    cfg.l2 = o.l2;
    cfg.optimizer = parse_optimizer_kind(o.optimizer);
    if (o.epochs < 0) throw UsageError("--epochs must be non-negative");

    std::vector<EpochMetrics> trace;
    std::vector<int> pred;
    Checkpoint ck;
    if (o.model == "spectral") {
        auto basis = std::make_shared<const SpectralBasis>(graph_basis(g, parse_laplacian_kind(o.laplacian)));
        SpectralModel m = make_spectral_model(basis, g.n_features(), g.num_classes(), gl.seed, o.filter_power,
                                              parse_activation(o.activation));
        trace = train_model(m, g, cfg);
        pred = argmax_rows(predict_proba(m, g.features()));
        ck = to_checkpoint(m);
    } else if (o.model == "semi") {
        SemiGcnModel m = make_semi_model(g.n_features(), o.hidden, g.num_classes(), gl.seed,
                                         parse_propagation(o.propagation));
        trace = train_model(m, g, cfg);
        pred = predict_semi(m, build_adjacency(g), g.features());
        ck = to_checkpoint(m);
    } else {
        throw UsageError("unknown model '" + o.model + "' (expected spectral or semi)");
    }
    ck.meta["seed"] = gl.seed;
    write_checkpoint(run.path("checkpoint.json"), ck);
    std::vector<json> lines;
    for (const auto& e : trace) lines.push_back(to_json(e));
    write_text(run.path("trace.jsonl"), to_jsonl(lines));

    std::vector<std::size_t> all;
    const double test_acc = accuracy(pred, *g.labels(), eval_indices(g, all));
    run.metrics() = {{"model", o.model},
                     {"epochs", o.epochs},
                     {"train_acc", accuracy(pred, *g.labels(), g.masks().train)},
                     {"val_acc", accuracy(pred, *g.labels(), g.masks().val)},
                     {"test_acc", test_acc},
                     {"clean_acc", test_acc}};
    std::cout << "test accuracy " << format_double(test_acc, 6) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackOpts {
    std::string graph;
    std::string checkpoint;
    std::vector<std::size_t> targets;
    std::vector<int> desired;
    std::string mode = "single";
    double vartheta = 1.0;
    double reg_weight = 0.05;
    int epochs = 300;
    double lr = 0.01;
    std::string surrogate = "renormalized";
    int escalations = 3;
    bool freeze_check = false;
};

int cmd_attack(const AttackOpts& o, const Global& gl, Run& run) {
    const Graph g = read_graph(o.graph);
    const Checkpoint ck = read_checkpoint(o.checkpoint);
    if (ck.meta.value("model", "") != "semi") throw UsageError("attack needs a semi-GCN checkpoint");
    const SemiGcnModel target = freeze(semi_from_checkpoint(ck));
    if (target.w1.rows() != g.n_features()) throw UsageError("checkpoint does not match the graph's feature width");

    AttackSpec spec;
    spec.targets = o.targets;
    spec.desired_labels = o.desired;
    spec.mode = parse_attack_mode(o.mode);
    spec.vartheta = o.vartheta;
    spec.reg_weight = o.reg_weight;
    spec.epochs = o.epochs;
    spec.lr = o.lr;
    spec.seed = gl.seed;
    spec.surrogate = parse_propagation(o.surrogate);
    spec.escalations = o.escalations;
    const AttackResult r = run_attack(target, g, spec);

    const Graph victim = extract_victim_graph(r, g);
    json report = to_json(r);
    report["clean_predictions"] = r.clean_predictions;
    report["attacked_predictions"] = r.attacked_predictions;
    report["mode"] = o.mode;
    report["vartheta"] = o.vartheta;
    write_json(run.path("attack.json"), report);
    write_graph(run.path("victim_graph.json"), victim);
    write_json(run.path("degree_report.json"), to_json(degree_distribution_report(g, victim)));

    std::size_t flipped = 0;
    for (std::size_t k = 0; k < r.targets.size(); ++k)
        flipped += r.attacked_predictions[r.targets[k]] == r.desired_labels[k];
    json& m = run.metrics();
    m = {{"success", r.all_success()},
         {"success_rate", static_cast<double>(flipped) / static_cast<double>(r.targets.size())},
         {"perturbation_count", r.perturbation_count},
         {"non_target_retention", report["non_target_retention"]},
         {"vartheta", o.vartheta}};
    if (g.has_labels()) {
        std::vector<std::size_t> all;
        const auto& idx = eval_indices(g, all);
        m["clean_acc"] = accuracy(r.clean_predictions, *g.labels(), idx);
        m["attacked_acc"] = accuracy(r.attacked_predictions, *g.labels(), idx);
    }
    std::cout << "success " << (r.all_success() ? "true" : "false") << ", " << r.perturbation_count << " edits\n";

    if (o.freeze_check) {
        const Matrix a = build_adjacency(g);
        bool ok = true;
        for (std::size_t t : r.targets) ok = ok && (r.A_hat.row(static_cast<Index>(t)) - a.row(static_cast<Index>(t))).cwiseAbs().maxCoeff() == 0.0;
        m["freeze_check"] = ok;
        std::cout << "freeze-check " << (ok ? "ok" : "FAILED: a target row changed") << "\n";
        if (!ok) return kExitInternal;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// defend
// ---------------------------------------------------------------------------

struct DefendOpts {
    std::string graph;
    AnGcnConfig cfg;
    std::string laplacian = "symmetric-normalized";
    std::string activation = "relu";
    std::string sample_from = "all";
    std::string label_loss = "sigmoid-bce";
    double eps = 0.0; // 0 = default
};

int cmd_defend(DefendOpts o, const Global& gl, Run& run) {
    const Graph g = load_labeled(o.graph);
    if (o.cfg.epochs < 1) throw UsageError("--epochs must be at least 1 (nothing would be trained)");
    AnGcnConfig cfg = o.cfg;
    cfg.seed = gl.seed;
    cfg.laplacian = parse_laplacian_kind(o.laplacian);
    cfg.activation = parse_activation(o.activation);
    cfg.sample_from = parse_node_pool(o.sample_from);
    cfg.label_loss = parse_label_loss(o.label_loss);
    if (o.eps > 0) cfg.eps = o.eps;

    const AnGcnResult r = train_angcn(g, cfg);
    write_checkpoint(run.path("checkpoint.json"), to_checkpoint(r.best_model, cfg.q, cfg.seed));
    write_checkpoint(run.path("checkpoint_final.json"), to_checkpoint(r.final_model, cfg.q, cfg.seed));
    std::vector<json> lines;
    for (const auto& e : r.trace) lines.push_back(to_json(e));
    write_text(run.path("trace.jsonl"), to_jsonl(lines));

    std::vector<std::size_t> all;
    const auto& idx = eval_indices(g, all);
    const auto pred = infer_anonymous(r.best_model, g.features(), idx, cfg.seed);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) hit += pred[i] == g.label(idx[i]);
    const AnGcnEpoch& last = r.trace.back();
    run.metrics() = {{"best_acc_g", r.best_acc_g},
                     {"best_epoch", r.best_epoch},
                     {"final_acc_d", last.acc_d ? json(*last.acc_d) : json(nullptr)},
                     {"final_acc_g", last.acc_g ? json(*last.acc_g) : json(nullptr)},
                     {"infer_acc", static_cast<double>(hit) / static_cast<double>(idx.size())},
                     {"angcn_acc", r.best_acc_g}};
    std::cout << "best acc_G " << format_double(r.best_acc_g, 6) << " at epoch " << r.best_epoch << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferOpts {
    std::string checkpoint;
    std::string features;
    std::vector<std::size_t> indices;
};

int cmd_infer(const InferOpts& o, const Global& gl, Run& run) {
    const AnGcnModel m = angcn_from_checkpoint(read_checkpoint(o.checkpoint));
    const FeatureTable t = read_features(o.features);
    std::vector<std::size_t> idx = o.indices;
    if (idx.empty()) {
        idx.resize(static_cast<std::size_t>(t.features.rows()));
        std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    const auto labels = infer_anonymous(m, t.features, idx, gl.seed);
    write_json(run.path("labels.json"), {{"indices", idx}, {"labels", labels}});
    run.metrics() = {{"n", idx.size()}};
    if (t.labels) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) hit += labels[i] == (*t.labels)[idx[i]];
        const double acc = static_cast<double>(hit) / static_cast<double>(idx.size());
        run.metrics()["accuracy"] = acc;
        std::cout << "accuracy " << format_double(acc, 6) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct SignalOpts {
    std::string graph;
    int epochs = 64;
    int trials = 200;
    int max_len = 64;
};

double relative_residual(const std::vector<double>& x, const std::vector<double>& y) {
    double scale = 1.0, err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        scale = std::max(scale, std::abs(x[i]));
        err = std::max(err, std::abs(x[i] - y[i]));
    }
    return err / scale;
}

int cmd_signal(const SignalOpts& o, const Global& gl, Run& run) {
    double max_res = 0.0, max_paired = 0.0;
    if (o.graph.empty()) {
        if (o.trials < 1 || o.max_len < 1) throw UsageError("--trials and --max-len must be positive");
        Rng rng = make_rng(gl.seed, "signal-selftest");
        std::uniform_int_distribution<int> len(1, o.max_len);
        std::normal_distribution<double> val(0.0, 1.0);
        CsvTable t;
        t.header = {"trial", "E", "residual", "paired_discrepancy"};
        for (int k = 0; k < o.trials; ++k) {
            std::vector<double> x(static_cast<std::size_t>(len(rng)));
            for (double& v : x) v = val(rng);
            const Reconstruction r = reconstruct(dft(x));
            const double res = relative_residual(x, r.standard);
            max_res = std::max(max_res, res);
            max_paired = std::max(max_paired, r.paired_discrepancy);
            t.add_row({std::to_string(k), std::to_string(x.size()), format_double(res), format_double(r.paired_discrepancy)});
        }
        write_text(run.path("signal_selftest.csv"), t.str());
    } else {
        if (o.epochs < 1) throw UsageError("--epochs must be at least 1");
        const Graph g = load_labeled(o.graph);
        auto basis = std::make_shared<const SpectralBasis>(graph_basis(g, LaplacianKind::symmetric_normalized));
        SpectralModel m = make_spectral_model(basis, g.n_features(), g.num_classes(), gl.seed);
        TrajectoryRecorder rec;
        TrainConfig cfg;
        cfg.epochs = o.epochs;
        cfg.on_epoch = rec.hook();
        train_model(m, g, cfg);
        CsvTable t;
        t.header = {"node", "t", "value", "reconstructed", "amplitude", "phase"};
        for (const NodeTrajectory& tr : rec.trajectories()) {
            const Spectrum s = dft(tr);
            const Reconstruction r = reconstruct(s);
            max_res = std::max(max_res, relative_residual(tr.values, r.standard));
            max_paired = std::max(max_paired, r.paired_discrepancy);
            for (std::size_t k = 0; k < tr.epochs(); ++k)
                t.add_row({std::to_string(tr.node), std::to_string(k), format_double(tr.values[k]),
                           format_double(r.standard[k]), format_double(s.amplitude(k)), format_double(s.phase(k))});
        }
        write_text(run.path("signal.csv"), t.str());
    }
    run.metrics() = {{"max_residual", max_res}, {"max_paired_discrepancy", max_paired}};
    std::cout << "max residual " << format_double(max_res, 6) << "\n";
    return kExitOk;
}

struct PerturbOpts {
    std::string graph;
    std::string checkpoint;
    long node = -1;
    std::size_t cv = 14;
    std::string laplacian = "symmetric-normalized";
    int filter_power = 1;
};

int cmd_perturb(const PerturbOpts& o, Run& run) {
    const Graph g = read_graph(o.graph);
    std::shared_ptr<const SpectralBasis> basis;
    Vector theta;
    if (!o.checkpoint.empty()) {
        const Checkpoint ck = read_checkpoint(o.checkpoint);
        basis = std::make_shared<const SpectralBasis>(
            graph_basis(g, parse_laplacian_kind(ck.meta.value("laplacian", o.laplacian))));
        const SpectralModel m = spectral_from_checkpoint(ck, basis);
        theta = m.filter.value().col(0);
    } else {
        basis = std::make_shared<const SpectralBasis>(graph_basis(g, parse_laplacian_kind(o.laplacian)));
        theta = lowpass_filter(basis->eigenvalues, o.filter_power).col(0);
    }
    const std::size_t v = o.node >= 0 ? static_cast<std::size_t>(o.node) : top_k_by_degree(g, 1).front();
    const PerturbResult r = perturb_u_experiment(g, *basis, theta, g.features(), v, o.cv, default_deltas());
    write_text(run.path("perturb_u.csv"), r.table().str());

    json& m = run.metrics();
    m = {{"node", v}, {"c_v", o.cv}, {"columns", r.deltas.size() + 1}};
    for (std::size_t k = 0; k < r.deltas.size(); ++k) {
        if (std::abs(r.deltas[k] - 0.5) > 1e-12) continue;
        const auto col = static_cast<Index>(k);
        double nb = 0.0;
        for (Index a = 1; a < r.deviation.rows(); ++a) nb = std::max(nb, r.deviation(a, col));
        m["target_deviation_at_half"] = r.deviation(0, col);
        m["max_neighbor_deviation_at_half"] = nb;
        m["ratio_at_half"] = nb > 0 ? json(r.deviation(0, col) / nb) : json(nullptr);
    }
    std::cout << "perturb-u: node " << v << ", " << r.acting.size() << " acting targets\n";
    return kExitOk;
}

struct DeleteOpts {
    std::string graph;
    std::vector<std::size_t> taus;
    std::size_t top = 10;
    std::vector<int> orders{1, 2, 3};
    std::string laplacian = "symmetric-normalized";
};

int cmd_delete(const DeleteOpts& o, Run& run) {
    const Graph g = read_graph(o.graph);
    const std::vector<std::size_t> taus = o.taus.empty() ? top_k_by_degree(g, o.top) : o.taus;
    std::vector<DeleteNodeResult> runs;
    const auto mean = delete_node_sweep(g, taus, o.orders, parse_laplacian_kind(o.laplacian), &runs);

    CsvTable longf;
    longf.header = {"tau", "order", "node", "C"};
    CsvTable summary;
    summary.header = {"tau"};
    for (int b : o.orders) summary.header.push_back("C_" + std::to_string(b));
    for (const auto& r : runs) {
        for (const auto& [ord, node, c] : r.rows)
            longf.add_row({std::to_string(r.tau), std::to_string(ord), std::to_string(node), format_double(c)});
        std::vector<std::string> row{std::to_string(r.tau)};
        for (int b : o.orders) {
            const auto it = r.mean_abs_c.find(b);
            row.push_back(it == r.mean_abs_c.end() ? "" : format_double(it->second));
        }
        summary.add_row(std::move(row));
    }
    write_text(run.path("delete_node.csv"), longf.str());
    write_text(run.path("delete_node_summary.csv"), summary.str());

    json per_order = json::object();
    for (const auto& [b, c] : mean) per_order[std::to_string(b)] = c;
    bool decreasing = mean.size() == o.orders.size();
    for (std::size_t k = 1; decreasing && k < o.orders.size(); ++k)
        decreasing = mean.at(o.orders[k]) < mean.at(o.orders[k - 1]);
    run.metrics() = {{"taus", taus}, {"mean_abs_c", per_order}, {"strictly_decreasing", decreasing}};
    std::cout << "delete-node: " << taus.size() << " deletions, mean |C| by order";
    for (const auto& [b, c] : mean) std::cout << " " << b << ":" << format_double(c, 6);
    std::cout << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

std::string cell(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return "";
    if (j[key].is_number()) return format_double(j[key].get<double>(), 4);
    if (j[key].is_boolean()) return j[key].get<bool>() ? "true" : "false";
    return j[key].dump();
}

int cmd_report(const std::vector<std::string>& inputs, Run& run) {
    std::vector<fs::path> dirs;
    json warnings = json::array();
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::exists(p / "manifest.json")) {
            dirs.push_back(p);
            continue;
        }
        std::vector<fs::path> sub;
        if (fs::is_directory(p))
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_directory() && fs::exists(e.path() / "manifest.json")) sub.push_back(e.path());
        if (sub.empty()) warnings.push_back("no manifest under " + p.string());
        std::sort(sub.begin(), sub.end());
        dirs.insert(dirs.end(), sub.begin(), sub.end());
    }

    json rows = json::array();
    std::map<std::string, json> by_graph;
    for (const auto& d : dirs) {
        json man;
        try {
            man = read_json(d / "manifest.json");
        } catch (const std::exception& e) {
            warnings.push_back("unreadable manifest in " + d.string() + ": " + e.what());
            continue;
        }
        const json metrics = man.value("metrics", json::object());
        const std::string cmd = man.value("command", "");
        json row = {{"run", d.filename().string()}, {"command", cmd}};
        for (const char* k : {"clean_acc", "attacked_acc", "angcn_acc", "success_rate"})
            row[k] = metrics.contains(k) ? metrics[k] : json(nullptr);
        rows.push_back(row);

        const json cfg = man.value("config", json::object());
        if (!cfg.contains("graph") || !cfg["graph"].is_string()) continue;
        json& pair = by_graph[cfg["graph"].get<std::string>()];
        if (cmd == "attack") {
            pair["clean_acc"] = row["clean_acc"];
            pair["attacked_acc"] = row["attacked_acc"];
            pair["success_rate"] = row["success_rate"];
        } else if (cmd == "defend") {
            pair["defended_acc"] = row["angcn_acc"];
        } else if (cmd == "train" && !pair.contains("clean_acc")) {
            pair["clean_acc"] = row["clean_acc"];
        }
    }
    json pairs = json::array();
    for (auto& [graph, p] : by_graph) {
        if (!p.contains("attacked_acc") && !p.contains("defended_acc")) continue;
        p["graph"] = graph;
        pairs.push_back(p);
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << "\n";

    write_json(run.path("summary.json"), {{"runs", rows}, {"pairs", pairs}, {"warnings", warnings}});
    std::ostringstream md;
    md << "| run | command | clean acc | attacked acc | AN-GCN acc | attack success |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& r : rows)
        md << "| " << r["run"].get<std::string>() << " | " << r["command"].get<std::string>() << " | "
           << cell(r, "clean_acc") << " | " << cell(r, "attacked_acc") << " | " << cell(r, "angcn_acc") << " | "
           << cell(r, "success_rate") << " |\n";
    if (!pairs.empty()) {
        md << "\n| graph | clean acc | attacked acc | defended acc |\n|---|---|---|---|\n";
        for (const auto& p : pairs)
            md << "| " << p["graph"].get<std::string>() << " | " << cell(p, "clean_acc") << " | "
               << cell(p, "attacked_acc") << " | " << cell(p, "defended_acc") << " |\n";
    }
    for (const auto& w : warnings) md << "\nwarning: " << w.get<std::string>() << "\n";
    write_text(run.path("summary.md"), md.str());
    run.metrics() = {{"runs", rows.size()}, {"pairs", pairs.size()}, {"warnings", warnings.size()}};
    std::cout << rows.size() << " runs, " << pairs.size() << " paired rows\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Spectral GCN, edge-perturbation attack and anonymous GCN toolkit", "angcn"};
    app.set_version_flag("--version", ANGCN_VERSION);
    app.set_config("--config", "", "INI/TOML config file; command-line flags take precedence");
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    Global gl;
    const char* env_out = std::getenv("ANGCN_OUT");
    gl.out = env_out && *env_out ? env_out : "angcn-out";
    app.add_option("--seed", gl.seed, "Run seed");
    app.add_option("--out", gl.out, "Output directory (default: $ANGCN_OUT or ./angcn-out)");

    IngestOpts io;
    auto* ingest = app.add_subcommand("ingest", "Convert Cora files or a synthetic spec to a graph file");
    ingest->add_option("--cora", io.cora, "cora.content and cora.cites")->expected(2);
    ingest->add_option("--synth", io.synth, "ring:N | barbell:K | sbm:BxS:p_in:p_out[:seed]");
    ingest->add_option("-o,--output", io.output, "Graph file (default: <out>/graph.json)");
    ingest->add_flag("--row-normalize", io.row_normalize, "Scale feature rows to sum 1");
    ingest->add_option("--train", io.train, "Cora training nodes (split evenly over classes)");
    ingest->add_option("--val", io.val);
    ingest->add_option("--test", io.test);

    TrainOpts to;
    auto* train = app.add_subcommand("train", "Train a spectral or semi-supervised GCN");
    train->add_option("--graph", to.graph)->required();
    train->add_option("--model", to.model)->check(CLI::IsMember({"spectral", "semi"}));
    train->add_option("--epochs", to.epochs);
    train->add_option("--lr", to.lr);
    train->add_option("--l2", to.l2);
    train->add_option("--optimizer", to.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    train->add_option("--hidden", to.hidden);
    train->add_option("--laplacian", to.laplacian);
    train->add_option("--activation", to.activation);
    train->add_option("--filter-power", to.filter_power);
    train->add_option("--propagation", to.propagation);

    AttackOpts ao;
    auto* attack = app.add_subcommand("attack", "Edge-perturbation attack against a semi-GCN checkpoint");
    attack->add_option("--graph", ao.graph)->required();
    attack->add_option("--checkpoint", ao.checkpoint)->required();
    attack->add_option("--targets", ao.targets)->required()->delimiter(',');
    attack->add_option("--desired", ao.desired, "Desired label per target")->required()->delimiter(',');
    attack->add_option("--mode", ao.mode)->check(CLI::IsMember({"single", "multi"}));
    attack->add_option("--vartheta", ao.vartheta, "Weight on target rows in multi mode");
    attack->add_option("--reg-weight", ao.reg_weight);
    attack->add_option("--epochs", ao.epochs);
    attack->add_option("--lr", ao.lr);
    attack->add_option("--surrogate", ao.surrogate)->check(CLI::IsMember({"raw", "renormalized"}));
    attack->add_option("--escalations", ao.escalations);
    attack->add_flag("--freeze-check", ao.freeze_check, "Verify target rows of the emitted graph are unchanged");

    DefendOpts dfo;
    auto* defend = app.add_subcommand("defend", "Train the anonymous GCN");
    defend->add_option("--graph", dfo.graph)->required();
    defend->add_option("--epochs", dfo.cfg.epochs);
    defend->add_option("--noise-width", dfo.cfg.noise_width);
    defend->add_option("--hidden", dfo.cfg.hidden);
    defend->add_option("--q", dfo.cfg.q);
    defend->add_option("--lr-d", dfo.cfg.lr_d);
    defend->add_option("--lr-g", dfo.cfg.lr_g);
    defend->add_option("--inner", dfo.cfg.inner_epochs);
    defend->add_option("--sigma", dfo.cfg.sigma);
    defend->add_option("--eps", dfo.eps, "Staggered noise level (0: pdf at one sigma)");
    defend->add_option("--laplacian", dfo.laplacian);
    defend->add_option("--activation", dfo.activation);
    defend->add_option("--filter-power", dfo.cfg.filter_power);
    defend->add_option("--sample-from", dfo.sample_from)->check(CLI::IsMember({"all", "train"}));
    defend->add_option("--label-loss", dfo.label_loss);
    defend->add_option("--fake-weight", dfo.cfg.fake_weight);
    defend->add_option("--eval-every", dfo.cfg.eval_every);

    InferOpts ifo;
    auto* infer = app.add_subcommand("infer", "Label nodes from features only");
    infer->add_option("--checkpoint", ifo.checkpoint)->required();
    infer->add_option("--features", ifo.features, "Graph or feature file; edges are never read")->required();
    infer->add_option("--indices", ifo.indices, "Nodes to label (default: all)")->delimiter(',');

    auto* experiment = app.add_subcommand("experiment", "Localization and signal experiments");
    experiment->require_subcommand(1);
    SignalOpts so;
    auto* signal = experiment->add_subcommand("signal", "DFT model of node trajectories");
    signal->add_option("--graph", so.graph, "Record trajectories from a spectral training run");
    signal->add_option("--epochs", so.epochs);
    signal->add_option("--trials", so.trials, "Self-test trajectories when no graph is given");
    signal->add_option("--max-len", so.max_len);
    PerturbOpts po;
    auto* perturb = experiment->add_subcommand("perturb-u", "Scale rows of U and measure embedding deviation");
    perturb->add_option("--graph", po.graph)->required();
    perturb->add_option("--checkpoint", po.checkpoint, "Spectral checkpoint supplying the filter");
    perturb->add_option("--node", po.node, "Target node (default: highest degree)");
    perturb->add_option("--cv", po.cv);
    perturb->add_option("--laplacian", po.laplacian);
    perturb->add_option("--filter-power", po.filter_power);
    DeleteOpts dno;
    auto* del = experiment->add_subcommand("delete-node", "Delete a node and compare eigenvector rows");
    del->add_option("--graph", dno.graph)->required();
    del->add_option("--tau", dno.taus, "Deleted nodes (default: top --top by degree)")->delimiter(',');
    del->add_option("--top", dno.top);
    del->add_option("--orders", dno.orders)->delimiter(',');
    del->add_option("--laplacian", dno.laplacian);

    std::vector<std::string> report_in;
    auto* report = app.add_subcommand("report", "Merge metrics across run directories");
    report->add_option("runs", report_in, "Run directories or parents of run directories");

    std::vector<std::string> argv_store{"angcn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        auto start = [&](const std::string& name, std::vector<const CLI::App*> apps) {
            apps.insert(apps.begin(), &app);
            return Run(name, gl, std::move(apps));
        };
        int code = kExitOk;
        if (ingest->parsed()) {
            Run r = start("ingest", {ingest});
            if ((code = cmd_ingest(io, r)) == kExitOk) r.finish();
        } else if (train->parsed()) {
            Run r = start("train", {train});
            if ((code = cmd_train(to, gl, r)) == kExitOk) r.finish();
        } else if (attack->parsed()) {
            Run r = start("attack", {attack});
            code = cmd_attack(ao, gl, r);
            r.finish();
        } else if (defend->parsed()) {
            Run r = start("defend", {defend});
            if ((code = cmd_defend(dfo, gl, r)) == kExitOk) r.finish();
        } else if (infer->parsed()) {
            Run r = start("infer", {infer});
            if ((code = cmd_infer(ifo, gl, r)) == kExitOk) r.finish();
        } else if (signal->parsed()) {
            Run r = start("experiment signal", {experiment, signal});
            if ((code = cmd_signal(so, gl, r)) == kExitOk) r.finish();
        } else if (perturb->parsed()) {
            Run r = start("experiment perturb-u", {experiment, perturb});
            if ((code = cmd_perturb(po, r)) == kExitOk) r.finish();
        } else if (del->parsed()) {
            Run r = start("experiment delete-node", {experiment, del});
            if ((code = cmd_delete(dno, r)) == kExitOk) r.finish();
        } else if (report->parsed()) {
            Run r = start("report", {report});
            if ((code = cmd_report(report_in, r)) == kExitOk) r.finish();
        }
        return code;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

} // namespace angcn::cli

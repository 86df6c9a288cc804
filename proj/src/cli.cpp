#include "flowbench/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowbench/dataset_io.hpp"
#include "flowbench/experiments.hpp"
#include "flowbench/flowdata.hpp"
#include "flowbench/labeling.hpp"
#include "flowbench/nn/checkpoint.hpp"
#include "flowbench/pipeline.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/snapshots.hpp"
#include "flowbench/synth.hpp"
#include "flowbench/training.hpp"

namespace flowbench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "flowbench 1.0.0";

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for digest: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

// Packet-level record form: one JSON object per line with
// {"ts", "src", "dst", "proto", "size", "payload", "sni"?}.
bool looks_like_packet_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open input file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        return j.is_object() && j.contains("ts") && !j.contains("packets");
    }
    return false;
}

std::vector<KeyedPacket> read_keyed_packets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open input file: " + path);
    std::vector<KeyedPacket> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedInput("line " + std::to_string(lineno) + ": invalid JSON: " + e.what(),
                                 lineno);
        }
        try {
            KeyedPacket p;
            p.timestamp = j.at("ts").get<double>();
            p.key.src = j.at("src").get<std::string>();
            p.key.dst = j.at("dst").get<std::string>();
            p.key.proto = j.at("proto").get<std::string>();
            p.packet_size = j.at("size").get<std::uint32_t>();
            p.payload_size = j.at("payload").get<std::uint32_t>();
            if (j.contains("sni") && j.at("sni").is_string())
                p.sni = j.at("sni").get<std::string>();
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw MalformedInput("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    return out;
}

Dataset load_input(const std::string& path, double idle_timeout) {
    if (looks_like_packet_file(path)) {
        Dataset ds;
        ds.name = fs::path(path).stem().string();
        for (auto& f : assemble_flows(read_keyed_packets(path), idle_timeout)) {
            ds.items.push_back(make_item(std::move(f)));
        }
        return ds;
    }
    return read_dataset_jsonl(path);
}

Dataset to_ppi_dataset(const Dataset& ds, std::size_t ppi_len, double iat_cap) {
    Dataset out;
    out.name = ds.name;
    out.collection = ds.collection;
    for (const auto& item : ds.items) {
        if (!item.label()) continue;
        TimeSeriesInput x;
        if (const auto* f = std::get_if<Flow>(&item.data)) {
            x = extract_ppi(*f, ppi_len);
        } else if (const auto* t = std::get_if<Trace>(&item.data)) {
            x = extract_ppi(*t, ppi_len);
        } else if (const auto* p = std::get_if<PpiRecord>(&item.data)) {
            x = from_ppi_record(*p, ppi_len);
        } else {
            continue;  // snapshots have no per-packet triple form
        }
        x = clean(std::move(x), iat_cap);
        PpiRecord rec;
        rec.id = item.item_id();
        rec.label = item.label();
        rec.iat.assign(x.iat.begin(), x.iat.begin() + static_cast<std::ptrdiff_t>(x.valid_len));
        rec.size.assign(x.size.begin(), x.size.begin() + static_cast<std::ptrdiff_t>(x.valid_len));
        for (std::size_t i = 0; i < x.valid_len; ++i) {
            rec.dir.push_back(x.dir[i] > 0 ? 1 : -1);
        }
        DatasetItem di = make_item(std::move(rec));
        di.origin_id = item.origin_id;
        out.items.push_back(std::move(di));
    }
    return out;
}

std::string percentile_csv(const PercentileTable& table) {
    std::ostringstream out;
    for (const auto& w : table.warnings) out << "# warning: " << w << "\n";
    out << "class,percentile,packet_count,duration_seconds\n";
    for (const auto& r : table.rows) {
        out << r.class_name << "," << r.percentile << "," << r.packet_count << "," << r.duration
            << "\n";
    }
    return out.str();
}

TaskSpec resolve_task(const std::string& task, const Dataset& source, std::uint64_t seed) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& it : source.items) {
        if (it.label()) ++counts[it.label()->service];
    }
    if (counts.empty()) throw std::invalid_argument("source dataset has no labeled items");
    std::vector<std::string> classes;
    for (const auto& [cls, _] : counts) classes.push_back(cls);
    TaskSpec base = make_task(classes);
    if (task == "base25") return base;
    if (task == "meaningful5") return group_task(base, meaningful_grouping());
    if (task == "random5") {
        const TaskSpec meaningful = group_task(base, meaningful_grouping());
        std::map<std::string, std::uint64_t> group_counts;
        for (const auto& [cls, n] : counts) group_counts[meaningful.grouping.at(cls)] += n;
        std::vector<std::uint64_t> targets;
        for (const auto& [_, n] : group_counts) targets.push_back(n);
        return group_task(base, random_grouping(base, counts, targets, seed));
    }
    throw std::invalid_argument("unknown task: " + task +
                                " (expected base25|meaningful5|random5)");
}

struct RunPaths {
    fs::path dir;
    fs::path manifest;
};

RunPaths run_paths(const std::string& run_root, const std::string& digest) {
    RunPaths p;
    p.dir = fs::path(run_root) / digest;
    p.manifest = p.dir / "manifest.json";
    return p;
}

int cmd_synth(const std::string& out_source, const std::string& out_target,
              std::size_t flows_per_class, double shift, std::uint64_t seed) {
    SynthSpec spec;
    spec.flows_per_class = flows_per_class;
    spec.shift = shift;
    spec.seed = seed;
    auto [source, target] = synth_generate(spec);
    write_dataset_jsonl(source, out_source);
    write_dataset_jsonl(target, out_target);
    std::cout << "wrote " << source.items.size() << " flows to " << out_source << " and "
              << target.items.size() << " flows to " << out_target << "\n";
    return 0;
}

int cmd_prepare(const std::string& in_a, const std::string& in_b, const std::string& rules_path,
                const std::string& out_a, const std::string& out_b, std::size_t classes,
                std::size_t ppi_len, double iat_cap, double idle_timeout,
                const std::string& stats_path, const std::string& percentiles_arg) {
    const std::vector<LabelRule> rules = load_rules(rules_path);

    Dataset a = load_input(in_a, idle_timeout);
    const std::size_t labeled_a = label_dataset(a, rules);
    std::cout << "labeled " << labeled_a << "/" << a.items.size() << " items in " << in_a << "\n";

    std::vector<double> percentiles;
    {
        std::stringstream ss(percentiles_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) percentiles.push_back(std::stod(tok));
        }
    }

    if (!in_b.empty()) {
        Dataset b = load_input(in_b, idle_timeout);
        const std::size_t labeled_b = label_dataset(b, rules);
        std::cout << "labeled " << labeled_b << "/" << b.items.size() << " items in " << in_b
                  << "\n";
        const TaskSpec task = select_common_classes(a, b, classes);
        a = filter_relabel(a, task);
        b = filter_relabel(b, task);
        if (!stats_path.empty()) {
            write_text(stats_path, percentile_csv(length_percentiles(a, percentiles)));
        }
        write_dataset_jsonl(to_ppi_dataset(a, ppi_len, iat_cap), out_a);
        write_dataset_jsonl(to_ppi_dataset(b, ppi_len, iat_cap), out_b);
        std::cout << "task classes: " << task.classes.size() << "; wrote " << out_a << " and "
                  << out_b << "\n";
    } else {
        if (!stats_path.empty()) {
            write_text(stats_path, percentile_csv(length_percentiles(a, percentiles)));
        }
        write_dataset_jsonl(to_ppi_dataset(a, ppi_len, iat_cap), out_a);
        std::cout << "wrote " << out_a << "\n";
    }
    return 0;
}

int cmd_augment(const std::string& in_path, const std::string& out_path, double window,
                double step, long balance, std::uint64_t seed) {
    const Dataset in = read_dataset_jsonl(in_path);
    const Dataset out = balance > 0
                            ? augment_dataset(in, window, step,
                                              static_cast<std::size_t>(balance), seed)
                            : augment_dataset(in, window, step);
    write_dataset_jsonl(out, out_path);

    std::vector<double> sizes;
    for (const auto& it : out.items) {
        sizes.push_back(static_cast<double>(std::get<Snapshot>(it.data).packets.size()));
    }
    std::sort(sizes.begin(), sizes.end());
    const double median = sizes.empty() ? 0.0 : sizes[(sizes.size() - 1) / 2];
    std::cout << "snapshots: " << out.items.size() << "; median packets per snapshot: " << median
              << "\n";
    return 0;
}

int run_transfer_like(const std::string& mode, const std::string& source_path,
                      const std::string& target_path, ExperimentConfig cfg,
                      const std::string& run_root) {
    const Dataset source = read_dataset_jsonl(source_path);
    const Dataset target =
        target_path.empty() ? source : read_dataset_jsonl(target_path);

    const TaskSpec task = resolve_task(cfg.task, source, cfg.seed);
    cfg.task_sources = {source.name};

    nn::Graph trained;
    const bool has_model = cfg.model != "knn";
    TransferOutcome outcome =
        transfer_eval(source, target, task, cfg, std::nullopt, has_model ? &trained : nullptr);

    const RunPaths rp = run_paths(run_root, outcome.config_digest);
    fs::create_directories(rp.dir);

    json manifest;
    manifest["tool"] = kToolVersion;
    manifest["mode"] = mode;
    manifest["config"] = config_to_json(cfg);
    manifest["config_hash"] = outcome.config_digest;
    manifest["inputs"]["source"] = {{"path", source_path}, {"digest", file_digest(source_path)}};
    if (!target_path.empty()) {
        manifest["inputs"]["target"] = {{"path", target_path},
                                        {"digest", file_digest(target_path)}};
    }
    manifest["val_accuracy"] = outcome.val_accuracy;
    manifest["gap"] = outcome.gap;
    manifest["best_epoch"] = outcome.training.best_epoch;

    json artifacts = json::array();
    write_text((rp.dir / "report_source_test.json").string(),
               report_to_json(outcome.source_test).dump(2) + "\n");
    artifacts.push_back("report_source_test.json");
    if (mode == "transfer") {
        write_text((rp.dir / "report_target.json").string(),
                   report_to_json(outcome.target).dump(2) + "\n");
        artifacts.push_back("report_target.json");
    }
    write_text((rp.dir / "curves.csv").string(), curves_csv(outcome.training));
    artifacts.push_back("curves.csv");
    if (has_model) {
        nn::save_checkpoint((rp.dir / "model.ckpt").string(), trained, outcome.config_digest);
        artifacts.push_back("model.ckpt");
    }
    manifest["artifacts"] = artifacts;
    write_text(rp.manifest.string(), manifest.dump(2) + "\n");

    std::cout << mode << " run " << outcome.config_digest
              << ": val_accuracy=" << outcome.val_accuracy
              << " source_test_accuracy=" << outcome.source_test.metrics.accuracy;
    if (mode == "transfer") {
        std::cout << " target_accuracy=" << outcome.target.metrics.accuracy
                  << " gap=" << outcome.gap;
    }
    std::cout << "\nartifacts in " << rp.dir.string() << "\n";
    return 0;
}

int cmd_report(const std::string& run_root, const std::string& out_dir) {
    std::vector<ResultRow> rows;
    std::vector<ScatterRow> scatter;
    if (!fs::is_directory(run_root)) {
        std::cerr << "run directory not found: " << run_root << "\n";
        return 6;
    }
    std::vector<fs::path> manifests;
    for (const auto& entry : fs::directory_iterator(run_root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            manifests.push_back(entry.path() / "manifest.json");
        }
    }
    std::sort(manifests.begin(), manifests.end());
    if (manifests.empty()) {
        std::cerr << "no runs in " << run_root << "\n";
        return 6;
    }

    for (const auto& mpath : manifests) {
        std::ifstream in(mpath);
        json m;
        in >> m;
        const json cfg = m.at("config");
        const std::string model = cfg.at("model").get<std::string>();
        const std::string taskname = cfg.at("task").get<std::string>();
        const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

        ScatterRow srow;
        srow.model = model;
        srow.seed = seed;
        srow.val_accuracy = m.value("val_accuracy", 0.0);

        for (const auto& art : m.at("artifacts")) {
            const std::string name = art.get<std::string>();
            if (name.rfind("report_", 0) != 0) continue;
            std::ifstream rin(mpath.parent_path() / name);
            json r;
            rin >> r;
            ResultRow row;
            row.model = model;
            row.task = taskname;
            row.seed = seed;
            row.dataset = r.at("dataset").get<std::string>();
            row.metrics.accuracy = r.at("accuracy").get<double>();
            row.metrics.macro_f1 = r.at("macro_f1").get<double>();
            row.metrics.weighted_f1 = r.at("weighted_f1").get<double>();
            row.metrics.macro_precision = r.at("macro_precision").get<double>();
            row.metrics.macro_recall = r.at("macro_recall").get<double>();
            rows.push_back(row);
            if (name == "report_source_test.json") {
                srow.source_test_accuracy = row.metrics.accuracy;
            } else if (name == "report_target.json") {
                srow.target_accuracy = row.metrics.accuracy;
            }
        }
        if (m.value("mode", "transfer") == "transfer") scatter.push_back(srow);
    }

    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "results.csv").string(), results_csv(rows));
    write_text((fs::path(out_dir) / "scatter.csv").string(), scatter_csv(scatter));
    write_text((fs::path(out_dir) / "rank_table.csv").string(), rank_table(scatter));
    std::cout << "aggregated " << manifests.size() << " runs into " << out_dir << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Traffic-classification transfer workbench"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic source/target corpora");
    std::string out_source = "synth_source.jsonl", out_target = "synth_target.jsonl";
    std::size_t flows_per_class = 200;
    double shift = 0.6;
    std::uint64_t synth_seed = 1;
    synth->add_option("--out-source", out_source, "Source corpus path");
    synth->add_option("--out-target", out_target, "Target corpus path");
    synth->add_option("--flows-per-class", flows_per_class, "Flows per class");
    synth->add_option("--shift", shift, "Target parameter perturbation scale");
    synth->add_option("--seed", synth_seed, "Sampling seed");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Assemble, label, align, and extract inputs");
    std::string in_a, in_b, rules_path, out_a = "prepared_a.jsonl", out_b = "prepared_b.jsonl";
    std::string stats_path, percentiles_arg = "1,25,50,75,99";
    std::size_t classes = 25, ppi_len = 30;
    double iat_cap = 5.0, idle_timeout = 600.0;
    prepare->add_option("--in", in_a, "Input corpus (packet or flow records)")->required();
    prepare->add_option("--in-b", in_b, "Second corpus for class alignment");
    prepare->add_option("--rules", rules_path, "SNI labeling rules (TSV)")->required();
    prepare->add_option("--out", out_a, "Output dataset");
    prepare->add_option("--out-b", out_b, "Second output dataset");
    prepare->add_option("--classes", classes, "Common classes to select (two-corpus mode)");
    prepare->add_option("--ppi-len", ppi_len, "Per-packet triples per item");
    prepare->add_option("--iat-cap", iat_cap, "Inter-arrival time cap, seconds");
    prepare->add_option("--idle-timeout", idle_timeout, "Flow idle timeout, seconds");
    prepare->add_option("--stats", stats_path, "Percentile table output (CSV)");
    prepare->add_option("--percentiles", percentiles_arg, "Comma-separated percentiles");

    // augment
    auto* augment = app.add_subcommand("augment", "Window flows into snapshots");
    std::string aug_in, aug_out = "snapshots.jsonl";
    double window = 60.0, step = 15.0;
    long balance = 0;
    std::uint64_t aug_seed = 1;
    augment->add_option("--in", aug_in, "Flow dataset")->required();
    augment->add_option("--out", aug_out, "Snapshot dataset");
    augment->add_option("--window", window, "Window length, seconds");
    augment->add_option("--step", step, "Window step, seconds");
    augment->add_option("--balance", balance, "Per-class snapshot target (0 = off)");
    augment->add_option("--seed", aug_seed, "Balancing seed");

    // train / transfer
    ExperimentConfig cfg;
    std::string source_path, target_path, run_root = "runs", view_name = "3ch",
                schedule_str = cfg.schedule.str();
    int jobs = 1;
    auto add_common = [&](CLI::App* c, bool with_target) {
        c->add_option("--source", source_path, "Training dataset")->required();
        if (with_target) c->add_option("--target", target_path, "Target dataset")->required();
        c->add_option("--model", cfg.model, "Model preset (or knn)");
        c->add_option("--input-view", view_name, "3ch|2ch|dir|flowpic");
        c->add_option("--norm", cfg.norm, "minmax|boxcox");
        c->add_option("--lr-schedule", schedule_str, "rate:epochs,rate:epochs,...");
        c->add_option("--epochs", cfg.epochs, "Epoch budget");
        c->add_option("--batch", cfg.batch, "Batch size");
        c->add_option("--seed", cfg.seed, "Experiment seed");
        c->add_option("--task", cfg.task, "base25|meaningful5|random5");
        c->add_option("--test-fraction", cfg.test_fraction, "Held-out test fraction");
        c->add_option("--val-fraction", cfg.val_fraction, "Validation fraction of the pool");
        c->add_option("--flowpic-window", cfg.flowpic_window, "Flowpic window, seconds");
        c->add_option("--flowpic-step", cfg.flowpic_step, "Flowpic step, seconds");
        c->add_option("--dir-up", cfg.dir_up_code, "Upstream direction code");
        c->add_option("--dir-down", cfg.dir_down_code, "Downstream direction code");
        c->add_option("--run-dir", run_root, "Run artifact root");
        c->add_option("--jobs", jobs, "Parallel config slots (configs run serially here)");
    };
    auto* train_cmd = app.add_subcommand("train", "Train and evaluate on one dataset");
    add_common(train_cmd, false);
    auto* transfer_cmd =
        app.add_subcommand("transfer", "Train on source, evaluate source test and target");
    add_common(transfer_cmd, true);

    // report
    auto* report = app.add_subcommand("report", "Aggregate run artifacts into CSV tables");
    std::string report_root = "runs", report_out = "report";
    report->add_option("--run-dir", report_root, "Run artifact root");
    report->add_option("--out", report_out, "Aggregate output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(out_source, out_target, flows_per_class, shift, synth_seed);
        }
        if (prepare->parsed()) {
            return cmd_prepare(in_a, in_b, rules_path, out_a, out_b, classes, ppi_len, iat_cap,
                               idle_timeout, stats_path, percentiles_arg);
        }
        if (augment->parsed()) {
            return cmd_augment(aug_in, aug_out, window, step, balance, aug_seed);
        }
        if (train_cmd->parsed() || transfer_cmd->parsed()) {
            const bool is_transfer = transfer_cmd->parsed();
            CLI::App* active = is_transfer ? transfer_cmd : train_cmd;
            cfg.view = active->count("--input-view") > 0 ? input_view_from_name(view_name)
                                                         : default_view_for_model(cfg.model);
            cfg.schedule = nn::LrSchedule::parse(schedule_str);
            return run_transfer_like(is_transfer ? "transfer" : "train", source_path,
                                     is_transfer ? target_path : std::string(), cfg, run_root);
        }
        if (report->parsed()) {
            return cmd_report(report_root, report_out);
        }
    } catch (const MalformedInput& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return 2;
    } catch (const ClassShortfallError& e) {
        std::cerr << "class selection shortfall: " << e.what() << "\n";
        return 3;
    } catch (const TrainAbort& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 4;
    } catch (const LeakageError& e) {
        std::cerr << "leakage guard: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace flowbench

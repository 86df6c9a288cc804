#include "flowbench/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "flowbench/knn.hpp"
#include "flowbench/models.hpp"
#include "flowbench/pipeline.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/stats.hpp"

namespace flowbench {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
    return json{{"model", cfg.model},
                {"view", input_view_name(cfg.view)},
                {"norm", cfg.norm},
                {"dir_up_code", cfg.dir_up_code},
                {"dir_down_code", cfg.dir_down_code},
                {"lr_schedule", cfg.schedule.str()},
                {"epochs", cfg.epochs},
                {"batch", cfg.batch},
                {"seed", cfg.seed},
                {"task", cfg.task},
                {"test_fraction", cfg.test_fraction},
                {"val_fraction", cfg.val_fraction},
                {"ppi_len", cfg.ppi_len},
                {"dir_len", cfg.dir_len},
                {"grid", cfg.grid},
                {"flowpic_window", cfg.flowpic_window},
                {"flowpic_step", cfg.flowpic_step},
                {"task_sources", cfg.task_sources}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.model = j.value("model", cfg.model);
    if (j.contains("view")) cfg.view = input_view_from_name(j.at("view").get<std::string>());
    cfg.norm = j.value("norm", cfg.norm);
    cfg.dir_up_code = j.value("dir_up_code", cfg.dir_up_code);
    cfg.dir_down_code = j.value("dir_down_code", cfg.dir_down_code);
    if (j.contains("lr_schedule"))
        cfg.schedule = nn::LrSchedule::parse(j.at("lr_schedule").get<std::string>());
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.task = j.value("task", cfg.task);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.ppi_len = j.value("ppi_len", cfg.ppi_len);
    cfg.dir_len = j.value("dir_len", cfg.dir_len);
    cfg.grid = j.value("grid", cfg.grid);
    cfg.flowpic_window = j.value("flowpic_window", cfg.flowpic_window);
    cfg.flowpic_step = j.value("flowpic_step", cfg.flowpic_step);
    if (j.contains("task_sources"))
        cfg.task_sources = j.at("task_sources").get<std::vector<std::string>>();
    return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string canon = config_to_json(cfg).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
}

InputView default_view_for_model(const std::string& model) {
    if (model == "dfcnn") return InputView::DirectionOnly;
    if (model == "lenet") return InputView::Flowpic;
    return InputView::ThreeChannel;
}

json report_to_json(const ExperimentReport& r) {
    json conf = json::array();
    for (std::size_t t = 0; t < r.confusion.k; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < r.confusion.k; ++p) row.push_back(r.confusion.at(t, p));
        conf.push_back(row);
    }
    return json{{"dataset", r.dataset_id},
                {"accuracy", r.metrics.accuracy},
                {"macro_f1", r.metrics.macro_f1},
                {"weighted_f1", r.metrics.weighted_f1},
                {"macro_precision", r.metrics.macro_precision},
                {"macro_recall", r.metrics.macro_recall},
                {"confusion", conf}};
}

namespace {

struct Prepared {
    nn::Tensor x;
    std::vector<std::size_t> y;
};

Prepared prepare(const Dataset& ds, const TaskSpec& task, const FeatureSpec& fs) {
    Prepared p;
    std::vector<const DatasetItem*> items;
    items.reserve(ds.items.size());
    p.y.reserve(ds.items.size());
    for (const auto& it : ds.items) {
        items.push_back(&it);
        p.y.push_back(task.index_of(it.label()->service));
    }
    p.x = featurize_batch(items, fs);
    return p;
}

ExperimentReport make_report(const std::string& dataset_id, const std::vector<std::size_t>& truth,
                             const std::vector<std::size_t>& preds, std::size_t k) {
    ExperimentReport r;
    r.dataset_id = dataset_id;
    r.confusion = ConfusionMatrix(k);
    for (std::size_t i = 0; i < truth.size(); ++i) r.confusion.add(truth[i], preds[i]);
    r.metrics = metrics_from_confusion(r.confusion);
    return r;
}

// All cleaned PPI inter-arrival values of a dataset, for normalizer fitting.
std::vector<double> collect_iats(const Dataset& ds, const FeatureSpec& fs) {
    std::vector<double> vals;
    for (const auto& it : ds.items) {
        TimeSeriesInput x;
        if (const auto* f = std::get_if<Flow>(&it.data)) {
            x = extract_ppi(*f, fs.ppi_len);
        } else if (const auto* t = std::get_if<Trace>(&it.data)) {
            x = extract_ppi(*t, fs.ppi_len);
        } else if (const auto* pr = std::get_if<PpiRecord>(&it.data)) {
            x = from_ppi_record(*pr, fs.ppi_len);
        } else {
            continue;
        }
        x = clean(std::move(x), fs.iat_cap);
        for (std::size_t i = 0; i < x.valid_len; ++i) vals.push_back(x.iat[i]);
    }
    return vals;
}

void check_fit_source(const NormalizerSpec& spec, const std::string& train_id,
                      const char* which) {
    if (spec.fit_source.empty() || spec.fit_source == "fixed" || spec.fit_source == train_id)
        return;
    throw LeakageError(std::string("normalizer for ") + which + " was fitted on '" +
                       spec.fit_source + "' but training uses '" + train_id +
                       "'; refusing to run");
}

}  // namespace

TransferOutcome transfer_eval(const Dataset& source, const Dataset& target, const TaskSpec& task,
                              const ExperimentConfig& cfg) {
    return transfer_eval(source, target, task, cfg, std::nullopt);
}

TransferOutcome transfer_eval(const Dataset& source, const Dataset& target, const TaskSpec& task,
                              const ExperimentConfig& cfg,
                              const std::optional<FeatureSpec>& feature_override,
                              nn::Graph* trained_out) {
    // Deriving the task from the training corpus itself is fine (including
    // self-evaluation, where target and source are the same corpus); deriving
    // it from a foreign target is not.
    for (const auto& s : cfg.task_sources) {
        if (s == target.name && target.name != source.name) {
            throw LeakageError("task was derived from the target dataset '" + target.name +
                               "'; refusing to run");
        }
    }

    Dataset src = filter_relabel(source, task);
    Dataset tgt = filter_relabel(target, task);
    if (src.items.empty()) throw std::invalid_argument("no source items under the task");
    if (tgt.items.empty()) throw std::invalid_argument("no target items under the task");
    src.name = source.name;
    tgt.name = target.name;

    auto [pool, test] = grouped_split(src, cfg.test_fraction, cfg.seed);
    auto [train_ds, val_ds] = grouped_split(pool, cfg.val_fraction, cfg.seed + 1);
    train_ds.name = source.name + "/train";
    val_ds.name = source.name + "/val";
    test.name = source.name + "/test";

    FeatureSpec fs;
    if (feature_override) {
        fs = *feature_override;
        check_fit_source(fs.iat_norm, train_ds.name, "inter-arrival times");
        check_fit_source(fs.size_norm, train_ds.name, "sizes");
        check_fit_source(fs.dir_norm, train_ds.name, "directions");
    } else {
        fs = default_features(cfg.view);
        fs.ppi_len = cfg.ppi_len;
        fs.dir_len = cfg.dir_len;
        fs.grid = cfg.grid;
        fs.window_len = cfg.flowpic_window;
        fs.step = cfg.flowpic_step;
        if (cfg.norm == "boxcox") {
            fs.iat_norm = fit_boxcox(collect_iats(train_ds, fs), 1e-6, train_ds.name);
        } else if (cfg.norm != "minmax") {
            throw std::invalid_argument("unknown norm: " + cfg.norm + " (expected minmax|boxcox)");
        }
        if (cfg.dir_up_code != 1.0 || cfg.dir_down_code != -1.0) {
            fs.dir_norm = direction_map(cfg.dir_up_code, cfg.dir_down_code);
        }
    }

    const std::size_t k = task.classes.size();
    const Prepared train_p = prepare(train_ds, task, fs);
    const Prepared val_p = prepare(val_ds, task, fs);
    const Prepared test_p = prepare(test, task, fs);
    const Prepared tgt_p = prepare(tgt, task, fs);

    TransferOutcome out;
    out.config_digest = config_hash(cfg);

    if (cfg.model == "knn") {
        KnnModel knn;
        const std::size_t d = train_p.x.item_size();
        knn.points.reserve(train_p.x.batch());
        for (std::size_t i = 0; i < train_p.x.batch(); ++i) {
            knn.points.emplace_back(train_p.x.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                                    train_p.x.data.begin() +
                                        static_cast<std::ptrdiff_t>((i + 1) * d));
        }
        knn.labels = train_p.y;
        auto predict_all = [&](const Prepared& p) {
            std::vector<std::size_t> preds(p.x.batch());
            std::vector<double> q(d);
            for (std::size_t i = 0; i < p.x.batch(); ++i) {
                std::copy(p.x.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                          p.x.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d), q.begin());
                preds[i] = knn_predict(knn, q);
            }
            return preds;
        };
        const auto val_preds = predict_all(val_p);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < val_preds.size(); ++i)
            if (val_preds[i] == val_p.y[i]) ++hits;
        out.val_accuracy = val_preds.empty()
                               ? 0.0
                               : static_cast<double>(hits) / static_cast<double>(val_preds.size());
        out.source_test = make_report(test.name, test_p.y, predict_all(test_p), k);
        out.target = make_report(tgt.name, tgt_p.y, predict_all(tgt_p), k);
    } else {
        const nn::Shape item_shape = feature_item_shape(fs);
        nn::Graph g;
        if (cfg.model == "dfcnn") {
            if (item_shape.size() != 2 || item_shape[1] != 1)
                throw std::invalid_argument("dfcnn needs a single-channel sequence view");
            g = models::build_df_cnn(item_shape[0], k, cfg.seed);
        } else if (cfg.model == "lenet") {
            if (item_shape.size() != 3)
                throw std::invalid_argument("lenet needs the flowpic view");
            g = models::build_lenet(item_shape[0], item_shape[1], k, cfg.seed);
        } else {
            if (item_shape.size() != 2)
                throw std::invalid_argument("transformer presets need a sequence view");
            g = models::build_transformer(models::transformer_preset(cfg.model), item_shape[0],
                                          item_shape[1], k, cfg.seed);
        }

        TrainConfig tc;
        tc.schedule = cfg.schedule;
        tc.epochs = cfg.epochs;
        tc.batch = cfg.batch;
        tc.seed = cfg.seed;
        out.training = train(g, train_p.x, train_p.y, val_p.x, val_p.y, tc);
        out.val_accuracy = out.training.best_val_accuracy;
        out.source_test = make_report(test.name, test_p.y, predict_classes(g, test_p.x), k);
        out.target = make_report(tgt.name, tgt_p.y, predict_classes(g, tgt_p.x), k);
        if (trained_out) *trained_out = std::move(g);
    }

    out.gap = out.source_test.metrics.accuracy - out.target.metrics.accuracy;
    return out;
}

std::vector<GroupingStudyRow> grouping_study(const Dataset& source, const Dataset& target,
                                             const std::vector<std::string>& models,
                                             const std::vector<std::uint64_t>& seeds,
                                             const ExperimentConfig& base) {
    // Base task: every labeled service in the source, lexicographic.
    std::map<std::string, std::uint64_t> counts;
    for (const auto& it : source.items) {
        if (it.label()) ++counts[it.label()->service];
    }
    std::vector<std::string> classes;
    for (const auto& [cls, _] : counts) classes.push_back(cls);
    const TaskSpec base_task = make_task(classes);

    const TaskSpec meaningful = group_task(base_task, meaningful_grouping());
    // Random grouping targets mirror the meaningful group sizes.
    std::map<std::string, std::uint64_t> group_counts;
    for (const auto& [cls, n] : counts) group_counts[meaningful.grouping.at(cls)] += n;
    std::vector<std::uint64_t> targets;
    for (const auto& [_, n] : group_counts) targets.push_back(n);
    const TaskSpec random5 =
        group_task(base_task, random_grouping(base_task, counts, targets, base.seed));

    std::vector<GroupingStudyRow> rows;
    const std::vector<std::pair<std::string, const TaskSpec*>> tasks = {
        {"base25", &base_task}, {"meaningful5", &meaningful}, {"random5", &random5}};
    for (const auto& [task_name, task] : tasks) {
        for (const auto& model : models) {
            for (const auto seed : seeds) {
                ExperimentConfig cfg = base;
                cfg.model = model;
                cfg.view = default_view_for_model(model);
                cfg.seed = seed;
                cfg.task = task_name;
                const TransferOutcome o = transfer_eval(source, target, *task, cfg);
                GroupingStudyRow row;
                row.task = task_name;
                row.model = model;
                row.seed = seed;
                row.same_dataset_accuracy = o.source_test.metrics.accuracy;
                row.transferred_accuracy = o.target.metrics.accuracy;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "model,dataset,task,seed,accuracy,macro_f1,weighted_f1,macro_precision,macro_recall\n";
    for (const auto& r : rows) {
        out << r.model << "," << r.dataset << "," << r.task << "," << r.seed << ","
            << fmt(r.metrics.accuracy) << "," << fmt(r.metrics.macro_f1) << ","
            << fmt(r.metrics.weighted_f1) << "," << fmt(r.metrics.macro_precision) << ","
            << fmt(r.metrics.macro_recall) << "\n";
    }
    return out.str();
}

std::string scatter_csv(const std::vector<ScatterRow>& rows) {
    std::ostringstream out;
    out << "model,seed,val_accuracy,source_test_accuracy,target_accuracy\n";
    for (const auto& r : rows) {
        out << r.model << "," << r.seed << "," << fmt(r.val_accuracy) << ","
            << fmt(r.source_test_accuracy) << "," << fmt(r.target_accuracy) << "\n";
    }
    return out.str();
}

std::string rank_table(const std::vector<ScatterRow>& rows) {
    struct Agg {
        double st = 0.0, tg = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Agg> by_model;
    for (const auto& r : rows) {
        auto& a = by_model[r.model];
        a.st += r.source_test_accuracy;
        a.tg += r.target_accuracy;
        ++a.n;
    }
    std::vector<std::pair<std::string, Agg>> models(by_model.begin(), by_model.end());
    for (auto& [_, a] : models) {
        a.st /= static_cast<double>(a.n);
        a.tg /= static_cast<double>(a.n);
    }
    std::sort(models.begin(), models.end(),
              [](const auto& x, const auto& y) { return x.second.st > y.second.st; });

    std::vector<double> st, tg;
    std::ostringstream out;
    out << "rank,model,source_test_accuracy,target_accuracy\n";
    for (std::size_t i = 0; i < models.size(); ++i) {
        out << (i + 1) << "," << models[i].first << "," << fmt(models[i].second.st) << ","
            << fmt(models[i].second.tg) << "\n";
        st.push_back(models[i].second.st);
        tg.push_back(models[i].second.tg);
    }
    out << "# spearman(source_test, target) = " << fmt(spearman(st, tg)) << "\n";
    return out.str();
}

std::string curves_csv(const TrainResult& result) {
    std::ostringstream out;
    out << "epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (std::size_t e = 0; e < result.curves.size(); ++e) {
        const auto& s = result.curves[e];
        out << e << "," << fmt(s.lr) << "," << fmt(s.train_loss) << "," << fmt(s.train_accuracy)
            << "," << fmt(s.val_loss) << "," << fmt(s.val_accuracy) << "\n";
    }
    return out.str();
}

}  // namespace flowbench

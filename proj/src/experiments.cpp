#include "pixelnet/experiments.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "pixelnet/datagen.hpp"
#include "pixelnet/ops.hpp"
#include "pixelnet/run.hpp"

namespace fs = std::filesystem;

namespace pixelnet {

std::vector<std::string> experiment_names() {
    return {"fc-depth", "fc-width", "diversity", "biased-edge", "multiscale", "gradcheck"};
}

// Shared desk-scale sweep recipe: the full corpus is 200 train images at
// 96x96, so a 400x5 plan sees 2,000 pixels per step over 40 steps per epoch.
// The narrow head keeps a full sweep within a laptop-minutes budget.
RunConfig experiment_base_segmentation() {
    RunConfig cfg = default_run_config(Task::multiclass);
    cfg.epochs = 30;
    cfg.pixels_per_image = 400;
    cfg.images_per_batch = 5;
    cfg.hidden_dim = 64;
    cfg.lr = 1e-2;
    cfg.out_dir.clear();
    return cfg;
}

RunConfig experiment_base_edges() {
    RunConfig cfg = default_run_config(Task::binary_edge);
    cfg.epochs = 25;
    cfg.pixels_per_image = 400;
    cfg.images_per_batch = 5;
    cfg.hidden_dim = 64;
    cfg.out_dir.clear();
    return cfg;
}

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct SweepRunner {
    const Dataset& train;
    const Dataset& test;
    std::ofstream csv;
    std::ostream& progress;
    std::string experiment;

    SweepRunner(const std::string& name, const std::string& out_dir, const Dataset& train_data,
                const Dataset& test_data, std::ostream& prog)
        : train(train_data), test(test_data), progress(prog), experiment(name) {
        fs::create_directories(out_dir);
        const std::string path = out_dir + "/" + name + ".csv";
        csv.open(path);
        if (!csv) throw DataError("cannot open " + path);
        write_metrics_header(csv);
    }

    void run(const std::string& setting, RunConfig cfg, std::uint64_t seed,
             const std::vector<double>& eval_scales = {1.0}) {
        cfg.seed = seed;
        const double t0 = now_ms();
        auto out = train_model(cfg, train, nullptr, false);
        MetricsRow row;
        row.experiment = experiment;
        row.setting = setting;
        row.seed = seed;
        row.task = cfg.task;
        row.split = "test";
        row.scales = scales_label(eval_scales);
        row.epoch = cfg.epochs;
        row.metrics = evaluate_split(out.model, test, eval_scales);
        row.wall_ms = now_ms() - t0;
        write_metrics_row(csv, row);
        csv.flush();
        progress << experiment << " " << setting << " seed=" << seed << ": ";
        if (cfg.task == Task::multiclass) {
            progress << "iu=" << row.metrics.mean_iu << " ac=" << row.metrics.pixel_acc;
        } else if (cfg.task == Task::binary_edge) {
            progress << "best_f=" << row.metrics.best_f << " ois=" << row.metrics.ois_f;
        } else {
            progress << "ang_mean=" << row.metrics.ang.mean_deg;
        }
        progress << " (" << row.wall_ms / 1000.0 << "s)" << std::endl;
    }
};

void run_gradcheck_preset(const std::string& out_dir, std::ostream& progress) {
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/gradcheck.csv");
    csv << "case,coords,max_rel_err,tolerance,passed\n";

    RunConfig cfg;
    cfg.task = Task::multiclass;
    cfg.stages = {{1, 4}, {1, 6}, {1, 8}};
    cfg.pool_after = {true, true, false};
    cfg.taps = {"conv1_1", "conv2_1", "conv3_1"};
    cfg.num_fc = 3;
    cfg.hidden_dim = 16;
    cfg.output_dim = 4;
    cfg.dropout = 0.5;  // eval mode in the harness disables it

    auto model = init_model<double>(cfg.model_config(4), 11);
    Rng prng(23);
    randomize_params(model, prng, 0.1);

    SyntheticScene scene = gen_scene(7, 32, 32, 4);
    BatchItem item;
    item.image = scene.image;
    Rng srng(5);
    item.samples = sample_uniform(scene.h, scene.w, 24, srng);
    attach_labels(item.samples, Task::multiclass, scene.class_map, scene.edge_map,
                  scene.normal_map, scene.h, scene.w);
    std::vector<BatchItem> batch = {item};

    GradCheckOptions options;
    auto report = grad_check(model, batch, options);
    csv << "full_model," << report.coords_checked << "," << report.max_rel_err << ","
        << report.tolerance << "," << (report.passed ? 1 : 0) << "\n";
    progress << "gradcheck full_model: max_rel_err=" << report.max_rel_err
             << " passed=" << report.passed << std::endl;

    detail::linear_weight_grad_scale = 2.0;
    auto canary = grad_check(model, batch, options);
    detail::linear_weight_grad_scale = 1.0;
    csv << "corrupted_canary," << canary.coords_checked << "," << canary.max_rel_err << ","
        << canary.tolerance << "," << (canary.passed ? 1 : 0) << "\n";
    progress << "gradcheck corrupted_canary: max_rel_err=" << canary.max_rel_err
             << " detected=" << (!canary.passed) << std::endl;
    if (report.passed == false || canary.passed == true) {
        throw InternalError("gradient-check preset failed");
    }
}

}  // namespace

void run_experiment(const std::string& name, const std::string& data_dir,
                    const std::string& out_dir, int seeds, std::uint64_t base_seed,
                    std::ostream& progress) {
    bool known = false;
    for (const auto& n : experiment_names()) known = known || n == name;
    if (!known) {
        std::string all;
        for (const auto& n : experiment_names()) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown experiment '" + name + "'; presets: " + all);
    }

    if (name == "gradcheck") {
        run_gradcheck_preset(out_dir, progress);
        return;
    }

    const Dataset train = load_split(data_dir, "train");
    const Dataset test = load_split(data_dir, "test");
    SweepRunner runner(name, out_dir, train, test, progress);

    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
        if (name == "fc-depth") {
            for (int fc : {1, 2, 3}) {
                RunConfig cfg = experiment_base_segmentation();
                cfg.num_fc = fc;
                if (fc == 1) {
                    // linear heads need a far lower rate to stay stable
                    cfg.lr /= 100.0;
                    cfg.schedule.clear();
                }
                runner.run("fc-" + std::to_string(fc), cfg, seed);
            }
        } else if (name == "fc-width") {
            for (int width : {64, 128, 256, 384}) {
                RunConfig cfg = experiment_base_segmentation();
                cfg.hidden_dim = width;
                runner.run("d-" + std::to_string(width), cfg, seed);
            }
        } else if (name == "diversity") {
            // fixed 2,000-pixel budget per step, spread over 5 images vs 1
            for (const auto& [label, n, m] :
                 std::vector<std::tuple<std::string, int, int>>{{"400x5", 400, 5}, {"2000x1", 2000, 1}}) {
                RunConfig cfg = experiment_base_segmentation();
                cfg.pixels_per_image = n;
                cfg.images_per_batch = m;
                runner.run(label, cfg, seed);
            }
        } else if (name == "biased-edge") {
            for (const auto& [label, frac] : std::vector<std::pair<std::string, double>>{
                     {"uniform", -1.0}, {"pos25", 0.25}, {"pos50", 0.5}, {"pos75", 0.75}}) {
                RunConfig cfg = experiment_base_edges();
                if (frac < 0.0) {
                    cfg.strategy = SamplingStrategy::uniform;
                } else {
                    cfg.strategy = SamplingStrategy::biased;
                    cfg.positive_fraction = frac;
                }
                runner.run(label, cfg, seed);
            }
        } else if (name == "multiscale") {
            RunConfig cfg = experiment_base_segmentation();
            cfg.scale_jitter = {0.5, 1.0};
            cfg.seed = seed;
            const double t0 = now_ms();
            auto out = train_model(cfg, train, nullptr, false);
            for (const auto& scales :
                 std::vector<std::vector<double>>{{1.0}, {0.5, 1.0}, {0.25, 0.5, 1.0}}) {
                MetricsRow row;
                row.experiment = name;
                row.setting = "scales-" + scales_label(scales);
                row.seed = seed;
                row.task = cfg.task;
                row.scales = scales_label(scales);
                row.epoch = cfg.epochs;
                row.metrics = evaluate_split(out.model, test, scales);
                row.wall_ms = now_ms() - t0;
                write_metrics_row(runner.csv, row);
                runner.csv.flush();
                runner.progress << name << " " << row.setting << " seed=" << seed
                                << ": iu=" << row.metrics.mean_iu << std::endl;
            }
        }
    }
}

}  // namespace pixelnet

#include "pixelnet/run.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pixelnet/checkpoint.hpp"
#include "pixelnet/io.hpp"

namespace fs = std::filesystem;

namespace pixelnet {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

std::string scales_label(const std::vector<double>& scales) {
    std::ostringstream os;
    for (std::size_t i = 0; i < scales.size(); ++i) os << (i ? "+" : "") << scales[i];
    return os.str();
}

TrainOutput train_model(const RunConfig& cfg, const Dataset& train_data, std::ostream* log_csv,
                        bool write_checkpoints) {
    if (train_data.scenes.empty()) throw DataError("empty training dataset");
    TrainOutput out;
    out.classes = train_data.num_classes;
    out.model = init_model<float>(cfg.model_config(train_data.num_classes), cfg.seed);
    out.optimizer =
        make_optimizer(out.model, cfg.lr_schedule(), cfg.momentum, cfg.weight_decay);

    const BatchPlan plan = cfg.batch_plan();
    Rng root(cfg.seed);
    if (log_csv) write_train_log_header(*log_csv);

    if (write_checkpoints && !cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

    int global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        out.optimizer.epoch = epoch;
        Rng perm_rng = root.child2(0x7065726dULL, static_cast<std::uint64_t>(epoch));
        EpochSampler sampler(static_cast<int>(train_data.scenes.size()), plan.images_per_batch,
                             perm_rng);
        for (int s = 0; s < sampler.steps_per_epoch(); ++s) {
            const double t0 = now_ms();
            Rng step_rng = root.child2(static_cast<std::uint64_t>(epoch) + 1,
                                       static_cast<std::uint64_t>(s));
            int fallbacks = 0;
            auto batch =
                build_batch(train_data, sampler.batch_indices(s), plan, cfg.task, step_rng, &fallbacks);
            out.biased_fallbacks += fallbacks;
            Rng dropout_rng = step_rng.child(0xd70ULL);
            auto step = train_step(out.model, batch, out.optimizer, dropout_rng);
            TrainLogRow row;
            row.epoch = epoch;
            row.step = global_step++;
            row.loss = step.loss;
            row.lr = out.optimizer.current_lr();
            row.wall_ms = now_ms() - t0;
            out.log.push_back(row);
            if (log_csv) write_train_log_row(*log_csv, row);
        }
        if (write_checkpoints && !cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
            save_checkpoint(cfg.out_dir + "/ckpt_epoch_" + std::to_string(epoch + 1) + ".pxc",
                            cfg, out.classes, epoch + 1, out.model, &out.optimizer);
        }
    }
    if (write_checkpoints && !cfg.out_dir.empty()) {
        out.final_checkpoint = cfg.out_dir + "/final.pxc";
        save_checkpoint(out.final_checkpoint, cfg, out.classes, cfg.epochs, out.model,
                        &out.optimizer);
    }
    return out;
}

EvalMetrics evaluate_split(PixelNetModel<float>& model, const Dataset& split,
                           const std::vector<double>& scales, const PredictOptions& options) {
    if (split.scenes.empty()) throw DataError("empty evaluation split");
    EvalMetrics m;
    m.task = model.head.config.task;

    if (m.task == Task::multiclass) {
        ConfusionMatrix cm(split.num_classes);
        for (const auto& scene : split.scenes) {
            auto pred = predict_multiscale(model, scene.image, scales, options);
            auto cls = argmax_class_map(pred.values);
            cm.merge(confusion_from_maps(scene.class_map, cls, split.num_classes));
        }
        m.pixel_acc = pixel_accuracy(cm);
        m.mean_iu = mean_iu(cm);
    } else if (m.task == Task::binary_edge) {
        std::vector<std::vector<float>> probs;
        std::vector<std::vector<std::uint8_t>> gts;
        for (const auto& scene : split.scenes) {
            auto pred = predict_multiscale(model, scene.image, scales, options);
            probs.emplace_back(pred.values.vec());
            gts.push_back(scene.edge_map);
        }
        auto pr = edge_pr(probs, gts, edge_threshold_grid());
        m.best_f = pr.best_f;
        m.best_threshold = pr.best_threshold;
        m.ois_f = pr.per_image_best_f;
    } else {
        std::vector<Tensor<float>> preds, gts;
        for (const auto& scene : split.scenes) {
            auto pred = predict_multiscale(model, scene.image, scales, options);
            preds.push_back(std::move(pred.values));
            gts.push_back(scene.normal_map);
        }
        m.ang = angular_stats_pooled(preds, gts);
    }
    return m;
}

void write_metrics_header(std::ostream& os) {
    os << "experiment,setting,seed,task,split,scales,epoch,wall_ms,pixel_acc,mean_iu,best_f,"
          "best_threshold,ois_f,ang_mean,ang_median,ang_rmse,ang_11_25,ang_22_5,ang_30\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
    os << row.experiment << "," << row.setting << "," << row.seed << "," << task_name(row.task)
       << "," << row.split << "," << row.scales << "," << row.epoch << "," << num(row.wall_ms)
       << ",";
    const EvalMetrics& m = row.metrics;
    if (row.task == Task::multiclass) {
        os << num(m.pixel_acc) << "," << num(m.mean_iu) << ",,,,,,,,,\n";
    } else if (row.task == Task::binary_edge) {
        os << ",," << num(m.best_f) << "," << num(m.best_threshold) << "," << num(m.ois_f)
           << ",,,,,,\n";
    } else {
        os << ",,,,," << num(m.ang.mean_deg) << "," << num(m.ang.median_deg) << ","
           << num(m.ang.rmse_deg) << "," << num(m.ang.frac_11_25) << "," << num(m.ang.frac_22_5)
           << "," << num(m.ang.frac_30) << "\n";
    }
}

void write_train_log_header(std::ostream& os) { os << "epoch,step,loss,lr,wall_ms\n"; }

void write_train_log_row(std::ostream& os, const TrainLogRow& row) {
    os << row.epoch << "," << row.step << "," << num(row.loss) << "," << num(row.lr) << ","
       << num(row.wall_ms) << "\n";
}

void dump_prediction(const std::string& stem, Task task, const PredictionMap<float>& pred) {
    if (task == Task::multiclass) {
        auto cls = argmax_class_map(pred.values);
        std::vector<std::uint8_t> bytes(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i) bytes[i] = static_cast<std::uint8_t>(cls[i]);
        write_pgm(stem + ".cls.pgm", bytes, pred.values.dim(1), pred.values.dim(2));
    }
    write_pxt(stem + ".pxt", pred.values);
}

}  // namespace pixelnet

// Command-line surface: corpus generation, training, evaluation, resource
// benchmarking, and the scripted trend experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pixelnet/checkpoint.hpp"
#include "pixelnet/config.hpp"
#include "pixelnet/datagen.hpp"
#include "pixelnet/experiments.hpp"
#include "pixelnet/instrumentation.hpp"
#include "pixelnet/run.hpp"

namespace fs = std::filesystem;
using namespace pixelnet;

namespace {

SplitCounts parse_counts(const std::string& text) {
    SplitCounts counts;
    if (std::sscanf(text.c_str(), "%d,%d,%d", &counts.train, &counts.val, &counts.test) != 3) {
        throw ConfigError("--counts must be train,val,test (e.g. 200,50,50)");
    }
    return counts;
}

std::vector<double> parse_scales(const std::string& text) {
    std::vector<double> scales;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) scales.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (scales.empty()) throw ConfigError("--scales must list at least one scale");
    return scales;
}

int cmd_gen(const std::string& out, std::uint64_t seed, const std::string& counts, int size,
            int classes) {
    SplitSpec spec;
    spec.seed = seed;
    spec.counts = parse_counts(counts);
    spec.height = size;
    spec.width = size;
    spec.num_classes = classes;
    write_corpus(out, spec);
    std::cerr << "wrote " << spec.counts.train + spec.counts.val + spec.counts.test
              << " scenes to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    FlatConfig flat = parse_flat_config_file(config_path);
    for (const auto& kv : overrides) apply_override(flat, kv);
    RunConfig cfg = run_config_from_flat(flat);
    if (cfg.data_dir.empty()) throw ConfigError("config must set data.dir");
    Dataset train_data = load_split(cfg.data_dir, "train");

    fs::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir + "/train_log.csv");
    if (!log) throw DataError("cannot write " + cfg.out_dir + "/train_log.csv");
    auto out = train_model(cfg, train_data, &log);
    std::cerr << "trained " << cfg.epochs << " epochs; final loss " << out.log.back().loss
              << "; checkpoint " << out.final_checkpoint << "\n";
    if (out.biased_fallbacks > 0) {
        std::cerr << "note: " << out.biased_fallbacks
                  << " image draws had no positives; fell back to uniform sampling\n";
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split, const std::string& scales_text,
             const std::string& data_dir, const std::string& out_csv, const std::string& dump_dir,
             const std::string& expect_task) {
    auto ckpt = load_checkpoint<float>(ckpt_path);
    if (!expect_task.empty() && expect_task != task_name(ckpt.run.task)) {
        throw ConfigError("checkpoint task is " + std::string(task_name(ckpt.run.task)) +
                          ", not " + expect_task);
    }
    const std::string dir = data_dir.empty() ? ckpt.run.data_dir : data_dir;
    Dataset data = load_split(dir, split);
    if (ckpt.run.task == Task::multiclass && data.num_classes != ckpt.classes) {
        throw DataError("checkpoint was trained for " + std::to_string(ckpt.classes) +
                        " classes but the corpus has " + std::to_string(data.num_classes));
    }
    const std::vector<double> scales = parse_scales(scales_text);

    MetricsRow row;
    row.experiment = "eval";
    row.setting = fs::path(ckpt_path).stem().string();
    row.seed = ckpt.run.seed;
    row.task = ckpt.run.task;
    row.split = split;
    row.scales = scales_label(scales);
    row.epoch = ckpt.epoch;
    row.metrics = evaluate_split(ckpt.model, data, scales);

    if (out_csv.empty()) {
        write_metrics_header(std::cout);
        write_metrics_row(std::cout, row);
    } else {
        const bool fresh = !fs::exists(out_csv);
        std::ofstream f(out_csv, std::ios::app);
        if (!f) throw DataError("cannot write " + out_csv);
        if (fresh) write_metrics_header(f);
        write_metrics_row(f, row);
    }

    if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        for (std::size_t i = 0; i < data.scenes.size(); ++i) {
            auto pred = predict_multiscale(ckpt.model, data.scenes[i].image, scales);
            char stem[64];
            std::snprintf(stem, sizeof(stem), "%s/pred_%05d", dump_dir.c_str(),
                          static_cast<int>(i));
            dump_prediction(stem, ckpt.run.task, pred);
        }
    }
    return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& overrides,
              int steps, const std::string& out_csv) {
    FlatConfig flat = parse_flat_config_file(config_path);
    for (const auto& kv : overrides) apply_override(flat, kv);
    RunConfig cfg = run_config_from_flat(flat);

    // a small in-memory corpus is enough for throughput measurement
    SplitSpec spec;
    spec.seed = cfg.seed;
    spec.counts = {8, 1, 1};
    spec.num_classes = 6;
    Dataset data = gen_split(spec, "train");

    ModelConfig mc = cfg.model_config(data.num_classes);
    ResourceReport report =
        account_memory(mc, spec.height, spec.width, cfg.pixels_per_image);
    auto model = init_model<float>(mc, cfg.seed);
    BatchPlan plan = cfg.batch_plan();
    report.batches_per_second = measure_throughput_sparse(model, data, plan, steps);
    if (cfg.task != Task::normals) {
        report.dense_batches_per_second =
            measure_throughput_dense(model, data, plan.images_per_batch, steps);
    }

    std::cout << report.to_text();
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        if (!f) throw DataError("cannot write " + out_csv);
        f << ResourceReport::csv_header() << "\n";
        report.write_csv_row(f);
    }
    return 0;
}

int cmd_experiment(const std::string& name, const std::string& data_dir, const std::string& out_dir,
                   int seeds, std::uint64_t base_seed) {
    run_experiment(name, data_dir, out_dir, seeds, base_seed, std::cerr);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse hypercolumn pixel prediction"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate the synthetic corpus");
    std::string gen_out = "data/corpus";
    std::uint64_t gen_seed = 0;
    std::string gen_counts = "200,50,50";
    int gen_size = 96, gen_classes = 6;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gen_seed, "corpus seed");
    gen->add_option("--counts", gen_counts, "train,val,test scene counts");
    gen->add_option("--size", gen_size, "scene height and width");
    gen->add_option("--classes", gen_classes, "number of classes incl. background");

    auto* train = app.add_subcommand("train", "train a model from a config file");
    std::string train_config;
    std::vector<std::string> train_overrides;
    train->add_option("--config", train_config, "run config file")->required();
    train->add_option("--override", train_overrides, "key=value config override");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_ckpt, eval_split = "test", eval_scales = "1.0", eval_data, eval_out,
                eval_dump, eval_task;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--split", eval_split, "train|val|test");
    eval->add_option("--scales", eval_scales, "comma list of test scales");
    eval->add_option("--data", eval_data, "corpus dir (default: from checkpoint)");
    eval->add_option("--out", eval_out, "append the metrics row to this CSV");
    eval->add_option("--dump-predictions", eval_dump, "write per-image prediction files here");
    eval->add_option("--task", eval_task, "fail unless the checkpoint has this task");

    auto* bench = app.add_subcommand("bench", "memory accounting and sparse-vs-dense throughput");
    std::string bench_config, bench_out;
    std::vector<std::string> bench_overrides;
    int bench_steps = 10;
    bench->add_option("--config", bench_config, "run config file")->required();
    bench->add_option("--override", bench_overrides, "key=value config override");
    bench->add_option("--steps", bench_steps, "measured steps (after 3 warmup)");
    bench->add_option("--out", bench_out, "also write the report as CSV");

    auto* experiment = app.add_subcommand("experiment", "run a scripted trend experiment");
    std::string exp_name, exp_data = "data/corpus", exp_out = "runs/experiments";
    int exp_seeds = 5;
    std::uint64_t exp_base_seed = 1000;
    experiment->add_option("--name", exp_name, "preset name")->required();
    experiment->add_option("--data", exp_data, "corpus dir");
    experiment->add_option("--out", exp_out, "output dir for sweep CSVs");
    experiment->add_option("--seeds", exp_seeds, "number of seeds");
    experiment->add_option("--base-seed", exp_base_seed, "first seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_out, gen_seed, gen_counts, gen_size, gen_classes);
        if (train->parsed()) return cmd_train(train_config, train_overrides);
        if (eval->parsed()) {
            return cmd_eval(eval_ckpt, eval_split, eval_scales, eval_data, eval_out, eval_dump,
                            eval_task);
        }
        if (bench->parsed()) return cmd_bench(bench_config, bench_overrides, bench_steps, bench_out);
        if (experiment->parsed()) {
            return cmd_experiment(exp_name, exp_data, exp_out, exp_seeds, exp_base_seed);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

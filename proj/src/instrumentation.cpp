#include "pixelnet/instrumentation.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace pixelnet {

std::string ResourceReport::to_text() const {
    std::ostringstream os;
    os << "hypercolumn dim D            : " << hypercolumn_dim << "\n"
       << "input                        : " << input_h << "x" << input_w << "\n"
       << "samples per image N          : " << n_samples << "\n"
       << "fc layers                    : " << num_fc << "\n"
       << "sparse hypercolumn bytes     : " << hypercolumn_bytes_sparse << "\n"
       << "dense hypercolumn bytes      : " << hypercolumn_bytes_dense << "\n"
       << "dense/sparse ratio           : " << dense_sparse_ratio << "\n"
       << "masked-after-grid ratio      : " << masked_after_grid_ratio << "\n"
       << "peak activation bytes (step) : " << peak_activation_bytes << "\n"
       << "model bytes                  : " << model_bytes << "\n"
       << "optimizer bytes              : " << optimizer_bytes << "\n";
    if (batches_per_second > 0.0) {
        os << "sparse-path BPS              : " << batches_per_second << "\n";
    }
    if (dense_batches_per_second > 0.0) {
        os << "dense-path BPS               : " << dense_batches_per_second << "\n";
    }
    return os.str();
}

const char* ResourceReport::csv_header() {
    return "d,input_h,input_w,n_samples,num_fc,sparse_bytes,dense_bytes,ratio,masked_ratio,"
           "activation_bytes,model_bytes,optimizer_bytes,bps_sparse,bps_dense";
}

void ResourceReport::write_csv_row(std::ostream& os) const {
    os << hypercolumn_dim << "," << input_h << "," << input_w << "," << n_samples << "," << num_fc
       << "," << hypercolumn_bytes_sparse << "," << hypercolumn_bytes_dense << ","
       << dense_sparse_ratio << "," << masked_after_grid_ratio << "," << peak_activation_bytes
       << "," << model_bytes << "," << optimizer_bytes << "," << batches_per_second << ","
       << dense_batches_per_second << "\n";
}

ResourceReport account_memory(const ModelConfig& config, int input_h, int input_w, int n_samples,
                              double grid_retained_share) {
    config.validate();
    if (n_samples < 1 || input_h < 1 || input_w < 1) {
        throw ConfigError("account_memory needs positive input size and sample count");
    }
    constexpr std::int64_t dtype_bytes = 4;  // training dtype

    ResourceReport report;
    report.hypercolumn_dim = config.hypercolumn_dim();
    report.n_samples = n_samples;
    report.input_h = input_h;
    report.input_w = input_w;
    report.num_fc = config.head.num_fc;

    const std::int64_t d = report.hypercolumn_dim;
    const std::int64_t pixels = static_cast<std::int64_t>(input_h) * input_w;
    report.hypercolumn_bytes_sparse = static_cast<std::int64_t>(n_samples) * d * dtype_bytes;
    report.hypercolumn_bytes_dense = pixels * d * dtype_bytes;
    report.dense_sparse_ratio = static_cast<double>(pixels) / static_cast<double>(n_samples);
    report.masked_after_grid_ratio = report.dense_sparse_ratio * grid_retained_share;

    PixelNetModel<float> model = init_model<float>(config, 1);
    for (const auto& ref : param_refs(model)) report.model_bytes += ref.tensor->bytes();
    report.optimizer_bytes = report.model_bytes;  // one velocity buffer per parameter

    // Activation ledger from one sparse-path training step on a synthetic
    // image: every tape value slot, parameters excluded.
    StepBatch<float> sb;
    sb.images.push_back(Tensor<float>({3, input_h, input_w}));
    PixelSampleSet set;
    const int k = config.head.output_dim;
    for (int i = 0; i < n_samples; ++i) {
        set.coords.push_back({i % input_h, (i * 7) % input_w});
        set.class_labels.push_back(i % k);
        set.edge_labels.push_back(static_cast<std::uint8_t>(i % 2));
        set.normal_labels.push_back({0.0f, 0.0f, 1.0f});
    }
    set.weights.assign(static_cast<std::size_t>(n_samples), 1.0f);
    sb.samples.push_back(std::move(set));

    Tape<float> tape;
    Rng rng(0);
    auto fwd = forward_loss(tape, model, sb, false, rng);
    (void)fwd;
    report.peak_activation_bytes = tape.value_bytes() - report.model_bytes;
    return report;
}

namespace {

template <typename StepFn>
double median_step_seconds(int n_steps, StepFn&& step) {
    const int warmup = 3;
    std::vector<double> times;
    for (int i = 0; i < n_steps + warmup; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        step(i);
        const auto t1 = std::chrono::steady_clock::now();
        if (i >= warmup) {
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace

double measure_throughput_sparse(PixelNetModel<float>& model, const Dataset& data,
                                 const BatchPlan& plan, int n_steps) {
    if (n_steps < 1) throw ConfigError("measure_throughput needs n_steps >= 1");
    Rng rng(plan.seed);
    const Task task = model.head.config.task;
    const double median = median_step_seconds(n_steps, [&](int i) {
        std::vector<int> ids;
        for (int m = 0; m < plan.images_per_batch; ++m) {
            ids.push_back((i * plan.images_per_batch + m) % static_cast<int>(data.scenes.size()));
        }
        Rng step_rng = rng.child(static_cast<std::uint64_t>(i));
        auto batch = build_batch(data, ids, plan, task, step_rng);
        auto sb = to_step_batch<float>(batch);
        Tape<float> tape;
        Rng drop = step_rng.child(0xd0);
        auto fwd = forward_loss(tape, model, sb, true, drop);
        tape.backward(fwd.loss);
    });
    return 1.0 / median;
}

double measure_throughput_dense(PixelNetModel<float>& model, const Dataset& data,
                                int images_per_batch, int n_steps) {
    if (n_steps < 1) throw ConfigError("measure_throughput needs n_steps >= 1");
    const Task task = model.head.config.task;
    const double median = median_step_seconds(n_steps, [&](int i) {
        Tape<float> tape;
        auto bound = bind_model(tape, model);
        Rng drop(0);
        std::vector<NodePtr<float>> all_rows;
        std::vector<const SyntheticScene*> scenes;
        for (int m = 0; m < images_per_batch; ++m) {
            const auto& scene =
                data.scenes[static_cast<std::size_t>((i * images_per_batch + m) % data.scenes.size())];
            scenes.push_back(&scene);
            auto img = tape.constant(scene.image, "image");
            auto pyramid = model_pyramid(tape, model, bound, img);
            auto grid = dense_hypercolumn_grid(tape, pyramid);
            auto flat = reshape(tape, grid, {grid->value.dim(0), scene.h * scene.w});
            all_rows.push_back(transpose2d(tape, flat));
        }
        auto rows = all_rows.size() == 1 ? all_rows[0] : concat_rows(tape, all_rows);
        auto logits = model_head(tape, model, bound, rows, true, drop);
        NodePtr<float> loss;
        if (task == Task::multiclass) {
            std::vector<int> labels;
            for (const auto* s : scenes) labels.insert(labels.end(), s->class_map.begin(), s->class_map.end());
            loss = softmax_xent(tape, logits, labels);
        } else if (task == Task::binary_edge) {
            std::vector<std::uint8_t> labels;
            for (const auto* s : scenes) labels.insert(labels.end(), s->edge_map.begin(), s->edge_map.end());
            loss = balanced_sigmoid_xent(tape, logits, labels);
        } else {
            throw ConfigError("dense throughput baseline supports segmentation and edges");
        }
        tape.backward(loss);
    });
    return 1.0 / median;
}

}  // namespace pixelnet

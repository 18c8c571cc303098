#include <doctest.h>

#include <filesystem>

#include "pixelnet/checkpoint.hpp"
#include "pixelnet/datagen.hpp"
#include "pixelnet/inference.hpp"
#include "pixelnet/trainer.hpp"
#include "test_util.hpp"

using namespace pixelnet;
using namespace pixelnet::testing;

TEST_CASE("lr_at piecewise-constant lookup") {
    LrSchedule s;
    s.points = {{0, 1e-3}, {8, 1e-4}, {16, 1e-5}};
    CHECK(lr_at(s, 0) == 1e-3);
    CHECK(lr_at(s, 7) == 1e-3);
    CHECK(lr_at(s, 8) == 1e-4);
    CHECK(lr_at(s, 15) == 1e-4);
    CHECK(lr_at(s, 16) == 1e-5);
    CHECK(lr_at(s, 99) == 1e-5);

    LrSchedule single;
    single.points = {{0, 0.5}};
    CHECK(lr_at(single, 3) == 0.5);

    LrSchedule edge;
    edge.points = {{0, 1e-3}, {15, 1e-4}, {20, 1e-5}};
    CHECK(lr_at(edge, 14) == 1e-3);
    CHECK(lr_at(edge, 15) == 1e-4);
    CHECK(lr_at(edge, 20) == 1e-5);

    LrSchedule bad;
    bad.points = {{5, 1.0}, {5, 0.1}};
    CHECK_THROWS_AS(lr_at(bad, 0), ConfigError);
    CHECK_THROWS_AS(lr_at(LrSchedule{}, 0), ConfigError);
}

namespace {

// Builds a one-parameter "model" by abusing the optimizer directly.
struct TinySgd {
    Tensor<double> theta;
    Tensor<double> velocity;
    double momentum, lr, wd;

    void step(const Tensor<double>& grad) {
        for (std::int64_t i = 0; i < theta.size(); ++i) {
            velocity[i] = momentum * velocity[i] - lr * (grad[i] + wd * theta[i]);
            theta[i] += velocity[i];
        }
    }
};

}  // namespace

TEST_CASE("sgd_step hand examples") {
    // momentum 0, wd 0, lr 1, g = [1] decreases theta by exactly 1
    TinySgd a{Tensor<double>({1}, {2.0}), Tensor<double>({1}), 0.0, 1.0, 0.0};
    a.step(Tensor<double>({1}, {1.0}));
    CHECK(a.theta[0] == 1.0);

    // two steps, momentum 0.9, lr 0.1, constant g=1: -0.1 then -0.29
    TinySgd b{Tensor<double>({1}), Tensor<double>({1}), 0.9, 0.1, 0.0};
    b.step(Tensor<double>({1}, {1.0}));
    CHECK(b.theta[0] == doctest::Approx(-0.1).epsilon(1e-12));
    b.step(Tensor<double>({1}, {1.0}));
    CHECK(b.theta[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("sgd on a 2-D convex quadratic reaches the analytic minimizer") {
    // f(x) = 0.5 x^T A x - b^T x with SPD A; minimizer x* = A^{-1} b
    const double a11 = 3.0, a12 = 0.7, a22 = 1.5;
    const double b1 = 1.0, b2 = -2.0;
    const double det = a11 * a22 - a12 * a12;
    const double x1s = (a22 * b1 - a12 * b2) / det;
    const double x2s = (-a12 * b1 + a11 * b2) / det;

    TinySgd opt{Tensor<double>({2}), Tensor<double>({2}), 0.9, 0.05, 0.0};
    for (int i = 0; i < 2000; ++i) {
        Tensor<double> g({2});
        g[0] = a11 * opt.theta[0] + a12 * opt.theta[1] - b1;
        g[1] = a12 * opt.theta[0] + a22 * opt.theta[1] - b2;
        opt.step(g);
    }
    CHECK(std::abs(opt.theta[0] - x1s) < 1e-6);
    CHECK(std::abs(opt.theta[1] - x2s) < 1e-6);
}

namespace {

RunConfig tiny_run_config() {
    RunConfig cfg;
    cfg.task = Task::multiclass;
    cfg.stages = {{1, 4}, {1, 6}};
    cfg.pool_after = {true, false};
    cfg.taps = {"conv1_1", "conv2_1"};
    cfg.num_fc = 3;
    cfg.hidden_dim = 12;
    cfg.dropout = 0.5;
    cfg.epochs = 2;
    cfg.images_per_batch = 2;
    cfg.pixels_per_image = 30;
    cfg.lr = 1e-2;
    cfg.out_dir.clear();
    return cfg;
}

std::vector<BatchItem> tiny_batch(Task task, int n_pixels, int n_images) {
    std::vector<BatchItem> batch;
    for (int i = 0; i < n_images; ++i) {
        auto scene = gen_scene(100 + static_cast<std::uint64_t>(i), 32, 32, 4);
        BatchItem item;
        item.image = scene.image;
        Rng rng(7 + static_cast<std::uint64_t>(i));
        item.samples = sample_uniform(scene.h, scene.w, n_pixels, rng);
        attach_labels(item.samples, task, scene.class_map, scene.edge_map, scene.normal_map,
                      scene.h, scene.w);
        batch.push_back(std::move(item));
    }
    return batch;
}

PixelNetModel<double> tiny_f64_model(Task task, int k) {
    RunConfig cfg = tiny_run_config();
    cfg.task = task;
    auto model = init_model<double>(cfg.model_config(k), 3);
    Rng rng(5);
    randomize_params(model, rng, 0.1);
    return model;
}

}  // namespace

TEST_CASE("sgd_step aborts on non-finite gradients naming the parameter") {
    auto model = tiny_f64_model(Task::multiclass, 4);
    auto opt = make_optimizer(model, LrSchedule{{{0, 0.1}}}, 0.9, 0.0);
    Tape<double> tape;
    auto bound = bind_model(tape, model);
    bound.all[0]->grad[0] = std::numeric_limits<double>::quiet_NaN();
    auto refs = param_refs(model);
    CHECK_THROWS_WITH_AS(sgd_step(refs, bound.all, opt), doctest::Contains("conv1_1"),
                         InternalError);
}

TEST_CASE("linear case: finite differences are exact up to rounding (1e-8)") {
    // loss = <u, W x + b> is linear in W, b, and x, so central differences
    // carry no truncation term at all
    Rng rng(5);
    Tensor<double> x = random_tensor<double>({6, 10}, rng);
    Tensor<double> w = random_tensor<double>({4, 10}, rng);
    Tensor<double> b = random_tensor<double>({4}, rng);
    Tensor<double> u = random_tensor<double>({6, 4}, rng);

    Tape<double> tape;
    auto xn = tape.leaf(x);
    auto wn = tape.leaf(w);
    auto bn = tape.leaf(b);
    auto y = linear(tape, xn, wn, bn);
    auto weighted = mul(tape, y, tape.constant(u));
    auto loss = reduce_sum(tape, weighted);
    tape.backward(loss);

    auto loss_at = [&]() {
        Tape<double> t(false);
        auto o = linear(t, t.leaf(x), t.leaf(w), t.leaf(b));
        double s = 0.0;
        for (std::int64_t i = 0; i < o->value.size(); ++i) s += o->value[i] * u[i];
        return s;
    };
    auto fdw = finite_diff_grad<double>(w, loss_at, 1e-4);
    auto fdb = finite_diff_grad<double>(b, loss_at, 1e-4);
    auto fdx = finite_diff_grad<double>(x, loss_at, 1e-4);
    CHECK(max_rel_err(wn->grad, fdw, 1e-3) < 1e-8);
    CHECK(max_rel_err(bn->grad, fdb, 1e-3) < 1e-8);
    CHECK(max_rel_err(xn->grad, fdx, 1e-3) < 1e-8);
}

TEST_CASE("grad_check: fc-1 model passes the harness") {
    RunConfig cfg = tiny_run_config();
    cfg.num_fc = 1;
    auto model = init_model<double>(cfg.model_config(4), 3);
    Rng rng(5);
    randomize_params(model, rng, 0.1);
    auto batch = tiny_batch(Task::multiclass, 16, 1);
    auto report = grad_check(model, batch, {});
    INFO(report.worst_coordinate, " rel_err=", report.max_rel_err);
    CHECK(report.passed);
    CHECK(report.coords_checked >= 200);
}

TEST_CASE("grad_check: full fc-3 model with the sampling layer passes at 1e-4") {
    auto model = tiny_f64_model(Task::multiclass, 4);
    auto batch = tiny_batch(Task::multiclass, 24, 1);
    auto report = grad_check(model, batch, {});
    INFO(report.worst_coordinate, " rel_err=", report.max_rel_err);
    CHECK(report.passed);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("grad_check passes for the edge and normals losses") {
    {
        auto model = tiny_f64_model(Task::binary_edge, 1);
        auto batch = tiny_batch(Task::binary_edge, 24, 1);
        auto report = grad_check(model, batch, {});
        INFO(report.worst_coordinate, " rel_err=", report.max_rel_err);
        CHECK(report.passed);
    }
    {
        auto model = tiny_f64_model(Task::normals, 3);
        auto batch = tiny_batch(Task::normals, 24, 1);
        auto report = grad_check(model, batch, {});
        INFO(report.worst_coordinate, " rel_err=", report.max_rel_err);
        CHECK(report.passed);
    }
}

TEST_CASE("grad_check detects a corrupted backward rule (x2 weight gradient)") {
    auto model = tiny_f64_model(Task::multiclass, 4);
    auto batch = tiny_batch(Task::multiclass, 24, 1);
    detail::linear_weight_grad_scale = 2.0;
    auto report = grad_check(model, batch, {});
    detail::linear_weight_grad_scale = 1.0;
    CHECK(!report.passed);
    CHECK(report.max_rel_err > 0.1);
}

TEST_CASE("checkpoint round-trip: identical forward outputs bit-for-bit") {
    const std::string dir = std::string(PIXELNET_TEST_WORK_DIR) + "/ckpt";
    std::filesystem::create_directories(dir);
    RunConfig cfg = tiny_run_config();
    cfg.data_dir = "unused";

    auto model = init_model<float>(cfg.model_config(4), 9);
    auto opt = make_optimizer(model, cfg.lr_schedule(), cfg.momentum, cfg.weight_decay);

    // a couple of training steps so velocities are non-trivial
    auto batch = tiny_batch(Task::multiclass, 20, 2);
    Rng drop(3);
    train_step(model, batch, opt, drop);
    train_step(model, batch, opt, drop);

    const std::string path = dir + "/rt.pxc";
    save_checkpoint(path, cfg, 4, 2, model, &opt);
    auto loaded = load_checkpoint<float>(path);
    CHECK(loaded.classes == 4);
    CHECK(loaded.epoch == 2);
    REQUIRE(loaded.optimizer.has_value());
    CHECK(loaded.optimizer->step == opt.step);

    auto scene = gen_scene(55, 32, 32, 4);
    auto p1 = predict_dense(model, scene.image);
    auto p2 = predict_dense(loaded.model, scene.image);
    CHECK(max_abs_diff(p1.values, p2.values) == 0.0);

    // velocities round-trip exactly too
    for (const auto& [name, v] : opt.velocity) {
        CHECK(max_abs_diff(v, loaded.optimizer->velocity.at(name)) == 0.0);
    }
}

TEST_CASE("train_step reduces to finite loss and updates parameters") {
    RunConfig cfg = tiny_run_config();
    auto model = init_model<float>(cfg.model_config(4), 21);
    auto opt = make_optimizer(model, cfg.lr_schedule(), cfg.momentum, cfg.weight_decay);
    auto batch = tiny_batch(Task::multiclass, 30, 2);
    auto before = model.head.biases.back();
    Rng drop(1);
    auto res = train_step(model, batch, opt, drop);
    CHECK(std::isfinite(res.loss));
    CHECK(res.hypercolumn_bytes == 2 * 30 * (4 + 6) * 4);
    CHECK(max_abs_diff(before, model.head.biases.back()) > 0.0);
    CHECK(opt.step == 1);
}

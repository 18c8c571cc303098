#include <doctest.h>

#include "pixelnet/config.hpp"
#include "pixelnet/datagen.hpp"
#include "pixelnet/inference.hpp"
#include "pixelnet/trainer.hpp"
#include "test_util.hpp"

using namespace pixelnet;
using namespace pixelnet::testing;

namespace {

ModelConfig small_config(Task task, int k) {
    RunConfig cfg;
    cfg.task = task;
    cfg.stages = {{1, 4}, {1, 8}, {1, 8}};
    cfg.pool_after = {true, true, false};
    cfg.taps = {"conv1_1", "conv2_1", "conv3_1"};
    cfg.num_fc = 3;
    cfg.hidden_dim = 16;
    return cfg.model_config(k);
}

PixelNetModel<float> small_model(Task task, int k, std::uint64_t seed) {
    auto model = init_model<float>(small_config(task, k), seed);
    Rng rng(seed + 1);
    randomize_params(model, rng, 0.15);
    return model;
}

}  // namespace

TEST_CASE("predict_dense output matches input size, probabilities normalized") {
    auto model = small_model(Task::multiclass, 5, 3);
    auto scene = gen_scene(2, 40, 56, 5);
    auto pred = predict_dense(model, scene.image);
    CHECK(pred.values.shape() == std::vector<int>{5, 40, 56});
    const std::int64_t pix = 40 * 56;
    for (std::int64_t p = 0; p < pix; ++p) {
        double sum = 0.0;
        for (int k = 0; k < 5; ++k) sum += pred.values[k * pix + p];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("dense and sparse paths agree through the full head at 500 pixels") {
    auto model = small_model(Task::multiclass, 4, 7);
    auto scene = gen_scene(3, 48, 48, 4);
    auto pred = predict_dense(model, scene.image);

    // sparse path: extract hypercolumns at random pixels and run the head
    Rng prng(9);
    std::vector<PixelCoord> pixels;
    for (int i = 0; i < 500; ++i) pixels.push_back({prng.uniform_int(48), prng.uniform_int(48)});

    Tape<float> tape(false);
    auto bound = bind_model(tape, model);
    auto img = tape.constant(scene.image);
    auto pyramid = model_pyramid(tape, model, bound, img);
    auto hyper = extract_hypercolumns(tape, pyramid, pixels);
    Rng dummy(0);
    auto logits = model_head(tape, model, bound, hyper.features, false, dummy);
    Tensor<float> probs({500, 4});
    softmax_rows(logits->value, probs);

    const std::int64_t pix = 48 * 48;
    double worst = 0.0;
    for (int j = 0; j < 500; ++j) {
        for (int k = 0; k < 4; ++k) {
            const double dense = pred.values[k * pix + pixels[static_cast<std::size_t>(j)].row * 48 +
                                             pixels[static_cast<std::size_t>(j)].col];
            worst = std::max(worst, std::abs(dense - double(probs.at(j, k))));
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("tiled fallback is bit-identical to the in-budget dense path") {
    auto model = small_model(Task::multiclass, 4, 11);
    auto scene = gen_scene(5, 40, 40, 4);
    auto full = predict_dense(model, scene.image);
    PredictOptions tiny_budget;
    tiny_budget.memory_budget_bytes = 1024;  // forces tiling
    tiny_budget.tile_pixels = 333;           // odd tile size on purpose
    auto tiled = predict_dense(model, scene.image, tiny_budget);
    CHECK(max_abs_diff(full.values, tiled.values) == 0.0);
}

TEST_CASE("constant input gives near-constant interior predictions") {
    auto model = small_model(Task::multiclass, 4, 13);
    auto image = Tensor<float>::full({3, 48, 48}, 0.5f);
    auto pred = predict_dense(model, image);
    const std::int64_t pix = 48 * 48;
    // compare interior pixels, away from padding effects
    const int margin = 12;
    for (int k = 0; k < 4; ++k) {
        const float ref = pred.values[k * pix + 24 * 48 + 24];
        for (int y = margin; y < 48 - margin; ++y) {
            for (int x = margin; x < 48 - margin; ++x) {
                CHECK(pred.values[k * pix + y * 48 + x] == doctest::Approx(ref).epsilon(1e-3));
            }
        }
    }
}

TEST_CASE("predict_multiscale with scales {1.0} equals predict_dense bitwise") {
    auto model = small_model(Task::multiclass, 5, 17);
    auto scene = gen_scene(7, 48, 48, 5);
    auto dense = predict_dense(model, scene.image);
    auto multi = predict_multiscale(model, scene.image, {1.0});
    CHECK(max_abs_diff(dense.values, multi.values) == 0.0);
}

TEST_CASE("predict_multiscale presets run and stay normalized") {
    auto model = small_model(Task::multiclass, 4, 19);
    auto scene = gen_scene(11, 48, 48, 4);
    auto multi = predict_multiscale(model, scene.image, {0.25, 0.5, 1.0});
    CHECK(multi.values.shape() == std::vector<int>{4, 48, 48});
    const std::int64_t pix = 48 * 48;
    for (std::int64_t p = 0; p < pix; ++p) {
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) sum += multi.values[k * pix + p];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
    CHECK_THROWS_AS(predict_multiscale(model, scene.image, {}), ConfigError);
    CHECK_THROWS_AS(predict_multiscale(model, scene.image, {-0.5}), ConfigError);
}

TEST_CASE("averaging two identical scale maps returns the same map") {
    // scales {1.0, 1.0} averages the same prediction twice; after
    // renormalization the probabilities match the single-scale map closely
    auto model = small_model(Task::multiclass, 4, 23);
    auto scene = gen_scene(13, 40, 40, 4);
    auto once = predict_dense(model, scene.image);
    auto twice = predict_multiscale(model, scene.image, {1.0, 1.0});
    CHECK(max_abs_diff(once.values, twice.values) < 1e-6);
}

TEST_CASE("normals predictions are unit length after normalization") {
    auto model = small_model(Task::normals, 3, 29);
    auto scene = gen_scene(17, 40, 40, 4);
    auto pred = predict_dense(model, scene.image);
    const std::int64_t pix = 40 * 40;
    for (std::int64_t p = 0; p < pix; ++p) {
        double n = 0.0;
        for (int k = 0; k < 3; ++k) n += double(pred.values[k * pix + p]) * pred.values[k * pix + p];
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("edge predictions are probabilities in [0,1]") {
    auto model = small_model(Task::binary_edge, 1, 31);
    auto scene = gen_scene(19, 40, 40, 4);
    auto pred = predict_multiscale(model, scene.image, {0.5, 1.0});
    for (std::int64_t i = 0; i < pred.values.size(); ++i) {
        CHECK(pred.values[i] >= 0.0f);
        CHECK(pred.values[i] <= 1.0f);
    }
}

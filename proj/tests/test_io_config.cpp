#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "pixelnet/config.hpp"
#include "pixelnet/io.hpp"
#include "test_util.hpp"

using namespace pixelnet;
using namespace pixelnet::testing;

namespace {

std::string work_path(const std::string& name) {
    std::filesystem::create_directories(PIXELNET_TEST_WORK_DIR);
    return std::string(PIXELNET_TEST_WORK_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("PXT1 round-trip preserves shape, dtype, and bits") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> shape;
        const int nd = 1 + rng.uniform_int(4);
        for (int i = 0; i < nd; ++i) shape.push_back(1 + rng.uniform_int(5));
        if (rng.uniform() < 0.5) {
            auto t = random_tensor<float>(shape, rng);
            std::stringstream ss;
            write_pxt(ss, t);
            auto back = read_pxt<float>(ss);
            CHECK(back.shape() == t.shape());
            CHECK(max_abs_diff(back, t) == 0.0);
        } else {
            auto t = random_tensor<double>(shape, rng);
            std::stringstream ss;
            write_pxt(ss, t);
            auto back = read_pxt<double>(ss);
            CHECK(back.shape() == t.shape());
            CHECK(max_abs_diff(back, t) == 0.0);
        }
    }
}

TEST_CASE("PXT1 header layout is exactly as documented") {
    Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
    std::stringstream ss;
    write_pxt(ss, t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 1 + 1 + 2 * 4 + 6 * 4);
    CHECK(bytes.substr(0, 4) == "PXT1");
    CHECK(bytes[4] == 0);  // f32 dtype code
    CHECK(bytes[5] == 2);  // ndim
    CHECK(static_cast<unsigned char>(bytes[6]) == 2);   // extent 0, little-endian
    CHECK(static_cast<unsigned char>(bytes[10]) == 3);  // extent 1
}

TEST_CASE("PXT1 converts dtype on read") {
    Tensor<double> t({3}, {1.5, -2.25, 0.125});
    std::stringstream ss;
    write_pxt(ss, t);
    auto as_float = read_pxt<float>(ss);
    CHECK(as_float[1] == -2.25f);
}

TEST_CASE("PXT1 rejects corrupt headers") {
    std::stringstream ss;
    ss << "NOPE";
    CHECK_THROWS_AS(read_pxt<float>(ss), DataError);
}

TEST_CASE("PPM and PGM round-trip at 8-bit precision") {
    Rng rng(5);
    Tensor<float> img({3, 6, 7});
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform());
    const std::string path = work_path("img.ppm");
    write_ppm(path, img);
    auto back = read_ppm(path);
    CHECK(back.shape() == img.shape());
    CHECK(max_abs_diff(back, img) < 0.5 / 255.0 + 1e-6);
    // exact at quantized values
    write_ppm(path, back);
    auto twice = read_ppm(path);
    CHECK(max_abs_diff(twice, back) == 0.0);

    std::vector<std::uint8_t> labels(24);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 5);
    const std::string pgm = work_path("labels.pgm");
    write_pgm(pgm, labels, 4, 6);
    int h = 0, w = 0;
    auto lback = read_pgm(pgm, h, w);
    CHECK(h == 4);
    CHECK(w == 6);
    CHECK(lback == labels);
}

TEST_CASE("flat config parses comments and round-trips canonically") {
    std::istringstream is(
        "# a comment\n"
        "task = segmentation\n"
        "head.num_fc=3\n"
        "optim.lr = 0.01  # trailing comment\n"
        "\n");
    auto flat = parse_flat_config(is);
    CHECK(flat.at("task") == "segmentation");
    CHECK(flat.at("head.num_fc") == "3");
    CHECK(flat.at("optim.lr") == "0.01");

    RunConfig cfg = run_config_from_flat(flat);
    CHECK(cfg.num_fc == 3);
    CHECK(cfg.lr == 0.01);

    // canonical round-trip is stable
    auto flat2 = flat_from_run_config(cfg);
    auto cfg2 = run_config_from_flat(flat2);
    CHECK(canonical_text(flat_from_run_config(cfg2)) == canonical_text(flat2));
}

TEST_CASE("unknown config keys are rejected by name") {
    FlatConfig flat;
    flat["head.numm_fc"] = "2";
    CHECK_THROWS_WITH_AS(run_config_from_flat(flat), doctest::Contains("head.numm_fc"),
                         ConfigError);
    FlatConfig ok;
    CHECK_THROWS_WITH_AS(apply_override(ok, "optim.lrr=0.1"), doctest::Contains("optim.lrr"),
                         ConfigError);
    CHECK_THROWS_AS(apply_override(ok, "no-equals-sign"), ConfigError);
    apply_override(ok, "optim.lr=0.1");
    CHECK(ok.at("optim.lr") == "0.1");
}

TEST_CASE("config parses stages, pools, taps, jitter, and schedules") {
    FlatConfig flat;
    flat["backbone.stages"] = "2x8,1x16";
    flat["backbone.pool_after"] = "1,0";
    flat["hypercolumn.taps"] = "conv1_2,conv2_1";
    flat["train.scale_jitter"] = "0.5,1.0";
    flat["optim.schedule"] = "0:0.01,15:0.001,20:0.0001";
    auto cfg = run_config_from_flat(flat);
    REQUIRE(cfg.stages.size() == 2);
    CHECK(cfg.stages[0].first == 2);
    CHECK(cfg.stages[0].second == 8);
    CHECK(cfg.pool_after == std::vector<bool>{true, false});
    CHECK(cfg.taps == std::vector<std::string>{"conv1_2", "conv2_1"});
    CHECK(cfg.scale_jitter == std::vector<double>{0.5, 1.0});
    REQUIRE(cfg.schedule.size() == 3);
    CHECK(cfg.schedule[1].first == 15);
    CHECK(cfg.schedule[1].second == 0.001);

    auto sched = cfg.lr_schedule();
    CHECK(lr_at(sched, 14) == 0.01);
    CHECK(lr_at(sched, 15) == 0.001);
}

TEST_CASE("edge default recipe mirrors the 15/20/25 schedule") {
    auto cfg = default_run_config(Task::binary_edge);
    CHECK(cfg.epochs == 25);
    CHECK(cfg.strategy == SamplingStrategy::biased);
    CHECK(cfg.scale_jitter == std::vector<double>{0.5, 1.0});
    auto sched = cfg.lr_schedule();
    CHECK(lr_at(sched, 14) == cfg.lr);
    CHECK(lr_at(sched, 15) == doctest::Approx(cfg.lr / 10));
    CHECK(lr_at(sched, 20) == doctest::Approx(cfg.lr / 100));
}

#include <doctest.h>

#include <cmath>

#include "pixelnet/losses.hpp"
#include "pixelnet/ops.hpp"
#include "test_util.hpp"

using namespace pixelnet;
using namespace pixelnet::testing;

TEST_CASE("softmax_xent on uniform logits is ln K") {
    Tape<double> tape;
    auto logits = tape.leaf(Tensor<double>({3, 4}));
    auto loss = softmax_xent(tape, logits, {0, 1, 3});
    CHECK(loss->value[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax_xent vanishes with a large correct-class margin") {
    Tape<double> tape;
    Tensor<double> l({2, 3});
    l.at(0, 1) = 100.0;
    l.at(1, 2) = 100.0;
    auto loss = softmax_xent(tape, tape.leaf(l), {1, 2});
    CHECK(loss->value[0] < 1e-10);
}

TEST_CASE("softmax_xent rejects out-of-range labels with the row index") {
    Tape<double> tape;
    auto logits = tape.leaf(Tensor<double>({2, 3}));
    CHECK_THROWS_WITH_AS(softmax_xent(tape, logits, {0, 7}), doctest::Contains("row 1"),
                         DataError);
}

TEST_CASE("softmax_xent gradient matches central finite differences") {
    Rng rng(5);
    Tensor<double> logits = random_tensor<double>({5, 3}, rng);
    std::vector<int> labels = {0, 2, 1, 1, 0};

    Tape<double> tape;
    auto node = tape.leaf(logits);
    auto loss = softmax_xent(tape, node, labels);
    tape.backward(loss);

    Tensor<double> stored = logits;
    auto fd = finite_diff_grad<double>(stored, [&]() {
        Tape<double> t(false);
        auto l = t.leaf(stored);
        return softmax_xent(t, l, labels)->value[0];
    });
    CHECK(max_rel_err(node->grad, fd, 1e-6) < 1e-6);
}

TEST_CASE("balanced_sigmoid_xent single-class batches use weight 1") {
    Tape<double> tape;
    auto logits = tape.leaf(Tensor<double>({4}));
    auto loss = balanced_sigmoid_xent(tape, logits, {1, 1, 1, 1});
    CHECK(loss->value[0] == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("balanced_sigmoid_xent weights follow beta = N_neg/N") {
    // N=4 with one positive: positive term weighted 0.75, negative 0.25
    Tape<double> tape;
    auto logits = tape.leaf(Tensor<double>({4}));
    auto loss = balanced_sigmoid_xent(tape, logits, {1, 0, 0, 0});
    const double expect = 0.75 * std::log(2.0) + 0.25 * 3.0 * std::log(2.0);
    CHECK(loss->value[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("balanced_sigmoid_xent gradient matches finite differences") {
    Rng rng(9);
    Tensor<double> logits = random_tensor<double>({12}, rng);
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(rng.uniform() < 0.3 ? 1 : 0);

    Tape<double> tape;
    auto node = tape.leaf(logits);
    auto loss = balanced_sigmoid_xent(tape, node, labels);
    tape.backward(loss);

    Tensor<double> stored = logits;
    auto fd = finite_diff_grad<double>(stored, [&]() {
        Tape<double> t(false);
        return balanced_sigmoid_xent(t, t.leaf(stored), labels)->value[0];
    });
    CHECK(max_rel_err(node->grad, fd, 1e-6) < 1e-6);
}

TEST_CASE("cosine_normal_loss is 0 for equal unit vectors and 2 for antipodal") {
    Tensor<double> gt({2, 3});
    gt.at(0, 2) = 1.0;
    gt.at(1, 0) = 1.0;

    Tape<double> tape;
    auto same = tape.leaf(gt);
    CHECK(cosine_normal_loss(tape, same, gt)->value[0] == doctest::Approx(0.0).epsilon(1e-12));

    Tensor<double> anti({2, 3});
    anti.at(0, 2) = -1.0;
    anti.at(1, 0) = -1.0;
    auto anti_node = tape.leaf(anti);
    CHECK(cosine_normal_loss(tape, anti_node, gt)->value[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cosine_normal_loss rejects zero-norm ground truth") {
    Tape<double> tape;
    auto pred = tape.leaf(Tensor<double>::full({1, 3}, 0.5));
    Tensor<double> gt({1, 3});
    CHECK_THROWS_AS(cosine_normal_loss(tape, pred, gt), DataError);
}

TEST_CASE("cosine_normal_loss gradient matches finite differences") {
    Rng rng(13);
    Tensor<double> pred = random_tensor<double>({6, 3}, rng);
    Tensor<double> gt({6, 3});
    for (int i = 0; i < 6; ++i) {
        double x = rng.normal(), y = rng.normal(), z = rng.normal();
        const double n = std::sqrt(x * x + y * y + z * z);
        gt.at(i, 0) = x / n;
        gt.at(i, 1) = y / n;
        gt.at(i, 2) = z / n;
    }

    Tape<double> tape;
    auto node = tape.leaf(pred);
    auto loss = cosine_normal_loss(tape, node, gt);
    tape.backward(loss);

    Tensor<double> stored = pred;
    auto fd = finite_diff_grad<double>(stored, [&]() {
        Tape<double> t(false);
        return cosine_normal_loss(t, t.leaf(stored), gt)->value[0];
    });
    CHECK(max_rel_err(node->grad, fd, 1e-6) < 1e-5);
}

#include <doctest.h>

#include "pixelnet/conv.hpp"
#include "pixelnet/ops.hpp"
#include "test_util.hpp"

using namespace pixelnet;
using namespace pixelnet::testing;

TEST_CASE("conv2d all-ones 3x3 counts kernel overlap") {
    Tape<float> tape;
    auto x = tape.constant(Tensor<float>::full({1, 3, 3}, 1.0f));
    auto w = tape.leaf(Tensor<float>::full({1, 1, 3, 3}, 1.0f));
    auto b = tape.leaf(Tensor<float>({1}));
    auto y = conv2d(tape, x, w, b, 1, 1);
    CHECK(y->value.at(0, 1, 1) == doctest::Approx(9.0));
    CHECK(y->value.at(0, 0, 0) == doctest::Approx(4.0));
    CHECK(y->value.at(0, 0, 2) == doctest::Approx(4.0));
    CHECK(y->value.at(0, 2, 2) == doctest::Approx(4.0));
    CHECK(y->value.at(0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("conv2d identity 1x1 kernel") {
    Rng rng(3);
    Tape<float> tape;
    auto x = tape.constant(random_tensor<float>({2, 4, 5}, rng));
    Tensor<float> wt({2, 2, 1, 1});
    wt.at(0, 0, 0, 0) = 1.0f;
    wt.at(1, 1, 0, 0) = 1.0f;
    auto w = tape.leaf(wt);
    auto b = tape.leaf(Tensor<float>({2}));
    auto y = conv2d(tape, x, w, b, 1, 0);
    CHECK(max_abs_diff(y->value, x->value) == 0.0);
}

TEST_CASE("conv2d matches the naive nested-loop oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int ci = 1 + rng.uniform_int(3);
        const int co = 1 + rng.uniform_int(4);
        const int k = 1 + 2 * rng.uniform_int(2);  // 1 or 3
        const int h = k + rng.uniform_int(6);
        const int w = k + rng.uniform_int(6);
        const int stride = 1 + rng.uniform_int(2);
        const int pad = rng.uniform_int(2);
        if ((h + 2 * pad - k) / stride + 1 < 1 || (w + 2 * pad - k) / stride + 1 < 1) continue;

        Tape<float> tape;
        auto x = tape.constant(random_tensor<float>({ci, h, w}, rng, 0.5));
        auto wt = tape.leaf(random_tensor<float>({co, ci, k, k}, rng, 0.3));
        auto b = tape.leaf(random_tensor<float>({co}, rng, 0.3));
        auto y = conv2d(tape, x, wt, b, stride, pad);
        auto ref = naive_conv2d(x->value, wt->value, b->value, stride, pad);
        CHECK(max_abs_diff(y->value, ref) < 1e-6);
    }
}

TEST_CASE("conv2d shape errors name the offending dimensions") {
    Tape<float> tape;
    auto x = tape.constant(Tensor<float>({2, 4, 4}));
    auto w = tape.leaf(Tensor<float>({3, 5, 3, 3}));
    auto b = tape.leaf(Tensor<float>({3}));
    CHECK_THROWS_WITH_AS(conv2d(tape, x, w, b, 1, 1),
                         doctest::Contains("channel mismatch"), ConfigError);
    auto w2 = tape.leaf(Tensor<float>({3, 2, 4, 4}));  // even kernel
    CHECK_THROWS_AS(conv2d(tape, x, w2, b, 1, 1), ConfigError);
}

TEST_CASE("relu clamps negatives and routes gradient through positives only") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor<double>({3}, {-1.0, 0.0, 2.0}));
    auto y = relu(tape, x);
    CHECK(y->value[0] == 0.0);
    CHECK(y->value[1] == 0.0);
    CHECK(y->value[2] == 2.0);
    auto s = reduce_sum(tape, y);
    tape.backward(s);
    CHECK(x->grad[0] == 0.0);
    CHECK(x->grad[1] == 0.0);  // subgradient 0 at the kink
    CHECK(x->grad[2] == 1.0);
}

TEST_CASE("maxpool2 pools 2x2 windows and edge-replicates odd extents") {
    Tape<float> tape;
    Tensor<float> x({1, 2, 2}, {1, 3, 2, 0});
    auto xn = tape.constant(x);
    auto y = maxpool2(tape, xn);
    CHECK(y->value.size() == 1);
    CHECK(y->value[0] == 3.0f);

    // odd extents: 3x3 becomes 2x2 output via edge replication
    Tape<float> t2;
    Tensor<float> x3({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto y3 = maxpool2(t2, t2.constant(x3));
    CHECK(y3->value.shape() == std::vector<int>{1, 2, 2});
    CHECK(y3->value.at(0, 0, 0) == 5.0f);
    CHECK(y3->value.at(0, 0, 1) == 6.0f);   // replicated column
    CHECK(y3->value.at(0, 1, 0) == 8.0f);
    CHECK(y3->value.at(0, 1, 1) == 9.0f);
}

TEST_CASE("maxpool2 backward routes gradient to the argmax") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor<double>({1, 2, 2}, {1, 3, 2, 0}));
    auto y = maxpool2(tape, x);
    auto s = reduce_sum(tape, y);
    tape.backward(s);
    CHECK(x->grad[0] == 0.0);
    CHECK(x->grad[1] == 1.0);
    CHECK(x->grad[2] == 0.0);
    CHECK(x->grad[3] == 0.0);
}

TEST_CASE("linear with identity weights is the identity") {
    Rng rng(11);
    Tape<float> tape;
    auto x = tape.constant(random_tensor<float>({4, 3}, rng));
    Tensor<float> wt({3, 3});
    for (int i = 0; i < 3; ++i) wt.at(i, i) = 1.0f;
    auto w = tape.leaf(wt);
    auto b = tape.leaf(Tensor<float>({3}));
    auto y = linear(tape, x, w, b);
    CHECK(max_abs_diff(y->value, x->value) == 0.0);
}

TEST_CASE("linear width mismatch error includes both dims") {
    Tape<float> tape;
    auto x = tape.constant(Tensor<float>({2, 5}));
    auto w = tape.leaf(Tensor<float>({3, 4}));
    auto b = tape.leaf(Tensor<float>({3}));
    CHECK_THROWS_WITH_AS(linear(tape, x, w, b), doctest::Contains("5"), ConfigError);
}

TEST_CASE("dropout eval mode is exactly the identity") {
    Rng rng(13);
    Tape<float> tape;
    auto x = tape.constant(random_tensor<float>({8, 8}, rng));
    Rng drop(1);
    auto y = dropout(tape, x, 0.5, false, drop);
    CHECK(y.get() == x.get());
}

TEST_CASE("dropout train mode zeroes at the configured rate and rescales") {
    Rng rng(17);
    Tape<float> tape;
    auto x = tape.constant(Tensor<float>::full({10000}, 1.0f));
    Rng drop(29);
    auto y = dropout(tape, x, 0.25, true, drop);
    int zeros = 0;
    for (std::int64_t i = 0; i < y->value.size(); ++i) {
        if (y->value[i] == 0.0f) {
            ++zeros;
        } else {
            CHECK(y->value[i] == doctest::Approx(1.0f / 0.75f));
        }
    }
    CHECK(zeros > 2200);
    CHECK(zeros < 2800);
    CHECK_THROWS_AS(dropout(tape, x, 1.0, true, drop), ConfigError);
    CHECK_THROWS_AS(dropout(tape, x, -0.1, true, drop), ConfigError);
}

TEST_CASE("gemm transposed variants agree with naive references") {
    Rng rng(23);
    const int m = 7, n = 5, k = 9;
    auto a = random_tensor<double>({m, k}, rng);
    auto b = random_tensor<double>({k, n}, rng);
    Tensor<double> c({m, n});
    gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int q = 0; q < k; ++q) s += a.at(i, q) * b.at(q, j);
            CHECK(c.at(i, j) == doctest::Approx(s));
        }
    }

    auto bt = random_tensor<double>({n, k}, rng);
    Tensor<double> c2({m, n});
    gemm_nt(m, n, k, a.data(), bt.data(), c2.data(), false);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int q = 0; q < k; ++q) s += a.at(i, q) * bt.at(j, q);
            CHECK(c2.at(i, j) == doctest::Approx(s));
        }
    }

    auto at = random_tensor<double>({k, m}, rng);
    Tensor<double> c3({m, n});
    gemm_tn(m, n, k, at.data(), b.data(), c3.data(), false);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int q = 0; q < k; ++q) s += at.at(q, i) * b.at(q, j);
            CHECK(c3.at(i, j) == doctest::Approx(s));
        }
    }
}

// Exact JVP-vs-VJP adjoint identity for the (piecewise-)linear primitives:
// J*v is computed by running the op on a perturbed input, which is exact for
// linear maps, so the identity holds to rounding error in 64-bit.
namespace {

template <typename Forward>
void check_adjoint(Tensor<double> x, Forward&& forward, Rng& rng, double eps = 1.0) {
    Tape<double> t0;
    auto x0 = t0.leaf(x);
    auto y0 = forward(t0, x0);

    auto v = random_tensor<double>(x.shape(), rng);
    Tensor<double> xp(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) xp[i] = x[i] + eps * v[i];
    Tape<double> t1;
    auto y1 = forward(t1, t1.leaf(xp));

    Tensor<double> jv(y0->value.shape());
    for (std::int64_t i = 0; i < jv.size(); ++i) jv[i] = (y1->value[i] - y0->value[i]) / eps;

    auto u = random_tensor<double>(y0->value.shape(), rng);
    // seed the output gradient with u and read J^T u off the tape
    Tape<double> t2;
    auto x2 = t2.leaf(x);
    auto y2 = forward(t2, x2);
    auto un = t2.constant(u);
    auto prod = mul(t2, y2, un);
    auto s = reduce_sum(t2, prod);
    t2.backward(s);

    const double lhs = dot(jv, u);
    const double rhs = dot(v, x2->grad);
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    CHECK(std::abs(lhs - rhs) / denom < 1e-10);
}

}  // namespace

TEST_CASE("adjoint identity <Jv,u> == <v,J^T u> for the structural primitives") {
    Rng rng(31);
    // conv2d w.r.t. input (weights fixed)
    {
        auto w = random_tensor<double>({3, 2, 3, 3}, rng);
        auto b = random_tensor<double>({3}, rng);
        check_adjoint(random_tensor<double>({2, 6, 7}, rng), [&](Tape<double>& t, NodePtr<double> x) {
            return conv2d(t, x, t.constant(w), t.constant(b), 1, 1);
        }, rng);
    }
    // conv2d w.r.t. weights (input fixed)
    {
        auto x = random_tensor<double>({2, 5, 5}, rng);
        check_adjoint(random_tensor<double>({4, 2, 3, 3}, rng), [&](Tape<double>& t, NodePtr<double> w) {
            return conv2d(t, t.constant(x), w, t.constant(Tensor<double>({4})), 2, 1);
        }, rng);
    }
    // linear w.r.t. input and weights
    {
        auto w = random_tensor<double>({4, 6}, rng);
        check_adjoint(random_tensor<double>({5, 6}, rng), [&](Tape<double>& t, NodePtr<double> x) {
            return linear(t, x, t.constant(w), t.constant(Tensor<double>({4})));
        }, rng);
        auto x = random_tensor<double>({5, 6}, rng);
        check_adjoint(random_tensor<double>({4, 6}, rng), [&](Tape<double>& t, NodePtr<double> w) {
            return linear(t, t.constant(x), w, t.constant(Tensor<double>({4})));
        }, rng);
    }
    // relu and maxpool are locally linear: small eps keeps the segment
    {
        check_adjoint(random_tensor<double>({40}, rng), [](Tape<double>& t, NodePtr<double> x) {
            return relu(t, x);
        }, rng, 1e-4);
        check_adjoint(random_tensor<double>({2, 6, 6}, rng), [](Tape<double>& t, NodePtr<double> x) {
            return maxpool2(t, x);
        }, rng, 1e-4);
    }
    // transpose/reshape/concat plumbing
    {
        check_adjoint(random_tensor<double>({5, 7}, rng), [](Tape<double>& t, NodePtr<double> x) {
            return transpose2d(t, x);
        }, rng);
    }
}

TEST_CASE("tape determinism: same seed gives bit-identical forward and gradients") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tape<float> tape;
        auto x = tape.constant(random_tensor<float>({4, 6}, rng));
        auto w = tape.leaf(random_tensor<float>({3, 6}, rng));
        auto b = tape.leaf(random_tensor<float>({3}, rng));
        auto y = linear(tape, x, w, b);
        auto r = relu(tape, y);
        Rng drop(seed + 1);
        auto d = dropout(tape, r, 0.5, true, drop);
        auto s = reduce_sum(tape, d);
        tape.backward(s);
        return std::make_pair(s->value[0], w->grad);
    };
    auto [l1, g1] = run(42);
    auto [l2, g2] = run(42);
    CHECK(l1 == l2);
    CHECK(max_abs_diff(g1, g2) == 0.0);
}

TEST_CASE("tape zero-initializes parameter gradient buffers per step") {
    Tape<float> tape;
    auto w = tape.leaf(Tensor<float>::full({3, 3}, 2.0f));
    CHECK(w->grad.shape() == w->value.shape());
    for (std::int64_t i = 0; i < w->grad.size(); ++i) CHECK(w->grad[i] == 0.0f);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driveperc/prng.hpp"
#include "driveperc/tensor.hpp"

using namespace dp;

namespace {

Tensor random_tensor(std::vector<int> shape, Prng& prng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = prng.uniform(-2.0, 2.0);
    return t;
}

// Direct quadruple-loop cross-correlation, independent of the im2col path.
Tensor conv2d_direct(const Tensor& input, const Tensor& kernels, int sh, int sw,
                     int pad_top, int pad_left, int out_h, int out_w) {
    const int c_out = kernels.dim(0), c_in = kernels.dim(1);
    const int kh = kernels.dim(2), kw = kernels.dim(3);
    Tensor out({c_out, out_h, out_w});
    for (int f = 0; f < c_out; ++f)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                double acc = 0.0;
                for (int c = 0; c < c_in; ++c)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * sh - pad_top + ky;
                            const int ix = ox * sw - pad_left + kx;
                            if (iy < 0 || iy >= input.dim(1) || ix < 0 || ix >= input.dim(2)) continue;
                            acc += input.at(c, iy, ix) * kernels[((static_cast<size_t>(f) * c_in + c) * kh + ky) * kw + kx];
                        }
                out.at(f, oy, ox) = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d sums a field of ones") {
    const Tensor input = Tensor::full({1, 3, 3}, 1.0);
    const Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor out = conv2d(input, kernel, {1, 1}, Padding::Valid);
    REQUIRE(out.shape() == std::vector<int>{1, 1, 1});
    CHECK(out[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d delta kernel with same padding is the identity") {
    Prng prng(11);
    const Tensor input = random_tensor({2, 5, 7}, prng);
    Tensor delta({2, 2, 3, 3});
    delta.at(0, 0, 1, 1) = 1.0;  // kernel f=0 passes channel 0 through
    delta.at(1, 1, 1, 1) = 1.0;
    const Tensor out = conv2d(input, delta, {1, 1}, Padding::Same);
    REQUIRE(out.shape() == input.shape());
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv2d matches the direct quadruple-loop oracle") {
    Prng prng(42);
    for (int round = 0; round < 10; ++round) {
        const Tensor input = random_tensor({1, 5, 5}, prng);
        const Tensor kernels = random_tensor({2, 1, 3, 3}, prng);
        const Tensor out = conv2d(input, kernels, {1, 1}, Padding::Valid);
        const Tensor expect = conv2d_direct(input, kernels, 1, 1, 0, 0, 3, 3);
        REQUIRE(out.shape() == expect.shape());
        for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d strided same padding matches the oracle and the shape formula") {
    Prng prng(7);
    const Tensor input = random_tensor({3, 7, 6}, prng);
    const Tensor kernels = random_tensor({4, 3, 3, 3}, prng);
    const Tensor out = conv2d(input, kernels, {2, 2}, Padding::Same);
    // same padding: H' = ceil(H/s)
    REQUIRE(out.shape() == std::vector<int>{4, 4, 3});
    // pad so that (H'-1)*s + K covers the input, split with the extra below
    const Tensor expect = conv2d_direct(input, kernels, 2, 2, 1, 0, 4, 3);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("conv2d rejects channel mismatch") {
    CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 2, 2})), Error);
}

TEST_CASE("maxpool2d basics") {
    const Tensor input({1, 2, 2}, {1, 2, 3, 4});
    const PoolResult res = maxpool2d(input, {2, 2}, {2, 2});
    REQUIRE(res.output.shape() == std::vector<int>{1, 1, 1});
    CHECK(res.output[0] == 4.0);
    CHECK(res.argmax[0] == 3);

    const Tensor flat = Tensor::full({2, 4, 4}, 3.5);
    const PoolResult c = maxpool2d(flat, {2, 2}, {2, 2});
    for (size_t i = 0; i < c.output.size(); ++i) CHECK(c.output[i] == 3.5);

    CHECK_THROWS_AS(maxpool2d(input, {0, 2}, {1, 1}), Error);
}

TEST_CASE("maxpool2d matches a brute-force per-window max") {
    Prng prng(3);
    const Tensor input = random_tensor({1, 6, 6}, prng);
    const PoolResult res = maxpool2d(input, {2, 2}, {2, 2});
    REQUIRE(res.output.shape() == std::vector<int>{1, 3, 3});
    for (int oy = 0; oy < 3; ++oy)
        for (int ox = 0; ox < 3; ++ox) {
            double m = -1e300;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) m = std::max(m, input.at(0, oy * 2 + dy, ox * 2 + dx));
            CHECK(res.output.at(0, oy, ox) == m);
        }
}

TEST_CASE("maxpool2d drops partial trailing windows") {
    Prng prng(5);
    const Tensor input = random_tensor({1, 5, 7}, prng);
    const PoolResult res = maxpool2d(input, {2, 2}, {2, 2});
    CHECK(res.output.shape() == std::vector<int>{1, 2, 3});
}

TEST_CASE("maxpool output bounded by input max") {
    Prng prng(9);
    for (int round = 0; round < 20; ++round) {
        const Tensor input = random_tensor({2, 6, 6}, prng);
        const PoolResult res = maxpool2d(input, {3, 3}, {2, 2});
        CHECK(max_value(res.output) <= max_value(input));
    }
}

TEST_CASE("bilinear_upsample identity and constant cases") {
    Prng prng(13);
    const Tensor input = random_tensor({2, 3, 4}, prng);
    const Tensor same = bilinear_upsample(input, 1);
    for (size_t i = 0; i < input.size(); ++i) CHECK(same[i] == input[i]);

    const Tensor flat = Tensor::full({1, 2, 2}, 0.75);
    const Tensor up = bilinear_upsample(flat, 3);
    REQUIRE(up.shape() == std::vector<int>{1, 6, 6});
    for (size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(0.75));
}

TEST_CASE("bilinear_upsample matches the scalar coordinate formula") {
    const Tensor ramp({1, 2, 2}, {0, 1, 2, 3});
    const Tensor up = bilinear_upsample(ramp, 2);
    REQUIRE(up.shape() == std::vector<int>{1, 4, 4});
    // Per-pixel evaluation of src = (dst + 0.5)/2 - 0.5 clamped, bilinear blend.
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            auto src = [](int d) { return std::clamp((d + 0.5) / 2.0 - 0.5, 0.0, 1.0); };
            const double sy = src(y), sx = src(x);
            const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            const int y1 = std::min(y0 + 1, 1), x1 = std::min(x0 + 1, 1);
            const double fy = sy - y0, fx = sx - x0;
            const double expect = ramp.at(0, y0, x0) * (1 - fy) * (1 - fx) + ramp.at(0, y0, x1) * (1 - fy) * fx +
                                  ramp.at(0, y1, x0) * fy * (1 - fx) + ramp.at(0, y1, x1) * fy * fx;
            CHECK(up.at(0, y, x) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("bilinear_upsample preserves min/max bounds") {
    Prng prng(17);
    for (int round = 0; round < 10; ++round) {
        const Tensor input = random_tensor({1, 3, 5}, prng);
        const Tensor up = bilinear_upsample(input, 3);
        CHECK(min_value(up) >= min_value(input) - 1e-12);
        CHECK(max_value(up) <= max_value(input) + 1e-12);
    }
}

TEST_CASE("concat_channels layout") {
    const Tensor a({1, 1, 1}, {2.5});
    const Tensor b({1, 1, 1}, {-1.5});
    const Tensor ab = concat_channels(a, b);
    REQUIRE(ab.shape() == std::vector<int>{2, 1, 1});
    CHECK(ab[0] == 2.5);
    CHECK(ab[1] == -1.5);

    Prng prng(23);
    const Tensor x = random_tensor({2, 3, 4}, prng);
    const Tensor y = random_tensor({3, 3, 4}, prng);
    const Tensor xy = concat_channels(x, y);
    // channel slice recovers both operands; flat layout check by index math
    for (int c = 0; c < 5; ++c)
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 4; ++w) {
                const double expect = c < 2 ? x.at(c, h, w) : y.at(c - 2, h, w);
                CHECK(xy[(static_cast<size_t>(c) * 3 + h) * 4 + w] == expect);
            }

    CHECK_THROWS_AS(concat_channels(Tensor({1, 2, 2}), Tensor({1, 3, 2})), Error);
}

TEST_CASE("matmul identity and brute-force oracle") {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at2(i, i) = 1.0;
    Prng prng(29);
    const Tensor a = random_tensor({3, 3}, prng);
    const Tensor ia = matmul(eye, a);
    for (size_t i = 0; i < a.size(); ++i) CHECK(ia[i] == doctest::Approx(a[i]).epsilon(1e-15));

    const Tensor m = random_tensor({3, 4}, prng);
    const Tensor n = random_tensor({4, 2}, prng);
    const Tensor p = matmul(m, n);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += m.at2(i, k) * n.at2(k, j);
            CHECK(p.at2(i, j) == doctest::Approx(acc).epsilon(1e-13));
        }

    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), Error);
}

TEST_CASE("reduce over a named axis") {
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor rows = reduce(t, Reduce::Sum, 1);
    REQUIRE(rows.shape() == std::vector<int>{2});
    CHECK(rows[0] == 6.0);
    CHECK(rows[1] == 15.0);
    const Tensor cols = reduce(t, Reduce::Mean, 0);
    CHECK(cols[0] == doctest::Approx(2.5));
    CHECK(cols[2] == doctest::Approx(4.5));
    const Tensor maxes = reduce(t, Reduce::Max, 0);
    CHECK(maxes[1] == 5.0);
    CHECK_THROWS_AS(reduce(t, Reduce::Sum, 2), Error);
}

TEST_CASE("argmax resolves ties to the lowest index") {
    const Tensor t({3}, {1, 3, 3});
    CHECK(argmax(t) == 1);
    const Tensor rows({2, 3}, {0, 7, 7, 5, 5, 1});
    const auto winners = argmax_rows(rows);
    CHECK(winners[0] == 1);
    CHECK(winners[1] == 0);
}

TEST_CASE("pad and reshape") {
    const Tensor t({1, 2, 2}, {1, 2, 3, 4});
    const Tensor padded = pad(t, {{0, 0}, {1, 1}, {1, 1}});
    REQUIRE(padded.shape() == std::vector<int>{1, 4, 4});
    CHECK(padded.at(0, 0, 0) == 0.0);
    CHECK(padded.at(0, 1, 1) == 1.0);
    CHECK(padded.at(0, 2, 2) == 4.0);

    const Tensor flat = t.reshape({4});
    CHECK(flat[3] == 4.0);
    CHECK_THROWS_AS(t.reshape({5}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), Error);
}

TEST_CASE("operations are deterministic") {
    Prng p1(77), p2(77);
    const Tensor a1 = random_tensor({3, 17}, p1), a2 = random_tensor({3, 17}, p2);
    const Tensor b1 = random_tensor({17, 5}, p1), b2 = random_tensor({17, 5}, p2);
    const Tensor r1 = matmul(a1, b1), r2 = matmul(a2, b2);
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("prng replays identically and splits deterministically") {
    Prng a(123456), b(123456);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Prng c1 = a.split(), c2 = b.split();
    for (int i = 0; i < 100; ++i) REQUIRE(c1.next_u64() == c2.next_u64());
    // documented SplitMix64 stream head for seed 0
    Prng z(0);
    CHECK(z.next_u64() == 0xE220A8397B1DCDAFull);
}

TEST_CASE("prng uniform stays in range and normal is finite") {
    Prng p(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = p.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) REQUIRE(std::isfinite(p.normal()));
}

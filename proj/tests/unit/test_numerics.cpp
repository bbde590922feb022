#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "t2g/errors.hpp"
#include "t2g/numerics.hpp"

using t2g::Grid2D;
using t2g::Matrix;

TEST_CASE("matmul identity and zero") {
    Matrix b = Matrix::from_rows(3, 2, {1, 2, 3, 4, 5, 6});
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    const Matrix ib = t2g::matmul(eye, b);
    CHECK(ib.data == b.data);

    const Matrix z = t2g::matmul(Matrix(2, 3), b);
    for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("matmul hand example") {
    const Matrix a = Matrix::from_rows(2, 2, {1, 2, 3, 4});
    const Matrix b = Matrix::from_rows(2, 1, {1, 1});
    const Matrix c = t2g::matmul(a, b);
    CHECK(c.at(0, 0) == 3.0);
    CHECK(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul matches naive oracle bitwise up to 16x16") {
    oracle::Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 1 + rng.below(16);
        const int k = 1 + rng.below(16);
        const int n = 1 + rng.below(16);
        Matrix a(m, k), b(k, n);
        for (double& v : a.data) v = rng.uniform(-3.0, 3.0);
        for (double& v : b.data) v = rng.uniform(-3.0, 3.0);
        const Matrix got = t2g::matmul(a, b);
        const Matrix want = oracle::matmul(a, b);
        for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == want.data[i]);
    }
}

TEST_CASE("matmul shape error") {
    CHECK_THROWS_AS((void)t2g::matmul(Matrix(2, 3), Matrix(2, 3)), t2g::ShapeError);
}

TEST_CASE("softmax_rows hand cases") {
    const Matrix single = t2g::softmax_rows(Matrix::from_rows(1, 1, {4.2}), 1.0);
    CHECK(single.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    const Matrix sym = t2g::softmax_rows(Matrix::from_rows(1, 2, {0, 0}), 1.0);
    CHECK(sym.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    const Matrix ln = t2g::softmax_rows(Matrix::from_rows(1, 2, {std::log(2.0), 0.0}), 1.0);
    CHECK(ln.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(ln.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax_rows row sums and shift invariance") {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        Matrix m(1 + rng.below(4), 1 + rng.below(6));
        for (double& v : m.data) v = rng.uniform(-30.0, 30.0);
        const double scale = rng.uniform(0.2, 4.0);
        const Matrix p = t2g::softmax_rows(m, scale);
        for (int i = 0; i < p.rows; ++i) {
            double sum = 0.0;
            for (int j = 0; j < p.cols; ++j) {
                CHECK(p.at(i, j) >= 0.0);
                sum += p.at(i, j);
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }

        Matrix shifted = m;
        const double c = rng.uniform(-5.0, 5.0);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) shifted.at(i, j) += c * scale;
        const Matrix q = t2g::softmax_rows(shifted, scale);
        for (std::size_t i = 0; i < p.data.size(); ++i)
            CHECK(std::abs(p.data[i] - q.data[i]) < 1e-9);
    }
}

TEST_CASE("softmax_rows rejects bad input") {
    CHECK_THROWS_AS((void)t2g::softmax_rows(Matrix::from_rows(1, 1, {1.0}), 0.0),
                    t2g::DomainError);
    Matrix inf(1, 2);
    inf.at(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS((void)t2g::softmax_rows(inf, 1.0), t2g::DomainError);
}

TEST_CASE("layer_norm hand cases") {
    const std::vector<double> gain = {1.0, 1.0};
    const std::vector<double> bias = {0.0, 0.0};

    const auto constant = t2g::layer_norm(std::vector<double>{3.0, 3.0}, gain, bias, 1e-5);
    CHECK(constant[0] == doctest::Approx(0.0).epsilon(1e-9));

    const auto pm = t2g::layer_norm(std::vector<double>{1.0, -1.0}, gain, bias, 1e-12);
    CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-6));

    const auto degenerate = t2g::layer_norm(std::vector<double>{5.0, 9.0},
                                            std::vector<double>{0.0, 0.0},
                                            std::vector<double>{2.5, -1.0}, 1e-5);
    CHECK(degenerate[0] == 2.5);
    CHECK(degenerate[1] == -1.0);
}

TEST_CASE("layer_norm matches closed-form oracle") {
    oracle::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + rng.below(12);
        std::vector<double> v(d), gain(d), bias(d);
        for (auto* vec : {&v, &gain, &bias})
            for (double& x : *vec) x = rng.uniform(-2.0, 2.0);
        const auto got = t2g::layer_norm(v, gain, bias, 1e-5);
        const auto want = oracle::layer_norm(v, gain, bias, 1e-5);
        for (int i = 0; i < d; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("bilinear_resize identity and constant") {
    oracle::Rng rng(5);
    Grid2D g(3, 4, 2);
    for (double& v : g.data) v = rng.uniform(-1.0, 1.0);
    const Grid2D same = t2g::bilinear_resize(g, 3, 4);
    for (std::size_t i = 0; i < g.data.size(); ++i) CHECK(same.data[i] == g.data[i]);

    Grid2D c(2, 2, 1, 0.75);
    const Grid2D big = t2g::bilinear_resize(c, 5, 7);
    for (double v : big.data) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("bilinear_resize columns interpolate linearly") {
    Grid2D g(2, 2, 1);
    g.at(0, 1, 0) = 1.0;
    g.at(1, 1, 0) = 1.0;
    const Grid2D out = t2g::bilinear_resize(g, 2, 4);
    // Source x coords for dst 0..3 are -0.25, 0.25, 0.75, 1.25 (edge-clamped).
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.at(0, 1, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.at(0, 2, 0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out.at(0, 3, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bilinear_resize matches formula oracle and keeps envelope") {
    oracle::Rng rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        Grid2D g(1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3));
        for (double& v : g.data) v = rng.uniform(-4.0, 4.0);
        const int oh = 1 + rng.below(7);
        const int ow = 1 + rng.below(7);
        const Grid2D got = t2g::bilinear_resize(g, oh, ow);
        const Grid2D want = oracle::bilinear(g, oh, ow);
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));

        for (int c = 0; c < g.channels; ++c) {
            double lo = g.at(0, 0, c), hi = lo;
            for (int y = 0; y < g.height; ++y)
                for (int x = 0; x < g.width; ++x) {
                    lo = std::min(lo, g.at(y, x, c));
                    hi = std::max(hi, g.at(y, x, c));
                }
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    CHECK(got.at(y, x, c) >= lo - 1e-12);
                    CHECK(got.at(y, x, c) <= hi + 1e-12);
                }
        }
    }
    CHECK_THROWS_AS((void)t2g::bilinear_resize(Grid2D(2, 2, 1), 0, 3), t2g::ShapeError);
}

TEST_CASE("grid token round trip") {
    oracle::Rng rng(3);
    Grid2D g(3, 5, 4);
    for (double& v : g.data) v = rng.uniform(-1.0, 1.0);
    const Matrix tokens = t2g::grid_to_tokens(g);
    CHECK(tokens.rows == 15);
    CHECK(tokens.cols == 4);
    // Token index y*W + x carries the pixel's channel vector.
    for (int c = 0; c < 4; ++c) CHECK(tokens.at(1 * 5 + 2, c) == g.at(1, 2, c));
    const Grid2D back = t2g::tokens_to_grid(tokens, 3, 5);
    CHECK(back.data == g.data);
}

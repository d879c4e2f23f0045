#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/rng.hpp"

using namespace tabrep;
using numkit::Matrix;
using numkit::RngStream;

namespace {

Matrix random_matrix(RngStream& rng, std::size_t r, std::size_t c) {
    return numkit::sample(rng, numkit::Gaussian{0.0, 1.0}, r, c);
}

} // namespace

TEST_CASE("matmul identity and fixed product") {
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(numkit::matmul(Matrix::identity(2), a) == a);

    const Matrix b{{5, 6}, {7, 8}};
    const Matrix expected{{19, 22}, {43, 50}};
    const Matrix got = numkit::matmul(a, b);
    CHECK(got == expected);
    CHECK(numkit::max_abs_diff(got, testutil::naive_matmul(a, b)) == 0.0);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Matrix a(2, 3), b(2, 2);
    CHECK_THROWS_MATCHES(numkit::matmul(a, b), ShapeError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("(2x3)") &&
                                                         Catch::Matchers::ContainsSubstring("(2x2)")));
}

TEST_CASE("matmul matches the naive oracle on random shapes") {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto r = 1 + rng.next_below(6), k = 1 + rng.next_below(6), c = 1 + rng.next_below(6);
        const Matrix a = random_matrix(rng, r, k);
        const Matrix b = random_matrix(rng, k, c);
        CHECK(numkit::max_abs_diff(numkit::matmul(a, b), testutil::naive_matmul(a, b)) < 1e-12);
    }
}

TEST_CASE("matmul is associative within relative tolerance") {
    RngStream rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 4, 5), b = random_matrix(rng, 5, 3), c = random_matrix(rng, 3, 6);
        const Matrix lhs = numkit::matmul(numkit::matmul(a, b), c);
        const Matrix rhs = numkit::matmul(a, numkit::matmul(b, c));
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double denom = std::max(1.0, std::abs(lhs.data()[i]));
            CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("transpose is an exact involution") {
    RngStream rng(3);
    const Matrix a = random_matrix(rng, 7, 4);
    CHECK(numkit::transpose(numkit::transpose(a)) == a);
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
    RngStream rng(5);
    const Matrix a = random_matrix(rng, 4, 6), b = random_matrix(rng, 5, 6), c = random_matrix(rng, 4, 3);
    CHECK(numkit::max_abs_diff(numkit::matmul_nt(a, b), numkit::matmul(a, numkit::transpose(b))) < 1e-12);
    CHECK(numkit::max_abs_diff(numkit::matmul_tn(a, c), numkit::matmul(numkit::transpose(a), c)) < 1e-12);
}

TEST_CASE("slicing, stacking, reductions") {
    const Matrix a{{1, 2, 3}, {4, 5, 6}};
    CHECK(numkit::slice_cols(a, 1, 3) == Matrix{{2, 3}, {5, 6}});
    CHECK(numkit::hcat(a, a).cols() == 6);
    const auto means = numkit::col_means(a);
    CHECK(means == std::vector<double>{2.5, 3.5, 4.5});
    const std::vector<std::size_t> idx{1, 0, 1};
    const Matrix rows = numkit::take_rows(a, idx);
    CHECK(rows.rows() == 3);
    CHECK(rows(0, 0) == 4.0);
    CHECK(rows(2, 2) == 6.0);
}

TEST_CASE("seeded sampling is reproducible bit-exactly") {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream s1(99), s2(99);
    const Matrix m1 = numkit::sample(s1, numkit::Gaussian{0.0, 1.0}, 8, 8);
    const Matrix m2 = numkit::sample(s2, numkit::Gaussian{0.0, 1.0}, 8, 8);
    CHECK(m1 == m2);
}

TEST_CASE("gaussian sample mean obeys the CLT bound") {
    RngStream rng(2024);
    const Matrix m = numkit::sample(rng, numkit::Gaussian{0.0, 1.0}, 100000, 1);
    double mean = 0.0;
    for (double v : m.data()) mean += v;
    mean /= static_cast<double>(m.size());
    CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("uniform samples stay in [lo, hi)") {
    RngStream rng(17);
    const Matrix m = numkit::sample(rng, numkit::Uniform{0.0, 1.0}, 100, 10);
    for (double v : m.data()) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("sample validates distribution parameters") {
    RngStream rng(1);
    CHECK_THROWS_AS(numkit::sample(rng, numkit::Gaussian{0.0, 0.0}, 1, 1), ParamError);
    CHECK_THROWS_AS(numkit::sample(rng, numkit::Gaussian{0.0, -1.0}, 1, 1), ParamError);
    CHECK_THROWS_AS(numkit::sample(rng, numkit::Uniform{1.0, 1.0}, 1, 1), ParamError);
    CHECK_THROWS_AS(numkit::sample(rng, numkit::Uniform{2.0, 1.0}, 1, 1), ParamError);
}

TEST_CASE("derived streams are independent of parent position and label-distinct") {
    RngStream parent(123);
    const RngStream d1 = parent.derive(1);
    parent.next_u64();
    const RngStream d1_again = RngStream(123).derive(1);
    RngStream a = d1, b = d1_again;
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream x = RngStream(123).derive(1), y = RngStream(123).derive(2);
    bool differ = false;
    for (int i = 0; i < 10; ++i) differ |= x.next_u64() != y.next_u64();
    CHECK(differ);

    RngStream s1 = RngStream(9).derive("fold:0"), s2 = RngStream(9).derive("fold:1");
    CHECK(s1.next_u64() != s2.next_u64());
}

TEST_CASE("shuffle is deterministic under seed and permutes") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1, sorted = v1;
    RngStream a(6), b(6);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    std::sort(v1.begin(), v1.end());
    CHECK(v1 == sorted);
}

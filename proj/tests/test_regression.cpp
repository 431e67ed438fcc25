#include "bsde/errors.hpp"
#include "bsde/paths.hpp"
#include "bsde/regression.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <set>

using namespace bsde;

namespace {

Eigen::MatrixXd gaussian_state(std::size_t M, std::size_t d, std::uint64_t seed, double sd = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sd);
    Eigen::MatrixXd s(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
    return s;
}

std::size_t binomial(std::size_t n, std::size_t r)
{
    std::size_t out = 1;
    for (std::size_t i = 1; i <= r; ++i) out = out * (n - r + i) / i;
    return out;
}

}  // namespace

TEST_CASE("basis size and multi-indices")
{
    CHECK(basis_size(1, 3) == 4);
    CHECK(basis_size(2, 3) == 10);
    CHECK(basis_size(3, 0) == 1);
    for (std::size_t d = 1; d <= 4; ++d) {
        for (int q = 0; q <= 4; ++q) {
            const auto idx = basis_multi_indices(d, q);
            CHECK(idx.size() == binomial(d + static_cast<std::size_t>(q), static_cast<std::size_t>(q)));
            CHECK(basis_size(d, q) == idx.size());
            std::set<std::vector<int>> unique(idx.begin(), idx.end());
            CHECK(unique.size() == idx.size());
            int prev = 0;
            for (const auto& a : idx) {
                int total = 0;
                for (int e : a) total += e;
                CHECK(total <= q);
                CHECK(total >= prev);
                prev = total;
            }
            for (int e : idx.front()) CHECK(e == 0);
        }
    }
}

TEST_CASE("constant targets are reproduced exactly")
{
    const Eigen::MatrixXd state = gaussian_state(500, 2, 1);
    const Regressor r(state, BasisSpec{3, 1e-6});
    Eigen::MatrixXd targets(500, 2);
    targets.col(0).setConstant(3.25);
    targets.col(1).setConstant(-1e-3);
    const Eigen::MatrixXd fit = r.fit(targets);
    CHECK((fit - targets).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("targets inside the span are recovered")
{
    const Eigen::MatrixXd state = gaussian_state(1000, 1, 2);
    const RegressionResult r = regress_conditional_expectation(3.0 * state, state, BasisSpec{3, 0.0});
    CHECK((r.fitted - 3.0 * state).cwiseAbs().maxCoeff() <= 1e-10);

    Eigen::MatrixXd cubic = state.array().cube() - 2.0 * state.array() + 0.5;
    const RegressionResult c = regress_conditional_expectation(cubic, state, BasisSpec{3, 0.0});
    CHECK((c.fitted - cubic).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("martingale conditional expectation")
{
    const std::size_t M = 20000;
    const PathEnsemble ens = generate_ensemble(M, 2, 1, 1.0, 17);
    Eigen::MatrixXd state(M, 1), target(M, 1);
    for (std::size_t m = 0; m < M; ++m) {
        state(static_cast<Eigen::Index>(m), 0) = ens.value(m, 1)[0];
        target(static_cast<Eigen::Index>(m), 0) = ens.value(m, 2)[0];
    }
    const BasisSpec basis{3, 1e-10 * static_cast<double>(M)};
    const RegressionResult r = regress_conditional_expectation(target, state, basis);
    const double rms = std::sqrt((r.fitted - state).squaredNorm() / static_cast<double>(M));
    const double sd = std::sqrt(ens.grid().dt());
    const double P = static_cast<double>(basis_size(1, 3));
    CHECK(rms <= 3.0 * sd * std::sqrt(P / static_cast<double>(M)));
}

TEST_CASE("rank deficiency")
{
    Eigen::MatrixXd state = Eigen::MatrixXd::Constant(100, 1, 0.7);
    CHECK_THROWS_AS(Regressor(state, BasisSpec{2, 0.0}), SingularSystemError);
    CHECK_NOTHROW(Regressor(state, BasisSpec{2, 1e-6}));

    CHECK_THROWS_AS(Regressor(gaussian_state(4, 1, 3), BasisSpec{3, 0.0}), ParameterError);
    CHECK_THROWS_AS(Regressor(gaussian_state(40, 1, 3), BasisSpec{-1, 0.0}), ParameterError);
    CHECK_THROWS_AS(Regressor(gaussian_state(40, 1, 3), BasisSpec{2, -1.0}), ParameterError);
}

TEST_CASE("blocked and plain accumulation agree")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t M = 600 + 700 * static_cast<std::size_t>(trial);
        const std::size_t d = 1 + static_cast<std::size_t>(trial % 3);
        const Eigen::MatrixXd state = gaussian_state(M, d, rng());
        Eigen::MatrixXd target = state.array().sin();
        target.col(0) += state.col(0).array().square().matrix();
        const BasisSpec basis{2, 1e-8};
        const Eigen::MatrixXd a = Regressor(state, basis, true).fit(target);
        const Eigen::MatrixXd b = Regressor(state, basis, false).fit(target);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("fit is idempotent")
{
    const Eigen::MatrixXd state = gaussian_state(2000, 2, 21);
    const Regressor r(state, BasisSpec{3, 0.0});
    const Eigen::MatrixXd target = state.array().exp();
    const Eigen::MatrixXd once = r.fit(target);
    const Eigen::MatrixXd twice = r.fit(once);
    CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-9);
}

#include "bsde/errors.hpp"
#include "bsde/oracle.hpp"
#include "bsde/paths.hpp"
#include "bsde/regression.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace bsde;

TEST_CASE("oracle values")
{
    const OracleInstance coord{MartingaleCoordinate{1}, 1.0, 2};
    const std::vector<double> B{0.4, -0.7};
    const OracleValue c = oracle_solution(coord, 1.0, B);
    CHECK(c.y == -0.7);
    CHECK(c.z == std::vector<double>{0.0, 1.0});

    const OracleInstance sq{MartingaleSquare{}, 1.0, 1};
    const OracleValue s = oracle_solution(sq, 0.0, std::vector<double>{0.0});
    CHECK(s.y == 1.0);
    CHECK(s.z == std::vector<double>{0.0});
    const OracleValue s2 = oracle_solution(sq, 0.25, std::vector<double>{0.5});
    CHECK(s2.y == doctest::Approx(0.25 + 0.75));
    CHECK(s2.z[0] == 1.0);

    const OracleInstance lin{LinearDrift{0.5, 0.0, 1.0}, 1.0, 1};
    CHECK(oracle_solution(lin, 0.0, std::vector<double>{0.0}).y == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
    CHECK(oracle_solution(lin, 1.0, std::vector<double>{0.0}).y == 1.0);

    const OracleInstance both{LinearDrift{-0.3, 0.2, 2.0}, 2.0, 1};
    const double e = std::exp(-0.3 * 1.5);
    CHECK(oracle_solution(both, 0.5, std::vector<double>{3.0}).y ==
          doctest::Approx(e * 2.0 + 0.2 / -0.3 * (e - 1.0)).epsilon(1e-14));
}

TEST_CASE("linear drift oracle is continuous at a = 0")
{
    const std::vector<double> B{0.0};
    const OracleInstance zero{LinearDrift{0.0, 0.7, 1.5}, 2.0, 1};
    CHECK(oracle_solution(zero, 0.5, B).y == doctest::Approx(1.5 + 0.7 * 1.5).epsilon(1e-15));
    for (double a : {1e-4, 1e-8, 1e-12, -1e-10}) {
        const OracleInstance near{LinearDrift{a, 0.7, 1.5}, 2.0, 1};
        CHECK(oracle_solution(near, 0.5, B).y == doctest::Approx(1.5 + 0.7 * 1.5).epsilon(1e-3));
    }
}

TEST_CASE("oracle data match their BSDE")
{
    const OracleInstance coord{MartingaleCoordinate{0}, 1.0, 3};
    CHECK(coord.generator().d() == 3);
    CHECK(coord.terminal().describe().find("Coordinate") != std::string::npos);
    const OracleInstance lin{LinearDrift{0.5, 0.1, 1.0}, 1.0, 1};
    const std::vector<double> g =
        eval_generator(lin.generator(), 0.0, std::vector<double>{0.0}, std::vector<double>{2.0}, std::vector<double>{9.0});
    CHECK(g[0] == doctest::Approx(0.5 * 2.0 + 0.1));
}

TEST_CASE("oracle time range")
{
    const OracleInstance sq{MartingaleSquare{}, 1.0, 1};
    CHECK_THROWS_AS(oracle_solution(sq, -0.1, std::vector<double>{0.0}), ParameterError);
    CHECK_THROWS_AS(oracle_solution(sq, 1.1, std::vector<double>{0.0}), ParameterError);
    CHECK_THROWS_AS(oracle_solution(sq, std::nan(""), std::vector<double>{0.0}), ParameterError);
}

TEST_CASE("compare_to_oracle")
{
    const PathEnsemble ens = generate_ensemble(300, 12, 1, 1.0, 6);
    const OracleInstance sq{MartingaleSquare{}, 1.0, 1};
    const DiscreteSolution exact = oracle_discrete(sq, ens);
    const OracleErrors e0 = compare_to_oracle(exact, sq, ens, 2.0);
    CHECK(e0.sp_error == 0.0);
    CHECK(e0.z_rms_error == 0.0);

    DiscreteSolution shifted = exact;
    for (double& v : shifted.y_data()) v += 0.125;
    for (double p : {1.5, 2.0, 3.0}) {
        CHECK(compare_to_oracle(shifted, sq, ens, p).sp_error == doctest::Approx(0.125).epsilon(1e-12));
    }

    DiscreteSolution zbad = exact;
    for (double& v : zbad.z_data()) v -= 0.5;
    CHECK(compare_to_oracle(zbad, sq, ens, 2.0).z_rms_error == doctest::Approx(0.5).epsilon(1e-12));

    const PathEnsemble other = generate_ensemble(300, 10, 1, 1.0, 6);
    CHECK_THROWS_AS(compare_to_oracle(exact, sq, other, 2.0), DimensionError);
}

TEST_CASE("discrete residuals of the oracles have small conditional mean")
{
    // r_i = y_i - y_{i+1} - g dt + z dB_i; E[r_i | B_i] = O(dt^2)
    const std::size_t M = 20000;
    const std::size_t N = 10;
    const PathEnsemble ens = generate_ensemble(M, N, 1, 1.0, 13);
    const double dt = ens.grid().dt();
    for (const OracleInstance& inst :
         {OracleInstance{MartingaleSquare{}, 1.0, 1}, OracleInstance{MartingaleCoordinate{0}, 1.0, 1},
          OracleInstance{LinearDrift{0.8, -0.3, 1.0}, 1.0, 1}}) {
        const DiscreteSolution sol = oracle_discrete(inst, ens);
        const Generator gen = inst.generator();
        for (std::size_t i = 1; i < N; ++i) {
            Eigen::MatrixXd state(M, 1), r(M, 1);
            for (std::size_t m = 0; m < M; ++m) {
                const auto mi = static_cast<Eigen::Index>(m);
                const std::vector<double> g =
                    eval_generator(gen, ens.grid().time(i), ens.value(m, i), sol.y(m, i), sol.z(m, i));
                state(mi, 0) = ens.value(m, i)[0];
                r(mi, 0) = sol.y(m, i)[0] - sol.y(m, i + 1)[0] - g[0] * dt + sol.z(m, i)[0] * ens.increment(m, i)[0];
            }
            const RegressionResult fit = regress_conditional_expectation(r, state, BasisSpec{2, 0.0});
            const double rms = std::sqrt(fit.fitted.squaredNorm() / static_cast<double>(M));
            // noise of a 3-term projection of dt - dB^2, whose sd is sqrt(2) dt
            const double noise = 4.0 * std::sqrt(2.0) * dt * std::sqrt(3.0 / static_cast<double>(M));
            CHECK(rms <= noise + 2.0 * dt * dt);
        }
    }
}

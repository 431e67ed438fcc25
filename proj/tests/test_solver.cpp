#include "bsde/analysis.hpp"
#include "bsde/errors.hpp"
#include "bsde/generator.hpp"
#include "bsde/paths.hpp"
#include "bsde/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace bsde;

namespace {

BasisSpec basis_for(const PathEnsemble& ens) { return {3, default_ridge(ens.paths())}; }

double mean_y0(const DiscreteSolution& sol)
{
    double s = 0.0;
    for (std::size_t m = 0; m < sol.paths(); ++m) s += sol.y(m, 0)[0];
    return s / static_cast<double>(sol.paths());
}

}  // namespace

TEST_CASE("terminal specs")
{
    std::vector<double> out(1);
    const std::vector<double> B{0.5, -2.0};
    TerminalSpec::coordinate(1).eval(B, out);
    CHECK(out[0] == -2.0);
    TerminalSpec::square_norm().eval(B, out);
    CHECK(out[0] == 4.25);
    std::vector<double> out3(3);
    TerminalSpec::constant(1.5, 3).eval(B, out3);
    for (double v : out3) CHECK(v == 1.5);
}

TEST_CASE("constant terminal with zero generator is exact")
{
    const PathEnsemble ens = generate_ensemble(2000, 10, 2, 1.0, 3);
    const DiscreteSolution sol =
        solve_frozen_bsde(Generator::zero(1, 2), {}, TerminalSpec::constant(1.0), ens, basis_for(ens));
    for (double v : sol.y_data()) CHECK(v == 1.0);
    for (double v : sol.z_data()) CHECK(v == 0.0);
}

TEST_CASE("martingale terminal recovers B_t and z = 1")
{
    const PathEnsemble ens = generate_ensemble(8192, 20, 1, 1.0, 5);
    const DiscreteSolution sol =
        solve_frozen_bsde(Generator::zero(1, 1), {}, TerminalSpec::coordinate(0), ens, basis_for(ens));
    double ey = 0.0, ez = 0.0;
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        for (std::size_t i = 0; i < 20; ++i) {
            ey += std::pow(sol.y(m, i)[0] - ens.value(m, i)[0], 2);
            ez += std::pow(sol.z(m, i)[0] - 1.0, 2);
        }
    }
    CHECK(std::sqrt(ey / (8192.0 * 20.0)) <= 0.02);
    CHECK(std::sqrt(ez / (8192.0 * 20.0)) <= 0.05);
}

TEST_CASE("constant driver gives a deterministic linear solution")
{
    const PathEnsemble ens = generate_ensemble(1000, 10, 1, 2.0, 8);
    const PicardResult r =
        picard_solve(Generator::linear(0.0, 0.0, 0.2, 1, 1), TerminalSpec::constant(0.0), ens, basis_for(ens));
    CHECK(r.report.converged);
    for (std::size_t m = 0; m < ens.paths(); m += 97) {
        for (std::size_t i = 0; i <= 10; ++i) {
            CHECK(r.solution.y(m, i)[0] == doctest::Approx(0.2 * (2.0 - ens.grid().time(i))).epsilon(1e-9));
        }
    }
}

TEST_CASE("y-independent generators converge after one iteration")
{
    const PathEnsemble ens = generate_ensemble(1000, 10, 1, 1.0, 8);
    const PicardResult r = picard_solve(Generator::zero(1, 1), TerminalSpec::coordinate(0), ens, basis_for(ens));
    CHECK(r.report.iterations == 1);
    CHECK(r.report.dist_y.at(0) == 0.0);
    CHECK(r.report.converged);
}

TEST_CASE("linear growth matches the exponential")
{
    const PathEnsemble ens = generate_ensemble(1000, 50, 1, 1.0, 12);
    PicardOptions opts;
    // dist_y is a p-th moment, so this asks for ~1e-12 in y
    opts.tol = 1e-24;
    opts.max_iter = 40;
    const PicardResult r =
        picard_solve(Generator::linear(0.5, 0.0, 0.0, 1, 1), TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    CHECK(r.report.converged);
    // the driver is evaluated at the current step, so each step divides by 1 - a dt
    CHECK(mean_y0(r.solution) == doctest::Approx(std::pow(1.0 - 0.5 / 50.0, -50)).epsilon(1e-9));
    CHECK(std::abs(mean_y0(r.solution) - std::exp(0.5)) <= 1e-2);
}

TEST_CASE("terminal values are pinned and the last step is consistent")
{
    const PathEnsemble ens = generate_ensemble(4096, 8, 1, 1.0, 21);
    const Generator gen = Generator::example1(2.0, std::exp(-2.0), 1);
    const PicardResult r = picard_solve(gen, TerminalSpec::square_norm(), ens, basis_for(ens));
    const std::size_t N = 8;
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        const double b = ens.value(m, N)[0];
        CHECK(r.solution.y(m, N)[0] == b * b);
    }
    CHECK(r.solution.all_finite());
    // y_{N-1} + E[xi - y_{N-1} | F] ~ dt * E[g]: the average residual of one backward step is O(dt)
    double resid = 0.0;
    const double dt = ens.grid().dt();
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        const double yN = r.solution.y(m, N)[0];
        const double y1 = r.solution.y(m, N - 1)[0];
        const std::vector<double> g = eval_generator(gen, ens.grid().time(N - 1), ens.value(m, N - 1),
                                                     r.solution.y(m, N - 1), r.solution.z(m, N - 1));
        resid += yN + dt * g[0] - y1;
    }
    CHECK(std::abs(resid / static_cast<double>(ens.paths())) <= 0.05);
}

TEST_CASE("reruns are bit-identical")
{
    const PathEnsemble ens = generate_ensemble(3000, 10, 2, 1.0, 4);
    const Generator gen = Generator::linear(0.3, 0.2, 0.1, 1, 2);
    const PicardResult a = picard_solve(gen, TerminalSpec::square_norm(), ens, basis_for(ens));
    const PicardResult b = picard_solve(gen, TerminalSpec::square_norm(), ens, basis_for(ens));
    CHECK(a.solution.y_data() == b.solution.y_data());
    CHECK(a.solution.z_data() == b.solution.z_data());
    CHECK(a.report.dist_y == b.report.dist_y);
}

TEST_CASE("horizon splitting")
{
    const PathEnsemble ens = generate_ensemble(1000, 10, 1, 1.0, 2);
    const Generator gen = Generator::linear(0.5, 0.0, 0.0, 1, 1);
    PicardOptions opts;
    opts.split_t1 = 0.5;
    const PicardResult r = picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    REQUIRE(r.report.windows.size() == 2);
    CHECK(r.report.windows[0].first_step == 5);
    CHECK(r.report.windows[0].last_step == 10);
    CHECK(r.report.windows[1].first_step == 0);
    CHECK(r.report.windows[1].last_step == 5);
    CHECK(r.report.converged);

    opts.split_t1 = 0.7;
    const PicardResult r3 = picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    CHECK(r3.report.windows.size() == 4);

    opts.split_t1 = -1.0;
    const PicardResult half = picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    CHECK(half.report.windows.size() == 2);

    // splitting changes the iteration path but not the fixed point
    opts.split_t1.reset();
    opts.tol = 1e-24;
    opts.max_iter = 40;
    const PicardResult whole = picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    opts.split_t1 = 0.5;
    const PicardResult split = picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    CHECK(mean_y0(whole.solution) == doctest::Approx(mean_y0(split.solution)).epsilon(1e-10));

    opts.split_t1 = 1.0;
    CHECK_THROWS_AS(picard_solve(gen, TerminalSpec::constant(1.0), ens, basis_for(ens), opts), ParameterError);
}

TEST_CASE("exhausting max_iter returns the best iterate")
{
    const PathEnsemble ens = generate_ensemble(1000, 10, 1, 1.0, 2);
    PicardOptions opts;
    opts.tol = 1e-300;
    opts.max_iter = 3;
    const PicardResult r =
        picard_solve(Generator::linear(0.5, 0.0, 0.0, 1, 1), TerminalSpec::constant(1.0), ens, basis_for(ens), opts);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 3);
    CHECK(r.report.dist_y.size() == 3);
}

TEST_CASE("strong linear growth is reported as divergence")
{
    const PathEnsemble ens = generate_ensemble(500, 10, 1, 1.0, 2);
    CHECK_THROWS_AS(
        picard_solve(Generator::linear(20.0, 0.0, 0.0, 1, 1), TerminalSpec::constant(1.0), ens, basis_for(ens)),
        DivergenceError);
}

TEST_CASE("large z coefficients are flagged")
{
    const PathEnsemble ens = generate_ensemble(500, 4, 1, 1.0, 2);
    PicardOptions opts;
    opts.max_iter = 2;
    const PicardResult r =
        picard_solve(Generator::linear(0.0, 3.0, 0.0, 1, 1), TerminalSpec::coordinate(0), ens, basis_for(ens), opts);
    CHECK(r.report.warnings.size() == 1);
}

TEST_CASE("solver input errors")
{
    const PathEnsemble ens = generate_ensemble(500, 4, 1, 1.0, 2);
    CHECK_THROWS_AS(picard_solve(Generator::zero(1, 2), TerminalSpec::coordinate(0), ens, basis_for(ens)),
                    DimensionError);
    CHECK_THROWS_AS(picard_solve(Generator::zero(2, 1), TerminalSpec::coordinate(0), ens, basis_for(ens)),
                    DimensionError);

    register_generator(
        "test_nan",
        [](double, std::span<const double>, std::span<const double>, std::span<const double>, std::span<double> out) {
            out[0] = std::numeric_limits<double>::quiet_NaN();
        },
        0.0);
    CHECK_THROWS_AS(picard_solve(Generator::custom("test_nan", 1, 1), TerminalSpec::constant(0.0), ens, basis_for(ens)),
                    NumericalError);
}

TEST_CASE("solution CSV layout")
{
    const PathEnsemble ens = generate_ensemble(50, 3, 2, 1.0, 2);
    const PicardResult r = picard_solve(Generator::zero(1, 2), TerminalSpec::coordinate(0), ens, basis_for(ens));
    const auto f = std::filesystem::temp_directory_path() / "bsde_lab_solution_test.csv";
    write_solution_csv(r.solution, f, 2);
    std::ifstream in(f);
    std::string line;
    std::getline(in, line);
    CHECK(line == "path,step,t,y_1,z_11,z_12");
    std::size_t rows = 0;
    std::string last;
    while (std::getline(in, line)) {
        ++rows;
        last = line;
    }
    CHECK(rows == 2 * 4);
    CHECK(last.substr(last.size() - 2) == ",,");
}

#include "bsde/errors.hpp"
#include "bsde/paths.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace bsde;

namespace {

std::filesystem::path scratch(const char* name)
{
    const auto dir = std::filesystem::temp_directory_path() / "bsde_lab_paths_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("time grid")
{
    const TimeGrid g(0.7, 3);
    CHECK(g.time(0) == 0.0);
    CHECK(g.time(3) == 0.7);
    CHECK(g.time(1) < g.time(2));
    CHECK(g.dt() == doctest::Approx(0.7 / 3));
    CHECK_THROWS_AS(TimeGrid(0.0, 3), ParameterError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), ParameterError);
}

TEST_CASE("paths start at zero and accumulate their increments")
{
    const PathEnsemble ens = generate_ensemble(64, 12, 3, 2.0, 5);
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        for (double b : ens.value(m, 0)) CHECK(b == 0.0);
        for (std::size_t i = 0; i < 12; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(ens.value(m, i + 1)[j] == ens.value(m, i)[j] + ens.increment(m, i)[j]);
            }
        }
    }
}

TEST_CASE("generation is a pure function of its arguments")
{
    const PathEnsemble a = generate_ensemble(100, 7, 2, 1.0, 123);
    const PathEnsemble b = generate_ensemble(100, 7, 2, 1.0, 123);
    const PathEnsemble c = generate_ensemble(100, 7, 2, 1.0, 124);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    // a prefix of a larger ensemble reproduces the smaller one path by path
    const PathEnsemble big = generate_ensemble(300, 7, 2, 1.0, 123);
    for (std::size_t i = 0; i < a.increments().size(); ++i) {
        CHECK(a.increments()[i] == big.increments()[i]);
    }
}

TEST_CASE("generation does not depend on the worker count")
{
    setenv("BSDE_LAB_THREADS", "1", 1);
    const PathEnsemble one = generate_ensemble(5000, 3, 2, 1.0, 77);
    setenv("BSDE_LAB_THREADS", "4", 1);
    const PathEnsemble four = generate_ensemble(5000, 3, 2, 1.0, 77);
    unsetenv("BSDE_LAB_THREADS");
    CHECK(one == four);
}

TEST_CASE("increment statistics")
{
    const PathEnsemble ens = generate_ensemble(100000, 1, 1, 1.0, 2024);
    const auto& x = ens.increments();
    double s = 0.0, ss = 0.0;
    for (double v : x) {
        s += v;
        ss += v * v;
    }
    const double n = static_cast<double>(x.size());
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    CHECK(var >= 0.99);
    CHECK(var <= 1.01);
    CHECK(std::abs(mean) <= 5.0 / std::sqrt(n));
}

TEST_CASE("coordinates are uncorrelated")
{
    const std::size_t M = 20000;
    const PathEnsemble ens = generate_ensemble(M, 4, 2, 1.0, 99);
    const double dt = ens.grid().dt();
    for (std::size_t i = 0; i < 4; ++i) {
        double c = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            c += ens.increment(m, i)[0] * ens.increment(m, i)[1];
        }
        const double corr = c / static_cast<double>(M) / dt;
        CHECK(std::abs(corr) <= 5.0 / std::sqrt(static_cast<double>(M)));
    }
}

TEST_CASE("antithetic pairs")
{
    const PathEnsemble ens = generate_ensemble(9, 5, 2, 1.0, 3, true);
    for (std::size_t m = 1; m < 9; m += 2) {
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(ens.increment(m, i)[j] == -ens.increment(m - 1, i)[j]);
            }
        }
    }
}

TEST_CASE("ensemble file round trip")
{
    const PathEnsemble ens = generate_ensemble(33, 9, 2, 1.5, 8);
    const auto f = scratch("roundtrip.bin");
    save_ensemble(ens, f);
    CHECK(std::filesystem::file_size(f) == 48 + 33 * 9 * 2 * 8);
    const PathEnsemble back = load_ensemble(f);
    CHECK(back == ens);
    CHECK(back.grid().horizon() == 1.5);
    CHECK(back.seed() == 8);
}

TEST_CASE("ensemble file errors")
{
    const PathEnsemble ens = generate_ensemble(2, 3, 1, 1.0, 8);
    const auto f = scratch("broken.bin");
    save_ensemble(ens, f);
    std::string bytes;
    {
        std::ifstream in(f, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    auto write = [&](const std::string& b) {
        std::ofstream out(f, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };

    std::string magic = bytes;
    magic.replace(0, 4, "XXXX");
    write(magic);
    CHECK_THROWS_AS(load_ensemble(f), FormatError);

    std::string version = bytes;
    version[4] = 2;
    write(version);
    CHECK_THROWS_AS(load_ensemble(f), FormatError);

    // header says M = 2 but only one path follows
    write(bytes.substr(0, bytes.size() - 3 * 8));
    CHECK_THROWS_AS(load_ensemble(f), LengthError);

    write(bytes.substr(0, 20));
    CHECK_THROWS_AS(load_ensemble(f), LengthError);

    CHECK_THROWS_AS(load_ensemble(scratch("does_not_exist.bin")), Error);
}

TEST_CASE("invalid generation parameters")
{
    CHECK_THROWS_AS(generate_ensemble(0, 1, 1, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(generate_ensemble(1, 0, 1, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(generate_ensemble(1, 1, 0, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(generate_ensemble(1, 1, 1, -1.0, 1), ParameterError);
    CHECK_THROWS_AS(generate_ensemble(std::size_t{1} << 62, 1 << 10, 1 << 10, 1.0, 1), Error);
}

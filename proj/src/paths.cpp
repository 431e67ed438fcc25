#include "bsde/paths.hpp"

#include "bsde/errors.hpp"
#include "bsde/parallel.hpp"

#include <fmt/format.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <random>

namespace bsde {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : T_(horizon), N_(steps)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ParameterError("time horizon T must be positive and finite");
    }
    if (steps < 1) {
        throw ParameterError("time grid needs N >= 1 steps");
    }
}

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, std::uint64_t seed,
                           std::vector<double> increments)
    : grid_(grid), M_(paths), d_(dim), seed_(seed), increments_(std::move(increments))
{
    if (M_ < 1 || d_ < 1) {
        throw ParameterError("ensemble needs M >= 1 and d >= 1");
    }
    const std::size_t N = grid_.steps();
    if (increments_.size() != M_ * N * d_) {
        throw LengthError(fmt::format("ensemble expects {} increments, got {}", M_ * N * d_,
                                      increments_.size()));
    }
    values_.assign(M_ * (N + 1) * d_, 0.0);
    for (std::size_t m = 0; m < M_; ++m) {
        double* row = values_.data() + m * (N + 1) * d_;
        const double* inc = increments_.data() + m * N * d_;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < d_; ++j) {
                row[(i + 1) * d_ + j] = row[i * d_ + j] + inc[i * d_ + j];
            }
        }
    }
}

PathEnsemble generate_ensemble(std::size_t paths, std::size_t steps, std::size_t dim, double horizon,
                               std::uint64_t seed, bool antithetic)
{
    const TimeGrid grid(horizon, steps);
    if (paths < 1 || dim < 1) {
        throw ParameterError("generate_ensemble needs M >= 1 and d >= 1");
    }
    const std::size_t per_path = steps * dim;
    std::vector<double> inc;
    try {
        if (paths > inc.max_size() / per_path) {
            throw std::bad_alloc();
        }
        inc.resize(paths * per_path);
    } catch (const std::bad_alloc&) {
        throw Error(fmt::format("cannot allocate ensemble of {} x {} x {} doubles", paths, steps, dim));
    }
    const double sd = std::sqrt(grid.dt());

    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t m = begin; m < end; ++m) {
            double* out = inc.data() + m * per_path;
            if (antithetic && (m % 2 == 1)) {
                // filled from its partner below once the partner exists
                continue;
            }
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(m >> 32)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> normal(0.0, sd);
            for (std::size_t i = 0; i < per_path; ++i) {
                out[i] = normal(rng);
            }
        }
    });
    if (antithetic) {
        for (std::size_t m = 1; m < paths; m += 2) {
            const double* src = inc.data() + (m - 1) * per_path;
            double* out = inc.data() + m * per_path;
            for (std::size_t i = 0; i < per_path; ++i) {
                out[i] = -src[i];
            }
        }
    }
    return PathEnsemble(grid, paths, dim, seed, std::move(inc));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'B', 'S', 'D', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8 + 4 + 4 + 8 + 8;

template <typename U>
void put_le(std::string& buf, U x)
{
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        buf.push_back(static_cast<char>((x >> (8 * b)) & 0xff));
    }
}

template <typename U>
U get_le(const unsigned char* p)
{
    U x = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        x |= static_cast<U>(p[b]) << (8 * b);
    }
    return x;
}

}  // namespace

void save_ensemble(const PathEnsemble& ens, const std::filesystem::path& path)
{
    std::string buf;
    buf.reserve(kHeaderBytes + ens.increments().size() * 8);
    buf.append(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(buf, kVersion);
    put_le<std::uint64_t>(buf, ens.paths());
    put_le<std::uint64_t>(buf, ens.grid().steps());
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(ens.dim()));
    put_le<std::uint32_t>(buf, 0);
    put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(ens.grid().horizon()));
    put_le<std::uint64_t>(buf, ens.seed());
    for (double x : ens.increments()) {
        put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(x));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

PathEnsemble load_ensemble(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kHeaderBytes) {
        if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
            throw FormatError("bad magic in " + path.string());
        }
        throw LengthError(fmt::format("ensemble file {} truncated inside header", path.string()));
    }
    if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
        throw FormatError("bad magic in " + path.string());
    }
    const unsigned char* p = bytes.data() + 4;
    const auto version = get_le<std::uint32_t>(p);
    if (version != kVersion) {
        throw FormatError(fmt::format("unsupported ensemble version {}", version));
    }
    const auto M = get_le<std::uint64_t>(p + 4);
    const auto N = get_le<std::uint64_t>(p + 12);
    const auto d = get_le<std::uint32_t>(p + 20);
    const auto T = std::bit_cast<double>(get_le<std::uint64_t>(p + 28));
    const auto seed = get_le<std::uint64_t>(p + 36);

    const std::size_t payload = bytes.size() - kHeaderBytes;
    if (M == 0 || N == 0 || d == 0) {
        throw FormatError("ensemble header has a zero dimension");
    }
    const long double expected = static_cast<long double>(M) * N * d * 8;
    if (static_cast<long double>(payload) != expected) {
        throw LengthError(fmt::format("ensemble payload holds {} bytes, header implies {}", payload,
                                      static_cast<double>(expected)));
    }
    std::vector<double> inc(static_cast<std::size_t>(M * N * d));
    const unsigned char* q = bytes.data() + kHeaderBytes;
    for (std::size_t i = 0; i < inc.size(); ++i) {
        inc[i] = std::bit_cast<double>(get_le<std::uint64_t>(q + 8 * i));
    }
    return PathEnsemble(TimeGrid(T, N), M, d, seed, std::move(inc));
}

}  // namespace bsde

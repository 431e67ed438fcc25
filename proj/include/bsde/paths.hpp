#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bsde {

/// Uniform grid t_i = i T / N on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    [[nodiscard]] double horizon() const noexcept { return T_; }
    [[nodiscard]] std::size_t steps() const noexcept { return N_; }
    [[nodiscard]] double dt() const noexcept { return T_ / static_cast<double>(N_); }
    [[nodiscard]] double time(std::size_t i) const noexcept
    {
        return i == N_ ? T_ : T_ * static_cast<double>(i) / static_cast<double>(N_);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double T_;
    std::size_t N_;
};

/// M Brownian paths in R^d sampled on a TimeGrid. Immutable once built.
class PathEnsemble {
public:
    /// Builds B from the increments (path-major, then step, then coordinate).
    PathEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, std::uint64_t seed,
                 std::vector<double> increments);

    [[nodiscard]] std::size_t paths() const noexcept { return M_; }
    [[nodiscard]] std::size_t dim() const noexcept { return d_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// Delta B_i = B_{i+1} - B_i for path m, step i < N.
    [[nodiscard]] std::span<const double> increment(std::size_t m, std::size_t i) const noexcept
    {
        return {increments_.data() + (m * grid_.steps() + i) * d_, d_};
    }
    /// B_{t_i} for path m, i <= N.
    [[nodiscard]] std::span<const double> value(std::size_t m, std::size_t i) const noexcept
    {
        return {values_.data() + (m * (grid_.steps() + 1) + i) * d_, d_};
    }
    [[nodiscard]] const std::vector<double>& increments() const noexcept { return increments_; }

    friend bool operator==(const PathEnsemble& a, const PathEnsemble& b)
    {
        return a.grid_ == b.grid_ && a.M_ == b.M_ && a.d_ == b.d_ && a.seed_ == b.seed_ &&
               a.increments_ == b.increments_;
    }

private:
    TimeGrid grid_;
    std::size_t M_;
    std::size_t d_;
    std::uint64_t seed_;
    std::vector<double> increments_;
    std::vector<double> values_;
};

/// Independent N(0, T/N) increments; path m draws from a substream keyed by
/// (seed, m), so the result does not depend on the thread count. With
/// antithetic set, path 2j+1 is the negation of path 2j.
[[nodiscard]] PathEnsemble generate_ensemble(std::size_t paths, std::size_t steps, std::size_t dim,
                                             double horizon, std::uint64_t seed,
                                             bool antithetic = false);

/// Binary format: "BSDE", u32 version = 1, u64 M, u64 N, u32 d, u32 0, f64 T,
/// u64 seed, then M*N*d little-endian f64 increments.
void save_ensemble(const PathEnsemble& ens, const std::filesystem::path& path);
[[nodiscard]] PathEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace bsde

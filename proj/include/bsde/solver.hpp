#pragma once

#include "bsde/generator.hpp"
#include "bsde/paths.hpp"
#include "bsde/regression.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bsde {

// ---------------------------------------------------------------------------
// Terminal conditions xi = Phi(B_T)
// ---------------------------------------------------------------------------

struct CoordinateTerminal {
    std::size_t index = 0;
};
struct SquareNormTerminal {};
struct ConstantTerminal {
    double value = 0.0;
};
using TerminalFn = std::function<void(std::span<const double> brownian, std::span<double> out)>;
struct CustomTerminal {
    std::string name;
    TerminalFn fn;
};

using TerminalKind = std::variant<CoordinateTerminal, SquareNormTerminal, ConstantTerminal, CustomTerminal>;

struct TerminalSpec {
    TerminalKind kind = ConstantTerminal{};
    std::size_t k = 1;

    static TerminalSpec coordinate(std::size_t j) { return {CoordinateTerminal{j}, 1}; }
    static TerminalSpec square_norm() { return {SquareNormTerminal{}, 1}; }
    static TerminalSpec constant(double v, std::size_t k = 1) { return {ConstantTerminal{v}, k}; }

    /// Writes xi for the given B_T into out (length k).
    void eval(std::span<const double> brownian, std::span<double> out) const;
    [[nodiscard]] std::string describe() const;
};

// ---------------------------------------------------------------------------
// Discrete solution arrays
// ---------------------------------------------------------------------------

class DiscreteSolution {
public:
    DiscreteSolution(TimeGrid grid, std::size_t paths, std::size_t k, std::size_t d);

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t paths() const noexcept { return M_; }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t d() const noexcept { return d_; }
    [[nodiscard]] std::size_t steps() const noexcept { return grid_.steps(); }

    /// y at (path m, step i <= N), length k.
    [[nodiscard]] std::span<double> y(std::size_t m, std::size_t i) noexcept
    {
        return {y_.data() + (m * (steps() + 1) + i) * k_, k_};
    }
    [[nodiscard]] std::span<const double> y(std::size_t m, std::size_t i) const noexcept
    {
        return {y_.data() + (m * (steps() + 1) + i) * k_, k_};
    }
    /// z at (path m, step i < N), row-major k x d.
    [[nodiscard]] std::span<double> z(std::size_t m, std::size_t i) noexcept
    {
        return {z_.data() + (m * steps() + i) * k_ * d_, k_ * d_};
    }
    [[nodiscard]] std::span<const double> z(std::size_t m, std::size_t i) const noexcept
    {
        return {z_.data() + (m * steps() + i) * k_ * d_, k_ * d_};
    }

    [[nodiscard]] std::vector<double>& y_data() noexcept { return y_; }
    [[nodiscard]] const std::vector<double>& y_data() const noexcept { return y_; }
    [[nodiscard]] std::vector<double>& z_data() noexcept { return z_; }
    [[nodiscard]] const std::vector<double>& z_data() const noexcept { return z_; }

    [[nodiscard]] bool all_finite() const;

private:
    TimeGrid grid_;
    std::size_t M_;
    std::size_t k_;
    std::size_t d_;
    std::vector<double> y_;
    std::vector<double> z_;
};

/// Checks that two solutions share grid and shape; throws DimensionError otherwise.
void require_same_shape(const DiscreteSolution& a, const DiscreteSolution& b);

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// One backward sweep with the y-argument of g frozen at frozen_y
/// (M x (N+1) x k, or empty for zero). z is estimated explicitly before y.
[[nodiscard]] DiscreteSolution solve_frozen_bsde(const Generator& gen, std::span<const double> frozen_y,
                                                 const TerminalSpec& terminal, const PathEnsemble& ens,
                                                 const BasisSpec& basis, bool deterministic = true);

struct ZeroInit {};
struct ConstantFieldInit {
    double value = 0.0;
};
using PicardInit = std::variant<ZeroInit, ConstantFieldInit>;

struct PicardOptions {
    double p = 2.0;
    double tol = 1e-4;
    int max_iter = 25;
    PicardInit init = ZeroInit{};
    /// Horizon split at T1: windows of length T - T1 solved backward from T.
    std::optional<double> split_t1;
    bool deterministic = true;
};

struct PicardWindow {
    std::size_t first_step = 0;
    std::size_t last_step = 0;
    int iterations = 0;
    bool converged = false;
};

struct PicardReport {
    int iterations = 0;
    std::vector<double> dist_y;
    std::vector<double> dist_z;
    std::vector<double> sp_norms;
    bool converged = false;
    std::vector<std::string> warnings;
    std::vector<PicardWindow> windows;
};

struct PicardResult {
    DiscreteSolution solution;
    PicardReport report;
};

/// dist_y(n) compares iterates n+1 and n. Exhausting max_iter returns the
/// iterate with the smallest dist_y and converged = false; five consecutive
/// increases of dist_y throw DivergenceError.
[[nodiscard]] PicardResult picard_solve(const Generator& gen, const TerminalSpec& terminal,
                                        const PathEnsemble& ens, const BasisSpec& basis,
                                        const PicardOptions& opts = {});

/// Default ridge for a given ensemble size.
[[nodiscard]] inline double default_ridge(std::size_t paths) { return 1e-10 * static_cast<double>(paths); }

// CSV: path,step,t,y_1..y_k,z_11..z_kd (z empty at step N). max_paths = 0 writes all.
void write_solution_csv(const DiscreteSolution& sol, const std::filesystem::path& path,
                        std::size_t max_paths = 0);
// CSV: iter,dist_y,dist_z,sp_norm
void write_picard_report_csv(const PicardReport& report, const std::filesystem::path& path);

}  // namespace bsde

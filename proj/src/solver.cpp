#include "bsde/solver.hpp"

#include "bsde/analysis.hpp"
#include "bsde/csv.hpp"
#include "bsde/errors.hpp"
#include "bsde/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bsde {

// ---------------------------------------------------------------------------
// TerminalSpec
// ---------------------------------------------------------------------------

void TerminalSpec::eval(std::span<const double> brownian, std::span<double> out) const
{
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, CoordinateTerminal>) {
                if (t.index >= brownian.size()) {
                    throw DimensionError(fmt::format("terminal coordinate {} out of range for d = {}", t.index,
                                                     brownian.size()));
                }
                std::fill(out.begin(), out.end(), brownian[t.index]);
            } else if constexpr (std::is_same_v<T, SquareNormTerminal>) {
                double s = 0.0;
                for (double b : brownian) s += b * b;
                std::fill(out.begin(), out.end(), s);
            } else if constexpr (std::is_same_v<T, ConstantTerminal>) {
                std::fill(out.begin(), out.end(), t.value);
            } else {
                if (!t.fn) {
                    throw ParameterError("custom terminal '" + t.name + "' has no callback");
                }
                t.fn(brownian, out);
            }
        },
        kind);
}

std::string TerminalSpec::describe() const
{
    return std::visit(
        [&](const auto& t) -> std::string {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, CoordinateTerminal>) {
                return fmt::format("Coordinate({})", t.index);
            } else if constexpr (std::is_same_v<T, SquareNormTerminal>) {
                return "SquareNorm";
            } else if constexpr (std::is_same_v<T, ConstantTerminal>) {
                return fmt::format("Constant({})", t.value);
            } else {
                return "Custom(" + t.name + ")";
            }
        },
        kind);
}

// ---------------------------------------------------------------------------
// DiscreteSolution
// ---------------------------------------------------------------------------

DiscreteSolution::DiscreteSolution(TimeGrid grid, std::size_t paths, std::size_t k, std::size_t d)
    : grid_(grid), M_(paths), k_(k), d_(d)
{
    if (M_ < 1 || k_ < 1 || d_ < 1) {
        throw ParameterError("solution needs M, k, d >= 1");
    }
    y_.assign(M_ * (grid_.steps() + 1) * k_, 0.0);
    z_.assign(M_ * grid_.steps() * k_ * d_, 0.0);
}

bool DiscreteSolution::all_finite() const
{
    return std::all_of(y_.begin(), y_.end(), [](double x) { return std::isfinite(x); }) &&
           std::all_of(z_.begin(), z_.end(), [](double x) { return std::isfinite(x); });
}

void require_same_shape(const DiscreteSolution& a, const DiscreteSolution& b)
{
    if (!(a.grid() == b.grid()) || a.paths() != b.paths() || a.k() != b.k() || a.d() != b.d()) {
        throw DimensionError(fmt::format("solution shapes differ: M {} vs {}, N {} vs {}, k {} vs {}, d {} vs {}",
                                         a.paths(), b.paths(), a.steps(), b.steps(), a.k(), b.k(), a.d(),
                                         b.d()));
    }
}

// ---------------------------------------------------------------------------
// Backward sweep
// ---------------------------------------------------------------------------

namespace {

class StepRegressors {
public:
    StepRegressors(const PathEnsemble& ens, const BasisSpec& basis, bool deterministic)
        : ens_(ens), basis_(basis), deterministic_(deterministic), regs_(ens.grid().steps())
    {
    }

    const Regressor& at(std::size_t i)
    {
        auto& slot = regs_[i];
        if (!slot) {
            const std::size_t M = ens_.paths();
            const std::size_t d = ens_.dim();
            Eigen::MatrixXd state(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(d));
            for (std::size_t m = 0; m < M; ++m) {
                const auto b = ens_.value(m, i);
                for (std::size_t j = 0; j < d; ++j) {
                    state(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = b[j];
                }
            }
            // B_0 is deterministic, so only the sample mean is identifiable there.
            const BasisSpec b = i == 0 ? BasisSpec{0, 0.0} : basis_;
            slot.emplace(state, b, deterministic_);
        }
        return *slot;
    }

private:
    const PathEnsemble& ens_;
    BasisSpec basis_;
    bool deterministic_;
    std::vector<std::optional<Regressor>> regs_;
};

void set_terminal(DiscreteSolution& sol, const TerminalSpec& terminal, const PathEnsemble& ens)
{
    const std::size_t N = sol.steps();
    for (std::size_t m = 0; m < sol.paths(); ++m) {
        terminal.eval(ens.value(m, N), sol.y(m, N));
        for (double v : sol.y(m, N)) {
            if (!std::isfinite(v)) {
                throw NumericalError(fmt::format("terminal value is not finite on path {}", m));
            }
        }
    }
}

// Fills steps [first, last) of sol; sol.y at step last must already hold the
// window's terminal values.
void sweep(const Generator& gen, std::span<const double> frozen, const PathEnsemble& ens, StepRegressors& regs,
           std::size_t first, std::size_t last, DiscreteSolution& sol)
{
    const std::size_t M = sol.paths();
    const std::size_t k = sol.k();
    const std::size_t d = sol.d();
    const std::size_t N = sol.steps();
    const double dt = sol.grid().dt();
    const auto Mi = static_cast<Eigen::Index>(M);
    const auto ki = static_cast<Eigen::Index>(k);
    const auto di = static_cast<Eigen::Index>(d);

    Eigen::MatrixXd next(Mi, ki);
    Eigen::MatrixXd zt(Mi, ki * di);
    for (std::size_t step = last; step-- > first;) {
        const Regressor& reg = regs.at(step);
        for (std::size_t m = 0; m < M; ++m) {
            const auto y1 = sol.y(m, step + 1);
            for (std::size_t a = 0; a < k; ++a) {
                next(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(a)) = y1[a];
            }
        }
        const Eigen::MatrixXd ey = reg.fit(next);
        parallel_for(M, [&](std::size_t m0, std::size_t m1) {
            for (std::size_t m = m0; m < m1; ++m) {
                const auto dB = ens.increment(m, step);
                const auto mi = static_cast<Eigen::Index>(m);
                for (Eigen::Index a = 0; a < ki; ++a) {
                    const double r = next(mi, a) - ey(mi, a);
                    for (Eigen::Index j = 0; j < di; ++j) {
                        zt(mi, a * di + j) = r * dB[static_cast<std::size_t>(j)] / dt;
                    }
                }
            }
        });
        const Eigen::MatrixXd zf = reg.fit(zt);

        const double t = sol.grid().time(step);
        bool finite = true;
        std::vector<char> bad(M, 0);
        parallel_for(M, [&](std::size_t m0, std::size_t m1) {
            std::vector<double> zero_y(k, 0.0);
            std::vector<double> g(k);
            for (std::size_t m = m0; m < m1; ++m) {
                const auto mi = static_cast<Eigen::Index>(m);
                auto z = sol.z(m, step);
                for (std::size_t c = 0; c < k * d; ++c) {
                    z[c] = zf(mi, static_cast<Eigen::Index>(c));
                }
                std::span<const double> fy = frozen.empty()
                                                 ? std::span<const double>(zero_y)
                                                 : frozen.subspan((m * (N + 1) + step) * k, k);
                gen.eval(t, ens.value(m, step), fy, z, g);
                auto y = sol.y(m, step);
                for (std::size_t a = 0; a < k; ++a) {
                    y[a] = ey(mi, static_cast<Eigen::Index>(a)) + g[a] * dt;
                    if (!std::isfinite(y[a]) || !std::isfinite(z[a * d])) {
                        bad[m] = 1;
                    }
                }
            }
        });
        for (char b : bad) finite = finite && b == 0;
        if (!finite) {
            throw NumericalError(fmt::format("non-finite solution value at time index {} (t = {})", step, t));
        }
    }
}

void check_dimensions(const Generator& gen, const TerminalSpec& terminal, const PathEnsemble& ens)
{
    if (gen.k() != terminal.k) {
        throw DimensionError(fmt::format("generator has k = {} but terminal has k = {}", gen.k(), terminal.k));
    }
    if (gen.d() != ens.dim()) {
        throw DimensionError(fmt::format("generator has d = {} but ensemble has d = {}", gen.d(), ens.dim()));
    }
}

}  // namespace

DiscreteSolution solve_frozen_bsde(const Generator& gen, std::span<const double> frozen_y,
                                   const TerminalSpec& terminal, const PathEnsemble& ens, const BasisSpec& basis,
                                   bool deterministic)
{
    check_dimensions(gen, terminal, ens);
    DiscreteSolution sol(ens.grid(), ens.paths(), terminal.k, ens.dim());
    if (!frozen_y.empty() && frozen_y.size() != sol.y_data().size()) {
        throw DimensionError(fmt::format("frozen y has {} entries, expected {}", frozen_y.size(),
                                         sol.y_data().size()));
    }
    set_terminal(sol, terminal, ens);
    StepRegressors regs(ens, basis, deterministic);
    sweep(gen, frozen_y, ens, regs, 0, sol.steps(), sol);
    return sol;
}

PicardResult picard_solve(const Generator& gen, const TerminalSpec& terminal, const PathEnsemble& ens,
                          const BasisSpec& basis, const PicardOptions& opts)
{
    if (!(opts.tol > 0.0)) {
        throw ParameterError("picard tol must be > 0");
    }
    if (opts.max_iter < 1) {
        throw ParameterError("picard max_iter must be >= 1");
    }
    if (!(opts.p >= 1.0)) {
        throw ParameterError("picard p must be >= 1");
    }
    check_dimensions(gen, terminal, ens);

    const TimeGrid& grid = ens.grid();
    const double T = grid.horizon();
    const std::size_t N = grid.steps();
    PicardReport report;

    double lip = 0.0;
    if (auto a = gen.analytic_lipschitz_z()) {
        lip = *a;
    } else {
        Sampler s;
        s.count = 2000;
        s.horizon = T;
        lip = estimate_lipschitz_z(gen, s).sampled;
    }
    if (!std::isfinite(lip)) {
        throw ParameterError("generator has no finite Lipschitz constant in z");
    }
    if (grid.dt() * lip > 0.5) {
        report.warnings.push_back(
            fmt::format("dt * C = {} exceeds 0.5; the explicit z step may be unstable", grid.dt() * lip));
    }

    std::size_t window = N;
    if (opts.split_t1) {
        const double t1 = *opts.split_t1;
        if (!(t1 < T)) {
            throw ParameterError("split T1 must be < T");
        }
        const double len = t1 > 0.0 ? T - t1 : T / 2.0;
        window = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(len / grid.dt())));
        window = std::min(window, N);
    }

    DiscreteSolution result(grid, ens.paths(), terminal.k, ens.dim());
    set_terminal(result, terminal, ens);
    const double init_value = std::holds_alternative<ConstantFieldInit>(opts.init)
                                  ? std::get<ConstantFieldInit>(opts.init).value
                                  : 0.0;
    const std::vector<double> init_field(result.y_data().size(), init_value);
    StepRegressors regs(ens, basis, opts.deterministic);

    bool all_converged = true;
    for (std::size_t last = N; last > 0;) {
        const std::size_t first = last > window ? last - window : 0;
        PicardWindow win{first, last, 0, false};

        DiscreteSolution prev = result;
        sweep(gen, init_field, ens, regs, first, last, prev);
        std::optional<DiscreteSolution> best;
        double best_dist = std::numeric_limits<double>::infinity();
        double last_dist = std::numeric_limits<double>::infinity();
        int increases = 0;
        for (int n = 1; n <= opts.max_iter; ++n) {
            DiscreteSolution next = prev;
            sweep(gen, prev.y_data(), ens, regs, first, last, next);
            const PicardDistance dist = picard_distance(next, prev, opts.p, first, last);
            report.dist_y.push_back(dist.dy);
            report.dist_z.push_back(dist.dz);
            report.sp_norms.push_back(lp_norms(next, opts.p).sp);
            ++report.iterations;
            win.iterations = n;
            if (dist.dy <= opts.tol) {
                win.converged = true;
                best = std::move(next);
                break;
            }
            if (dist.dy < best_dist) {
                best_dist = dist.dy;
                best = next;
            }
            increases = dist.dy > last_dist ? increases + 1 : 0;
            if (increases >= 5) {
                throw DivergenceError(fmt::format(
                    "Picard iteration diverging on steps [{}, {}]: dist_y rose 5 times in a row, now {} at n = {}",
                    first, last, dist.dy, n));
            }
            last_dist = dist.dy;
            prev = std::move(next);
        }
        result = std::move(*best);
        all_converged = all_converged && win.converged;
        report.windows.push_back(win);
        last = first;
    }
    report.converged = all_converged;
    return {std::move(result), std::move(report)};
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

void write_solution_csv(const DiscreteSolution& sol, const std::filesystem::path& path, std::size_t max_paths)
{
    std::vector<std::string> header{"path", "step", "t"};
    for (std::size_t a = 1; a <= sol.k(); ++a) {
        header.push_back(fmt::format("y_{}", a));
    }
    for (std::size_t a = 1; a <= sol.k(); ++a) {
        for (std::size_t j = 1; j <= sol.d(); ++j) {
            header.push_back(fmt::format("z_{}{}", a, j));
        }
    }
    CsvWriter w(path, header);
    const std::size_t M = max_paths == 0 ? sol.paths() : std::min(max_paths, sol.paths());
    const std::size_t N = sol.steps();
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t i = 0; i <= N; ++i) {
            w.cell(m).cell(i).cell(sol.grid().time(i));
            for (double v : sol.y(m, i)) {
                w.cell(v);
            }
            for (std::size_t c = 0; c < sol.k() * sol.d(); ++c) {
                if (i < N) {
                    w.cell(sol.z(m, i)[c]);
                } else {
                    w.empty();
                }
            }
            w.end_row();
        }
    }
}

void write_picard_report_csv(const PicardReport& report, const std::filesystem::path& path)
{
    CsvWriter w(path, {"iter", "dist_y", "dist_z", "sp_norm"});
    for (std::size_t n = 0; n < report.dist_y.size(); ++n) {
        w.cell(n + 1).cell(report.dist_y[n]).cell(report.dist_z[n]).cell(report.sp_norms[n]);
        w.end_row();
    }
}

}  // namespace bsde

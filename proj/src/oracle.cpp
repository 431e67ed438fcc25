#include "bsde/oracle.hpp"

#include "bsde/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace bsde {

Generator OracleInstance::generator() const
{
    if (const auto* lin = std::get_if<LinearDrift>(&kind)) {
        return Generator::linear(lin->a, 0.0, lin->c, 1, d);
    }
    return Generator::zero(1, d);
}

TerminalSpec OracleInstance::terminal() const
{
    return std::visit(
        [](const auto& o) -> TerminalSpec {
            using O = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<O, MartingaleCoordinate>) {
                return TerminalSpec::coordinate(o.index);
            } else if constexpr (std::is_same_v<O, MartingaleSquare>) {
                return TerminalSpec::square_norm();
            } else {
                return TerminalSpec::constant(o.v);
            }
        },
        kind);
}

OracleValue oracle_solution(const OracleInstance& inst, double t, std::span<const double> brownian)
{
    const double T = inst.horizon;
    if (!(t >= 0.0 && t <= T)) {
        throw ParameterError(fmt::format("oracle time {} outside [0, {}]", t, T));
    }
    if (brownian.size() != inst.d) {
        throw DimensionError(fmt::format("oracle expects d = {}, got {}", inst.d, brownian.size()));
    }
    OracleValue out;
    out.z.assign(inst.d, 0.0);
    std::visit(
        [&](const auto& o) {
            using O = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<O, MartingaleCoordinate>) {
                if (o.index >= inst.d) {
                    throw ParameterError("oracle coordinate out of range");
                }
                out.y = brownian[o.index];
                out.z[o.index] = 1.0;
            } else if constexpr (std::is_same_v<O, MartingaleSquare>) {
                if (inst.d != 1) {
                    throw ParameterError("MartingaleSquare oracle needs d = 1");
                }
                out.y = brownian[0] * brownian[0] + (T - t);
                out.z[0] = 2.0 * brownian[0];
            } else {
                const double s = T - t;
                const double e = std::exp(o.a * s);
                // expm1 keeps (e^{as} - 1)/a accurate as a -> 0
                const double growth = o.a == 0.0 ? s : std::expm1(o.a * s) / o.a;
                out.y = e * o.v + o.c * growth;
            }
        },
        inst.kind);
    return out;
}

DiscreteSolution oracle_discrete(const OracleInstance& inst, const PathEnsemble& ens)
{
    const TimeGrid& grid = ens.grid();
    if (std::abs(grid.horizon() - inst.horizon) > 0.0 || ens.dim() != inst.d) {
        throw DimensionError("oracle horizon or dimension differs from the ensemble");
    }
    DiscreteSolution sol(grid, ens.paths(), 1, inst.d);
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        for (std::size_t i = 0; i <= grid.steps(); ++i) {
            const OracleValue v = oracle_solution(inst, grid.time(i), ens.value(m, i));
            sol.y(m, i)[0] = v.y;
            if (i < grid.steps()) {
                auto z = sol.z(m, i);
                std::copy(v.z.begin(), v.z.end(), z.begin());
            }
        }
    }
    return sol;
}

OracleErrors compare_to_oracle(const DiscreteSolution& sol, const OracleInstance& inst, const PathEnsemble& ens,
                               double p)
{
    if (!(p >= 1.0)) {
        throw ParameterError("compare_to_oracle needs p >= 1");
    }
    if (sol.k() != 1 || sol.d() != inst.d || sol.paths() != ens.paths() || !(sol.grid() == ens.grid())) {
        throw DimensionError("solution shape does not match the oracle and ensemble");
    }
    const std::size_t M = sol.paths();
    const std::size_t N = sol.steps();
    const std::size_t d = sol.d();
    double sp = 0.0;
    double zsq = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double sup = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            const OracleValue v = oracle_solution(inst, sol.grid().time(i), ens.value(m, i));
            sup = std::max(sup, std::abs(sol.y(m, i)[0] - v.y));
            if (i < N) {
                const auto z = sol.z(m, i);
                for (std::size_t j = 0; j < d; ++j) {
                    zsq += (z[j] - v.z[j]) * (z[j] - v.z[j]);
                }
            }
        }
        sp += std::pow(sup, p);
    }
    OracleErrors e;
    e.sp_error = std::pow(sp / static_cast<double>(M), 1.0 / p);
    e.z_rms_error = std::sqrt(zsq / static_cast<double>(M * N * d));
    return e;
}

}  // namespace bsde

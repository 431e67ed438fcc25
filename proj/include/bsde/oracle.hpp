#pragma once

#include "bsde/generator.hpp"
#include "bsde/paths.hpp"
#include "bsde/solver.hpp"

#include <span>
#include <variant>
#include <vector>

namespace bsde {

/// g = 0, xi = B_T^(j): y = B_t^(j), z = e_j.
struct MartingaleCoordinate {
    std::size_t index = 0;
};
/// g = 0, xi = |B_T|^2 with d = 1: y = B_t^2 + T - t, z = 2 B_t.
struct MartingaleSquare {};
/// g = a y + c, xi = v: y = e^{a(T-t)} v + (c/a)(e^{a(T-t)} - 1), z = 0.
struct LinearDrift {
    double a = 0.0;
    double c = 0.0;
    double v = 0.0;
};

using OracleKind = std::variant<MartingaleCoordinate, MartingaleSquare, LinearDrift>;

struct OracleInstance {
    OracleKind kind;
    double horizon = 1.0;
    std::size_t d = 1;

    /// The BSDE data this oracle solves.
    [[nodiscard]] Generator generator() const;
    [[nodiscard]] TerminalSpec terminal() const;
};

struct OracleValue {
    double y = 0.0;
    std::vector<double> z;  ///< length d
};

/// Throws ParameterError for t outside [0, T].
[[nodiscard]] OracleValue oracle_solution(const OracleInstance& inst, double t, std::span<const double> brownian);

struct OracleErrors {
    double sp_error = 0.0;      ///< S^p norm of y - y_oracle
    double z_rms_error = 0.0;   ///< RMS of z - z_oracle over paths and steps < N
};

[[nodiscard]] OracleErrors compare_to_oracle(const DiscreteSolution& sol, const OracleInstance& inst,
                                             const PathEnsemble& ens, double p);

/// Fills a solution with the oracle evaluated along ens.
[[nodiscard]] DiscreteSolution oracle_discrete(const OracleInstance& inst, const PathEnsemble& ens);

}  // namespace bsde

#pragma once

#include "bsde/analysis.hpp"
#include "bsde/config.hpp"
#include "bsde/oracle.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string_view>

namespace bsde {

enum class Command { Check, Solve, OracleCompare, Bihari, Constants, GenPaths, ConvergenceStudy };

[[nodiscard]] std::optional<Command> parse_command(std::string_view name);
[[nodiscard]] const char* command_name(Command cmd) noexcept;

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand, writing its CSV artifacts into cfg.output_dir.
/// Returns kExitOk or kExitFailure (a check failed); configuration problems
/// throw ConfigError and runtime problems throw other bsde::Error types.
int run(Command cmd, const RunConfig& cfg, std::ostream& log);

// Pieces shared by the subcommands, exposed for tests.

/// Loads cfg.paths.paths_file when set, otherwise generates from cfg.paths.
[[nodiscard]] PathEnsemble make_ensemble(const RunConfig& cfg);

/// The y-modulus rho: the modulus block when present, otherwise the natural
/// one for the builtin generator family.
[[nodiscard]] Modulus default_rho(const RunConfig& cfg);

/// The growth envelope: the envelope block when present, otherwise derived
/// from the builtin generator family.
[[nodiscard]] EnvelopeA default_envelope(const RunConfig& cfg);

/// Closed-form reference matching the configured generator and terminal.
[[nodiscard]] OracleInstance derive_oracle(const RunConfig& cfg);

[[nodiscard]] ConstantsBundle constants_for(const RunConfig& cfg, const PathEnsemble& ens);

[[nodiscard]] PicardOptions picard_options(const RunConfig& cfg, const PathEnsemble& ens);
[[nodiscard]] BasisSpec basis_for(const RunConfig& cfg, std::size_t paths);

}  // namespace bsde

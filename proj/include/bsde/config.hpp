#pragma once

#include "bsde/generator.hpp"
#include "bsde/modulus.hpp"
#include "bsde/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsde {

struct PathsConfig {
    std::size_t M = 16384;
    std::size_t N = 50;
    std::size_t d = 1;
    double T = 1.0;
    std::uint64_t seed = 42;
    bool antithetic = false;
    std::optional<std::filesystem::path> paths_file;
};

struct SolverConfig {
    double p = 2.0;
    int basis_degree = 3;
    std::optional<double> ridge;  ///< default 1e-10 M
    double picard_tol = 1e-4;
    int picard_max_iter = 25;
    PicardInit init = ZeroInit{};
    bool split = false;
    std::optional<double> split_t1;  ///< default from the constants bundle
    bool deterministic_reduction = true;
    std::size_t export_paths = 0;  ///< 0 exports every path
};

struct ModulusConfig {
    Modulus base;
    std::optional<TransformKind> transform;

    /// base with the transform applied, if any.
    [[nodiscard]] Modulus resolve() const;
};

struct GeneratorConfig {
    std::string family;
    GeneratorFamily spec;
    std::size_t k = 1;
    std::size_t d = 1;

    [[nodiscard]] Generator build() const;
};

struct EnvelopeConfig {
    ModulusConfig psi;
    double lambda = 0.0;
    ProcessKind phi = ZeroProcess{};
    ProcessKind f = ZeroProcess{};
};

struct OsgoodConfig {
    double weight = 1.0;
    double u0 = 0.1;
    int decades = 8;
};

struct BihariConfig {
    int n_max = 60;
    std::size_t quad_steps = 2048;
    std::optional<double> m_bound;
    std::optional<double> t1;
};

struct StudyConfig {
    std::vector<std::size_t> M_values{1024, 4096, 16384};
    std::vector<std::size_t> N_values{10, 25, 50};
};

struct ConstantsConfig {
    double k_prime_p = 2.0;
    double k_doubleprime_p = 2.0;
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<double> c3;
    std::optional<double> lambda;
    std::optional<double> A;
};

struct CheckConfig {
    std::size_t samples = 20000;
    double radius = 5.0;
    std::uint64_t seed = 7;
};

struct RunConfig {
    PathsConfig paths;
    SolverConfig solver;
    GeneratorConfig generator;
    std::optional<TerminalSpec> terminal;
    std::optional<ModulusConfig> modulus;
    std::optional<EnvelopeConfig> envelope;
    OsgoodConfig osgood;
    BihariConfig bihari;
    StudyConfig study;
    ConstantsConfig constants;
    CheckConfig check;
    std::filesystem::path output_dir = ".";
};

/// Parses a JSON document. Unknown keys, type mismatches and a missing
/// generator block raise ConfigError naming the offending key. Relative file
/// names inside the document resolve against base_dir.
[[nodiscard]] RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

}  // namespace bsde

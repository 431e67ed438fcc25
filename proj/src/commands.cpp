#include "bsde/commands.hpp"

#include "bsde/csv.hpp"
#include "bsde/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace bsde {

namespace {

std::string sanitize(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::filesystem::path prepare_output(const RunConfig& cfg, const char* file)
{
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) {
        throw Error(fmt::format("cannot create output directory {}: {}", cfg.output_dir.string(), ec.message()));
    }
    return cfg.output_dir / file;
}

const TerminalSpec& require_terminal(const RunConfig& cfg)
{
    if (!cfg.terminal) {
        throw ConfigError("terminal required");
    }
    return *cfg.terminal;
}

Sampler sampler_for(const RunConfig& cfg, double horizon)
{
    Sampler s;
    s.count = cfg.check.samples;
    s.radius = cfg.check.radius;
    s.horizon = horizon;
    s.seed = cfg.check.seed;
    return s;
}

double terminal_moment(const TerminalSpec& terminal, const PathEnsemble& ens, double p)
{
    const std::size_t N = ens.grid().steps();
    std::vector<double> xi(terminal.k);
    double s = 0.0;
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        terminal.eval(ens.value(m, N), xi);
        double n2 = 0.0;
        for (double v : xi) n2 += v * v;
        s += std::pow(n2, p / 2.0);
    }
    return s / static_cast<double>(ens.paths());
}

PicardResult solve_with(const RunConfig& cfg, const PathEnsemble& ens)
{
    const Generator gen = cfg.generator.build();
    return picard_solve(gen, require_terminal(cfg), ens, basis_for(cfg, ens.paths()), picard_options(cfg, ens));
}

struct CheckRow {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string detail;
};

int run_check(const RunConfig& cfg, std::ostream& log)
{
    const double p = cfg.solver.p;
    const Generator gen = cfg.generator.build();
    const Modulus rho = default_rho(cfg);
    const EnvelopeA env = default_envelope(cfg);
    const PathEnsemble ens = make_ensemble(cfg);
    const Sampler sampler = sampler_for(cfg, ens.grid().horizon());
    std::vector<CheckRow> rows;

    const ShapeReport shape = check_shape(rho);
    rows.push_back({"check_shape", shape.concave_modulus(), shape.worst_violation,
                    fmt::format("rho={} nondecreasing={} concave={} zero_at_zero={}", rho.describe(),
                                shape.is_nondecreasing, shape.is_concave, shape.zero_at_zero)});

    const double u0 = std::min(cfg.osgood.u0, rho.domain_cap());
    const OsgoodResult os = osgood_classify(rho, cfg.osgood.weight, u0, cfg.osgood.decades);
    rows.push_back({"osgood_classify", os.verdict == OsgoodVerdict::Divergent, os.decay_exponent,
                    fmt::format("verdict={} weight={} u0={} decades={} tail_ratio={}{}", to_string(os.verdict),
                                cfg.osgood.weight, u0, cfg.osgood.decades, os.tail_ratio,
                                os.integrand_unbounded ? " integrand unbounded" : "")});

    const H1Report h1 = check_h1(gen, rho, p, sampler);
    rows.push_back({"check_h1", h1.passed, h1.max_ratio, fmt::format("tol={}", h1.tol)});

    const LipschitzReport lip = estimate_lipschitz_z(gen, sampler);
    const double lip_tol = check_tolerance(gen);
    const bool lip_ok = std::isfinite(lip.sampled) && (!lip.analytic || lip.sampled <= *lip.analytic + lip_tol);
    rows.push_back({"estimate_lipschitz_z", lip_ok, lip.sampled,
                    lip.analytic ? fmt::format("analytic={}", *lip.analytic) : std::string("analytic=none")});

    const H3Report h3 = check_h3(gen, ens, p);
    rows.push_back({"check_h3", std::isfinite(h3.estimate), h3.estimate,
                    fmt::format("std_error={} half_sample={} {}", h3.std_error, h3.half_estimate,
                                h3.stable ? "stable" : "unstable across ensemble sizes")});

    const EnvelopeReport er = verify_envelope(gen, env, p, ens, sampler);
    rows.push_back({"verify_envelope", er.passed, er.max_defect,
                    fmt::format("psi={} lambda={} tol={}", env.psi.describe(), env.lambda, er.tol)});

    CsvWriter w(prepare_output(cfg, "check_report.csv"), {"check", "status", "value", "detail"});
    bool all = true;
    for (const auto& r : rows) {
        w.cell(r.name).cell(r.passed ? "PASS" : "FAIL").cell(r.value).cell(sanitize(r.detail));
        w.end_row();
        log << fmt::format("{:<22} {}  {}\n", r.name, r.passed ? "PASS" : "FAIL", r.detail);
        all = all && r.passed;
    }
    return all ? kExitOk : kExitFailure;
}

void write_summary(const RunConfig& cfg, const PicardResult& res)
{
    const LpNorms norms = lp_norms(res.solution, cfg.solver.p);
    double y0 = 0.0;
    for (std::size_t m = 0; m < res.solution.paths(); ++m) {
        y0 += res.solution.y(m, 0)[0];
    }
    y0 /= static_cast<double>(res.solution.paths());
    CsvWriter w(prepare_output(cfg, "solve_summary.csv"), {"key", "value"});
    w.cell("iterations").cell(res.report.iterations);
    w.end_row();
    w.cell("converged").cell(res.report.converged ? "true" : "false");
    w.end_row();
    w.cell("windows").cell(res.report.windows.size());
    w.end_row();
    w.cell("y0_mean").cell(y0);
    w.end_row();
    w.cell("sp_norm").cell(norms.sp);
    w.end_row();
    w.cell("mp_norm").cell(norms.mp);
    w.end_row();
    for (const auto& warning : res.report.warnings) {
        w.cell("warning").cell(sanitize(warning));
        w.end_row();
    }
}

int run_solve(const RunConfig& cfg, std::ostream& log)
{
    const PathEnsemble ens = make_ensemble(cfg);
    const PicardResult res = solve_with(cfg, ens);
    write_solution_csv(res.solution, prepare_output(cfg, "solution.csv"), cfg.solver.export_paths);
    write_picard_report_csv(res.report, prepare_output(cfg, "picard_report.csv"));
    write_summary(cfg, res);
    for (const auto& warning : res.report.warnings) {
        log << "warning: " << warning << '\n';
    }
    log << fmt::format("solve: {} iterations, converged={}\n", res.report.iterations, res.report.converged);
    return kExitOk;
}

int run_oracle_compare(const RunConfig& cfg, std::ostream& log)
{
    const OracleInstance inst = derive_oracle(cfg);
    const PathEnsemble ens = make_ensemble(cfg);
    const PicardResult res = solve_with(cfg, ens);
    const OracleErrors e = compare_to_oracle(res.solution, inst, ens, cfg.solver.p);
    CsvWriter w(prepare_output(cfg, "oracle_errors.csv"),
                {"M", "N", "p", "sp_error", "z_rms_error", "iters", "converged"});
    w.cell(ens.paths()).cell(ens.grid().steps()).cell(cfg.solver.p).cell(e.sp_error).cell(e.z_rms_error);
    w.cell(res.report.iterations).cell(res.report.converged ? "true" : "false");
    w.end_row();
    log << fmt::format("oracle-compare: sp_error={} z_rms_error={}\n", e.sp_error, e.z_rms_error);
    return kExitOk;
}

int run_bihari(const RunConfig& cfg, std::ostream& log)
{
    const Modulus rho = default_rho(cfg);
    double m_bound = 0.0;
    double t1 = 0.0;
    if (cfg.bihari.m_bound && cfg.bihari.t1) {
        m_bound = *cfg.bihari.m_bound;
        t1 = *cfg.bihari.t1;
    } else {
        const ConstantsBundle cb = constants_for(cfg, make_ensemble(cfg));
        m_bound = cfg.bihari.m_bound.value_or(cb.m_bound);
        t1 = cfg.bihari.t1.value_or(cb.t1);
    }
    const BihariCurve curve =
        bihari_recursion(rho, m_bound, cfg.paths.T, t1, cfg.bihari.n_max, cfg.bihari.quad_steps);
    write_bihari_csv(curve, prepare_output(cfg, "bihari.csv"));
    log << fmt::format("bihari: M_bound={} T1={} phi_{}(T1)={}\n", m_bound, t1, cfg.bihari.n_max,
                       curve.phi.back().front());
    return kExitOk;
}

int run_constants(const RunConfig& cfg, std::ostream& log)
{
    const ConstantsBundle cb = constants_for(cfg, make_ensemble(cfg));
    write_constants_csv(cb, prepare_output(cfg, "constants.csv"));
    log << fmt::format("constants: c_p={} c_lambda_p_T={} T1={} M_bound={}\n", cb.c_p, cb.c_lambda_p_t, cb.t1,
                       cb.m_bound);
    return kExitOk;
}

int run_gen_paths(const RunConfig& cfg, std::ostream& log)
{
    const auto& p = cfg.paths;
    const PathEnsemble ens = generate_ensemble(p.M, p.N, p.d, p.T, p.seed, p.antithetic);
    const std::filesystem::path out = p.paths_file ? *p.paths_file : prepare_output(cfg, "paths.bin");
    if (out.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(out.parent_path(), ec);
    }
    save_ensemble(ens, out);
    log << fmt::format("gen-paths: wrote {} paths x {} steps x {} dims to {}\n", p.M, p.N, p.d, out.string());
    return kExitOk;
}

int run_convergence_study(const RunConfig& cfg, std::ostream& log)
{
    const OracleInstance inst = derive_oracle(cfg);
    CsvWriter w(prepare_output(cfg, "convergence.csv"), {"M", "N", "sp_error", "z_rms_error", "iters"});
    for (std::size_t M : cfg.study.M_values) {
        for (std::size_t N : cfg.study.N_values) {
            const PathEnsemble ens = generate_ensemble(M, N, cfg.paths.d, cfg.paths.T, cfg.paths.seed,
                                                       cfg.paths.antithetic);
            const PicardResult res = solve_with(cfg, ens);
            const OracleErrors e = compare_to_oracle(res.solution, inst, ens, cfg.solver.p);
            w.cell(M).cell(N).cell(e.sp_error).cell(e.z_rms_error).cell(res.report.iterations);
            w.end_row();
            log << fmt::format("M={} N={} sp_error={} z_rms_error={} iters={}\n", M, N, e.sp_error,
                               e.z_rms_error, res.report.iterations);
        }
    }
    return kExitOk;
}

}  // namespace

std::optional<Command> parse_command(std::string_view name)
{
    for (Command c : {Command::Check, Command::Solve, Command::OracleCompare, Command::Bihari,
                      Command::Constants, Command::GenPaths, Command::ConvergenceStudy}) {
        if (name == command_name(c)) {
            return c;
        }
    }
    return std::nullopt;
}

const char* command_name(Command cmd) noexcept
{
    switch (cmd) {
    case Command::Check: return "check";
    case Command::Solve: return "solve";
    case Command::OracleCompare: return "oracle-compare";
    case Command::Bihari: return "bihari";
    case Command::Constants: return "constants";
    case Command::GenPaths: return "gen-paths";
    case Command::ConvergenceStudy: return "convergence-study";
    }
    return "?";
}

PathEnsemble make_ensemble(const RunConfig& cfg)
{
    const auto& p = cfg.paths;
    if (p.paths_file) {
        PathEnsemble ens = load_ensemble(*p.paths_file);
        if (ens.dim() != cfg.generator.d) {
            throw DimensionError(fmt::format("ensemble {} has d = {} but the generator expects d = {}",
                                             p.paths_file->string(), ens.dim(), cfg.generator.d));
        }
        return ens;
    }
    return generate_ensemble(p.M, p.N, p.d, p.T, p.seed, p.antithetic);
}

Modulus default_rho(const RunConfig& cfg)
{
    if (cfg.modulus) {
        return cfg.modulus->resolve();
    }
    const double p = cfg.solver.p;
    const double cap = 2.0 * cfg.check.radius;
    return std::visit(
        [&](const auto& g) -> Modulus {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, ZeroGenerator>) {
                return Modulus::linear(0.0, std::pow(cap, p));
            } else if constexpr (std::is_same_v<G, LinearGenerator>) {
                const double a = g.a.size() == 0 ? 0.0 : g.a.operatorNorm();
                return Modulus::linear(std::pow(a, p), std::pow(cap, p));
            } else if constexpr (std::is_same_v<G, Example1Generator>) {
                // |h(|y1|) - h(|y2|)| <= h(|y1 - y2|) by subadditivity
                return transform_modulus(Modulus::example1_h(g.p, g.delta, cap), H1StarToH1{p}).modulus;
            } else {
                throw ConfigError("modulus required for a custom generator");
            }
        },
        cfg.generator.spec);
}

EnvelopeA default_envelope(const RunConfig& cfg)
{
    if (cfg.envelope) {
        EnvelopeA env{cfg.envelope->psi.resolve(), cfg.envelope->lambda, cfg.envelope->phi, cfg.envelope->f};
        env.validate();
        return env;
    }
    const Generator gen = cfg.generator.build();
    const double p = cfg.solver.p;
    return std::visit(
        [&](const auto& g) -> EnvelopeA {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, ZeroGenerator>) {
                return EnvelopeA{Modulus::linear(0.0), 0.0, ZeroProcess{}, ZeroProcess{}};
            } else if constexpr (std::is_same_v<G, LinearGenerator>) {
                const double a = g.a.size() == 0 ? 0.0 : g.a.operatorNorm();
                return EnvelopeA{Modulus::linear(std::pow(a, p)), gen.analytic_lipschitz_z().value_or(0.0),
                                 ZeroProcess{}, ConstantProcess{g.c.size() == 0 ? 0.0 : g.c.norm()}};
            } else if constexpr (std::is_same_v<G, Example1Generator>) {
                if (cfg.generator.d != 1) {
                    throw ConfigError("envelope required for Example1 with d > 1");
                }
                return EnvelopeA{default_rho(cfg), 1.0, ZeroProcess{}, AbsBrownianCoordinate{0}};
            } else {
                throw ConfigError("envelope required for a custom generator");
            }
        },
        cfg.generator.spec);
}

OracleInstance derive_oracle(const RunConfig& cfg)
{
    const TerminalSpec& term = require_terminal(cfg);
    const std::size_t d = cfg.generator.d;
    OracleInstance inst{MartingaleSquare{}, cfg.paths.T, d};
    const auto* zero = std::get_if<ZeroGenerator>(&cfg.generator.spec);
    const auto* lin = std::get_if<LinearGenerator>(&cfg.generator.spec);
    if (zero && std::holds_alternative<CoordinateTerminal>(term.kind)) {
        inst.kind = MartingaleCoordinate{std::get<CoordinateTerminal>(term.kind).index};
        return inst;
    }
    if (zero && std::holds_alternative<SquareNormTerminal>(term.kind) && d == 1) {
        return inst;
    }
    if (const auto* c = std::get_if<ConstantTerminal>(&term.kind); c && cfg.generator.k == 1) {
        if (zero) {
            inst.kind = LinearDrift{0.0, 0.0, c->value};
            return inst;
        }
        const bool z_free = lin && lin->b == 0.0 && (lin->z_form.size() == 0 || lin->z_form.isZero(0.0));
        if (z_free) {
            inst.kind = LinearDrift{lin->a(0, 0), lin->c(0), c->value};
            return inst;
        }
    }
    throw ConfigError("no closed-form oracle for this generator and terminal");
}

ConstantsBundle constants_for(const RunConfig& cfg, const PathEnsemble& ens)
{
    const Generator gen = cfg.generator.build();
    const double p = cfg.solver.p;
    ConstantsInput in;
    in.p = p;
    in.horizon = ens.grid().horizon();
    if (cfg.constants.lambda) {
        in.lambda = *cfg.constants.lambda;
    } else if (auto a = gen.analytic_lipschitz_z()) {
        in.lambda = *a;
    } else {
        in.lambda = estimate_lipschitz_z(gen, sampler_for(cfg, in.horizon)).sampled;
    }
    in.a = cfg.constants.A ? *cfg.constants.A : linear_growth_coefficient(default_rho(cfg));
    in.k_prime_p = cfg.constants.k_prime_p;
    in.k_doubleprime_p = cfg.constants.k_doubleprime_p;
    in.c1 = cfg.constants.c1;
    in.c2 = cfg.constants.c2;
    in.c3 = cfg.constants.c3;
    in.terminal_moment = terminal_moment(require_terminal(cfg), ens, p);
    in.h3_moment = check_h3(gen, ens, p).estimate;
    try {
        return compute_constants(in);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
}

BasisSpec basis_for(const RunConfig& cfg, std::size_t paths)
{
    return {cfg.solver.basis_degree, cfg.solver.ridge.value_or(default_ridge(paths))};
}

PicardOptions picard_options(const RunConfig& cfg, const PathEnsemble& ens)
{
    PicardOptions o;
    o.p = cfg.solver.p;
    o.tol = cfg.solver.picard_tol;
    o.max_iter = cfg.solver.picard_max_iter;
    o.init = cfg.solver.init;
    o.deterministic = cfg.solver.deterministic_reduction;
    if (cfg.solver.split) {
        o.split_t1 = cfg.solver.split_t1 ? *cfg.solver.split_t1 : constants_for(cfg, ens).t1;
    }
    return o;
}

int run(Command cmd, const RunConfig& cfg, std::ostream& log)
{
    switch (cmd) {
    case Command::Check: return run_check(cfg, log);
    case Command::Solve: return run_solve(cfg, log);
    case Command::OracleCompare: return run_oracle_compare(cfg, log);
    case Command::Bihari: return run_bihari(cfg, log);
    case Command::Constants: return run_constants(cfg, log);
    case Command::GenPaths: return run_gen_paths(cfg, log);
    case Command::ConvergenceStudy: return run_convergence_study(cfg, log);
    }
    return kExitUsage;
}

}  // namespace bsde

#include "bsde/config.hpp"

#include "bsde/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bsde {

using nlohmann::json;

namespace {

// Strict view of a JSON object: every key must be consumed before finish().
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(fmt::format("field '{}' must be an object", path_.empty() ? "<root>" : path_));
        }
    }

    [[nodiscard]] std::string name(std::string_view key) const
    {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    [[nodiscard]] bool has(std::string_view key) const { return j_.contains(std::string(key)); }

    const json* raw(std::string_view key)
    {
        const auto it = j_.find(std::string(key));
        if (it == j_.end() || it->is_null()) {
            if (it != j_.end()) seen_.insert(std::string(key));
            return nullptr;
        }
        seen_.insert(std::string(key));
        return &*it;
    }

    std::optional<double> number(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            throw ConfigError(fmt::format("field '{}' must be a number", name(key)));
        }
        return v->get<double>();
    }

    std::optional<std::uint64_t> count(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (v->is_number_unsigned()) {
            return v->get<std::uint64_t>();
        }
        if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
            return static_cast<std::uint64_t>(v->get<std::int64_t>());
        }
        throw ConfigError(fmt::format("field '{}' must be a nonnegative integer", name(key)));
    }

    std::optional<bool> boolean(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            throw ConfigError(fmt::format("field '{}' must be a boolean", name(key)));
        }
        return v->get<bool>();
    }

    std::optional<std::string> string(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            throw ConfigError(fmt::format("field '{}' must be a string", name(key)));
        }
        return v->get<std::string>();
    }

    std::optional<Obj> object(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        return Obj(*v, name(key));
    }

    std::vector<double> numbers(std::string_view key)
    {
        const json* v = raw(key);
        if (!v) return {};
        if (!v->is_array()) {
            throw ConfigError(fmt::format("field '{}' must be an array of numbers", name(key)));
        }
        std::vector<double> out;
        for (const auto& x : *v) {
            if (!x.is_number()) {
                throw ConfigError(fmt::format("field '{}' must be an array of numbers", name(key)));
            }
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::string required_string(std::string_view key)
    {
        auto s = string(key);
        if (!s) {
            throw ConfigError(fmt::format("field '{}' is required", name(key)));
        }
        return *s;
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(fmt::format("unknown key '{}'", name(key)));
            }
        }
    }

    [[nodiscard]] const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::size_t positive(std::optional<std::uint64_t> v, std::size_t def, const std::string& field)
{
    if (!v) return def;
    if (*v < 1) {
        throw ConfigError(fmt::format("field '{}' must be >= 1", field));
    }
    return static_cast<std::size_t>(*v);
}

template <typename F>
auto wrap(const std::string& field, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(fmt::format("field '{}': {}", field, e.what()));
    }
}

TransformKind parse_transform(Obj o)
{
    const std::string kind = o.required_string("kind");
    TransformKind out;
    if (kind == "PowerRoot") {
        out = PowerRoot{o.number("r").value_or(2.0)};
    } else if (kind == "H1StarToH1") {
        out = H1StarToH1{o.number("p").value_or(2.0)};
    } else if (kind == "H1ppToH1") {
        const double p = o.number("p").value_or(2.0);
        out = H1ppToH1{p, o.number("q").value_or(p)};
    } else {
        throw ConfigError(fmt::format("field '{}' has unknown transform kind '{}'", o.name("kind"), kind));
    }
    o.finish();
    return out;
}

ModulusConfig parse_modulus(Obj o, const std::filesystem::path& base_dir)
{
    const std::string family = o.required_string("family");
    const double cap = o.number("domain_cap").value_or(1.0);
    std::optional<Obj> params = o.object("params");
    const json empty = json::object();
    Obj p = params ? *params : Obj(empty, o.name("params"));
    auto base = wrap(o.path(), [&]() -> Modulus {
        if (family == "Linear") {
            return Modulus::linear(p.number("mu").value_or(1.0), cap);
        }
        if (family == "Power") {
            return Modulus::power(p.number("c").value_or(1.0), p.number("alpha").value_or(1.0), cap);
        }
        if (family == "Example1H") {
            return Modulus::example1_h(p.number("p").value_or(2.0), p.number("delta").value_or(std::exp(-2.0)),
                                       cap);
        }
        if (family == "Tabulated") {
            if (auto file = p.string("file")) {
                std::filesystem::path f(*file);
                return read_modulus_csv(f.is_absolute() ? f : base_dir / f);
            }
            return Modulus::tabulated(p.numbers("u"), p.numbers("v"));
        }
        throw ConfigError(fmt::format("field '{}' has unknown modulus family '{}'", o.name("family"), family));
    });
    p.finish();
    std::optional<TransformKind> transform;
    if (auto t = o.object("transform")) {
        transform = parse_transform(*t);
    }
    o.finish();
    return {std::move(base), transform};
}

ProcessKind parse_process(Obj o, const std::filesystem::path& base_dir)
{
    const std::string kind = o.required_string("kind");
    ProcessKind out;
    if (kind == "Zero") {
        out = ZeroProcess{};
    } else if (kind == "Constant") {
        const double v = o.number("value").value_or(0.0);
        if (!(v >= 0.0)) {
            throw ConfigError(fmt::format("field '{}' must be >= 0", o.name("value")));
        }
        out = ConstantProcess{v};
    } else if (kind == "AbsBrownianCoordinate") {
        out = AbsBrownianCoordinate{static_cast<std::size_t>(o.count("index").value_or(0))};
    } else if (kind == "ModulusOfFrozenPath") {
        auto m = o.object("modulus");
        if (!m) {
            throw ConfigError(fmt::format("field '{}' is required", o.name("modulus")));
        }
        out = ModulusOfFrozenPath{parse_modulus(*m, base_dir).resolve(), o.number("exponent").value_or(2.0)};
    } else {
        throw ConfigError(fmt::format("field '{}' has unknown process kind '{}'", o.name("kind"), kind));
    }
    o.finish();
    return out;
}

Eigen::MatrixXd matrix_or_scalar(const json* v, std::size_t rows, std::size_t cols, const std::string& field)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!v) return m;
    if (v->is_number()) {
        if (rows != cols) {
            throw ConfigError(fmt::format("field '{}' must be a {}x{} matrix", field, rows, cols));
        }
        m.diagonal().setConstant(v->get<double>());
        return m;
    }
    if (!v->is_array() || v->size() != rows) {
        throw ConfigError(fmt::format("field '{}' must be a {}x{} matrix", field, rows, cols));
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& row = (*v)[r];
        if (!row.is_array() || row.size() != cols) {
            throw ConfigError(fmt::format("field '{}' must be a {}x{} matrix", field, rows, cols));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number()) {
                throw ConfigError(fmt::format("field '{}' must be a {}x{} matrix", field, rows, cols));
            }
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_or_scalar(const json* v, std::size_t n, const std::string& field)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (!v) return out;
    if (v->is_number()) {
        out.setConstant(v->get<double>());
        return out;
    }
    if (!v->is_array() || v->size() != n) {
        throw ConfigError(fmt::format("field '{}' must be a number or an array of {} numbers", field, n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(*v)[i].is_number()) {
            throw ConfigError(fmt::format("field '{}' must be a number or an array of {} numbers", field, n));
        }
        out(static_cast<Eigen::Index>(i)) = (*v)[i].get<double>();
    }
    return out;
}

GeneratorConfig parse_generator(const json& j, std::size_t default_d, double default_p)
{
    GeneratorConfig g;
    g.d = default_d;
    if (j.is_string()) {
        g.family = j.get<std::string>();
    }
    const json empty = json::object();
    std::optional<Obj> o;
    if (!j.is_string()) {
        o.emplace(j, "generator");
        g.family = o->required_string("family");
        g.k = positive(o->count("k"), 1, "generator.k");
        if (auto d = o->count("d")) {
            if (*d != default_d) {
                throw ConfigError(fmt::format("field 'generator.d' = {} differs from paths.d = {}", *d, default_d));
            }
        }
    }
    std::optional<Obj> params = o ? o->object("params") : std::nullopt;
    Obj p = params ? *params : Obj(empty, "generator.params");
    if (g.family == "Zero") {
        g.spec = ZeroGenerator{};
    } else if (g.family == "Linear") {
        LinearGenerator lin;
        lin.a = matrix_or_scalar(p.raw("a"), g.k, g.k, p.name("a"));
        lin.b = p.number("b").value_or(0.0);
        if (const json* w = p.raw("z_form")) {
            lin.z_form = matrix_or_scalar(w, g.k, g.k * g.d, p.name("z_form"));
        }
        lin.c = vector_or_scalar(p.raw("c"), g.k, p.name("c"));
        g.spec = lin;
    } else if (g.family == "Example1") {
        if (g.k != 1) {
            throw ConfigError("field 'generator.k' must be 1 for Example1");
        }
        g.spec = Example1Generator{p.number("p").value_or(default_p), p.number("delta").value_or(std::exp(-2.0))};
    } else if (g.family == "Custom") {
        const std::string name = p.required_string("name");
        if (!has_registered_generator(name)) {
            throw ConfigError(fmt::format("field 'generator.params.name': no generator registered as '{}'", name));
        }
        g.spec = CustomGenerator{name, {}, std::nullopt};
    } else {
        throw ConfigError(fmt::format("field 'generator.family' has unknown value '{}'", g.family));
    }
    p.finish();
    if (o) o->finish();
    // Validate eagerly so bad parameters surface as configuration errors.
    wrap("generator", [&] { return g.build(); });
    return g;
}

TerminalSpec parse_terminal(Obj o, std::size_t k)
{
    const std::string kind = o.required_string("kind");
    TerminalSpec t;
    t.k = k;
    if (kind == "Coordinate") {
        t.kind = CoordinateTerminal{static_cast<std::size_t>(o.count("index").value_or(0))};
    } else if (kind == "SquareNorm") {
        t.kind = SquareNormTerminal{};
    } else if (kind == "Constant") {
        t.kind = ConstantTerminal{o.number("value").value_or(0.0)};
    } else {
        throw ConfigError(fmt::format("field 'terminal.kind' has unknown value '{}'", kind));
    }
    o.finish();
    return t;
}

}  // namespace

Modulus ModulusConfig::resolve() const
{
    if (!transform) {
        return base;
    }
    return transform_modulus(base, *transform).modulus;
}

Generator GeneratorConfig::build() const
{
    if (const auto* c = std::get_if<CustomGenerator>(&spec)) {
        return Generator::custom(c->name, k, d);
    }
    return Generator(spec, k, d);
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("malformed config: {}", e.what()));
    }
    Obj root(doc, "");
    RunConfig cfg;

    if (auto o = root.object("paths")) {
        auto& p = cfg.paths;
        p.M = positive(o->count("M"), p.M, "paths.M");
        p.N = positive(o->count("N"), p.N, "paths.N");
        p.d = positive(o->count("d"), p.d, "paths.d");
        p.T = o->number("T").value_or(p.T);
        p.seed = o->count("seed").value_or(p.seed);
        p.antithetic = o->boolean("antithetic").value_or(p.antithetic);
        if (auto f = o->string("paths_file")) {
            const std::filesystem::path fp(*f);
            p.paths_file = fp.is_absolute() ? fp : base_dir / fp;
        }
        o->finish();
    }
    if (auto t = root.number("T")) {
        if (root.has("paths") && doc["paths"].contains("T") && doc["paths"]["T"] != doc["T"]) {
            throw ConfigError("field 'T' conflicts with 'paths.T'");
        }
        cfg.paths.T = *t;
    }
    if (!(cfg.paths.T > 0.0) || !std::isfinite(cfg.paths.T)) {
        throw ConfigError("field 'paths.T' must be positive");
    }

    if (auto o = root.object("solver")) {
        auto& s = cfg.solver;
        s.p = o->number("p").value_or(s.p);
        if (auto q = o->count("basis_degree")) s.basis_degree = static_cast<int>(*q);
        s.ridge = o->number("ridge");
        if (s.ridge && !(*s.ridge >= 0.0)) {
            throw ConfigError("field 'solver.ridge' must be >= 0");
        }
        s.picard_tol = o->number("picard_tol").value_or(s.picard_tol);
        if (!(s.picard_tol > 0.0)) {
            throw ConfigError("field 'solver.picard_tol' must be > 0");
        }
        s.picard_max_iter = static_cast<int>(positive(o->count("picard_max_iter"), 25, "solver.picard_max_iter"));
        if (const json* init = o->raw("init")) {
            if (init->is_string()) {
                if (init->get<std::string>() != "Zero") {
                    throw ConfigError("field 'solver.init' must be \"Zero\" or {kind: ConstantField, value}");
                }
            } else {
                Obj io(*init, "solver.init");
                const std::string kind = io.required_string("kind");
                if (kind == "Zero") {
                    s.init = ZeroInit{};
                } else if (kind == "ConstantField") {
                    s.init = ConstantFieldInit{io.number("value").value_or(0.0)};
                } else {
                    throw ConfigError(fmt::format("field 'solver.init.kind' has unknown value '{}'", kind));
                }
                io.finish();
            }
        }
        if (const json* split = o->raw("split")) {
            if (split->is_boolean()) {
                s.split = split->get<bool>();
            } else {
                Obj so(*split, "solver.split");
                s.split = true;
                s.split_t1 = so.number("T1");
                so.finish();
            }
        }
        s.deterministic_reduction = o->boolean("deterministic_reduction").value_or(true);
        s.export_paths = static_cast<std::size_t>(o->count("export_paths").value_or(0));
        o->finish();
    }
    if (!(cfg.solver.p > 1.0) || !std::isfinite(cfg.solver.p)) {
        throw ConfigError("field 'solver.p' must be > 1");
    }

    const json* gen = root.raw("generator");
    if (!gen) {
        throw ConfigError("generator required");
    }
    cfg.generator = parse_generator(*gen, cfg.paths.d, cfg.solver.p);

    if (auto o = root.object("terminal")) {
        cfg.terminal = parse_terminal(*o, cfg.generator.k);
    }
    if (auto o = root.object("modulus")) {
        cfg.modulus = parse_modulus(*o, base_dir);
    }
    if (auto o = root.object("envelope")) {
        auto psi = o->object("psi");
        if (!psi) {
            throw ConfigError("field 'envelope.psi' is required");
        }
        EnvelopeConfig env{parse_modulus(*psi, base_dir)};
        env.lambda = o->number("lambda").value_or(0.0);
        if (!(env.lambda >= 0.0)) {
            throw ConfigError("field 'envelope.lambda' must be >= 0");
        }
        if (auto ph = o->object("phi")) env.phi = parse_process(*ph, base_dir);
        if (auto f = o->object("f")) env.f = parse_process(*f, base_dir);
        o->finish();
        cfg.envelope = std::move(env);
    }
    if (auto o = root.object("osgood")) {
        cfg.osgood.weight = o->number("weight").value_or(cfg.osgood.weight);
        cfg.osgood.u0 = o->number("u0").value_or(cfg.osgood.u0);
        cfg.osgood.decades = static_cast<int>(positive(o->count("decades"), 8, "osgood.decades"));
        o->finish();
    }
    if (auto o = root.object("bihari")) {
        cfg.bihari.n_max = static_cast<int>(o->count("n_max").value_or(60));
        cfg.bihari.quad_steps = positive(o->count("quad_steps"), 2048, "bihari.quad_steps");
        cfg.bihari.m_bound = o->number("M_bound");
        cfg.bihari.t1 = o->number("T1");
        o->finish();
    }
    if (auto o = root.object("study")) {
        auto to_counts = [&](const char* key, std::vector<std::size_t>& out) {
            const auto v = o->numbers(key);
            if (v.empty()) return;
            out.clear();
            for (double x : v) {
                if (!(x >= 1.0) || x != std::floor(x)) {
                    throw ConfigError(fmt::format("field 'study.{}' must hold positive integers", key));
                }
                out.push_back(static_cast<std::size_t>(x));
            }
        };
        to_counts("M_values", cfg.study.M_values);
        to_counts("N_values", cfg.study.N_values);
        o->finish();
    }
    if (auto o = root.object("constants")) {
        auto& c = cfg.constants;
        c.k_prime_p = o->number("k_prime_p").value_or(c.k_prime_p);
        c.k_doubleprime_p = o->number("k_doubleprime_p").value_or(c.k_doubleprime_p);
        c.c1 = o->number("c1");
        c.c2 = o->number("c2");
        c.c3 = o->number("c3");
        c.lambda = o->number("lambda");
        c.A = o->number("A");
        o->finish();
    }
    if (auto o = root.object("check")) {
        cfg.check.samples = positive(o->count("samples"), cfg.check.samples, "check.samples");
        cfg.check.radius = o->number("radius").value_or(cfg.check.radius);
        cfg.check.seed = o->count("seed").value_or(cfg.check.seed);
        o->finish();
    }
    if (auto out = root.string("output_dir")) {
        const std::filesystem::path op(*out);
        cfg.output_dir = op.is_absolute() ? op : base_dir / op;
    }
    root.finish();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace bsde

#include "cmred/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cmred {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct RawConfig {
    // (section, key) -> (value, line)
    std::map<std::pair<std::string, std::string>, std::pair<std::string, int>> kv;
    std::vector<std::tuple<std::string, std::string, int>> repeated_terms; // kernel term lines

    bool has(const std::string& sec, const std::string& key) const
    {
        return kv.count({sec, key}) > 0;
    }
    std::string get(const std::string& sec, const std::string& key, int& line) const
    {
        const auto it = kv.find({sec, key});
        line = it->second.second;
        return it->second.first;
    }
};

RawConfig tokenize(const std::string& text, const std::string& path)
{
    RawConfig raw;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (section == "kernel" && key == "term") {
            raw.repeated_terms.emplace_back(section, val, lineno);
            continue;
        }
        raw.kv[{section, key}] = {val, lineno};
    }
    return raw;
}

double parse_double(const std::string& path, const std::string& val, int line)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(val, &pos);
        if (pos != val.size())
            throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError(path + ":" + std::to_string(line) + ": not a number: '" + val + "'");
    }
}

std::vector<double> parse_list(const std::string& path, const std::string& val, int line)
{
    std::vector<double> out;
    std::istringstream in(val);
    std::string tok;
    while (in >> tok)
        out.push_back(parse_double(path, tok, line));
    return out;
}

} // namespace

ProblemConfig ProblemConfig::parse(const std::string& text, const std::string& path)
{
    const RawConfig raw = tokenize(text, path);
    ProblemConfig c;
    c.source_path = path;
    c.raw_text = text;
    int line = 0;

    auto num = [&](const char* sec, const char* key, double& target) {
        if (raw.has(sec, key)) {
            const std::string v = raw.get(sec, key, line);
            target = parse_double(path, v, line);
        }
    };
    auto str = [&](const char* sec, const char* key, std::string& target) {
        if (raw.has(sec, key))
            target = raw.get(sec, key, line);
    };
    auto list = [&](const char* sec, const char* key, std::vector<double>& target) {
        if (raw.has(sec, key)) {
            const std::string v = raw.get(sec, key, line);
            target = parse_list(path, v, line);
        }
    };

    double dim_d = 1;
    num("kernel", "dim", dim_d);
    c.dim = std::size_t(dim_d);
    num("kernel", "rho", c.rho);
    for (const auto& [sec, val, ln] : raw.repeated_terms) {
        const std::vector<double> v = parse_list(path, val, ln);
        const std::size_t expect = 3 + 2 * c.dim * c.dim;
        if (v.size() != expect)
            throw ConfigError(path + ":" + std::to_string(ln) + ": term needs " +
                              std::to_string(expect) + " numbers (power, rate re/im, " +
                              std::to_string(c.dim * c.dim) + " matrix entries re/im)");
        KernelTerm t;
        t.power = unsigned(v[0]);
        t.rate = cplx{v[1], v[2]};
        t.coeff = Matc(c.dim, c.dim);
        for (std::size_t i = 0; i < c.dim; ++i)
            for (std::size_t j = 0; j < c.dim; ++j) {
                const std::size_t base = 3 + 2 * (i * c.dim + j);
                t.coeff(i, j) = cplx{v[base], v[base + 1]};
            }
        c.terms.push_back(std::move(t));
    }
    if (c.terms.empty())
        throw ConfigError(path + ": no kernel term lines ([kernel] term = ...)");

    str("nonlinearity", "form", c.nonlinearity_form);
    if (c.nonlinearity_form != "zero" && c.nonlinearity_form != "cubic")
        throw ConfigError(path + ": nonlinearity form must be 'zero' or 'cubic'");
    num("nonlinearity", "eps_cubic", c.eps_cubic);

    num("grid", "h", c.h);
    num("grid", "theta", c.theta);
    num("grid", "t_path", c.t_path);
    num("grid", "path_tail_tol", c.path_tail_tol);
    double moll = c.max_mollifier_n;
    num("grid", "max_mollifier_n", moll);
    c.max_mollifier_n = int(moll);

    num("tolerances", "fp_tol", c.fp_tol);
    num("tolerances", "root_tol", c.root_tol);
    num("tolerances", "center_tol", c.center_tol);
    num("tolerances", "boundary_tol", c.boundary_tol);

    num("spectrum", "re_min", c.re_min);
    num("spectrum", "re_max", c.re_max);
    num("spectrum", "im_max", c.im_max);
    num("spectrum", "margin", c.margin);

    num("manifold", "delta", c.delta);
    num("manifold", "delta1", c.delta1);
    num("manifold", "lattice_radius", c.lattice_radius);
    num("manifold", "eta", c.eta);

    num("central", "radius_r", c.radius_r);
    num("central", "escape_radius", c.escape_radius);

    list("ensemble", "radii", c.ensemble_radii);
    num("ensemble", "horizon", c.ensemble_horizon);
    double dirs = double(c.ensemble_directions);
    num("ensemble", "directions", dirs);
    c.ensemble_directions = std::size_t(dirs);
    list("ensemble", "full_radii", c.full_radii);
    num("ensemble", "full_horizon", c.full_horizon);
    str("ensemble", "expect_verdict", c.expect_verdict);
    if (!c.expect_verdict.empty() && c.expect_verdict != "stable" && c.expect_verdict != "unstable")
        throw ConfigError(path + ": expect_verdict must be 'stable' or 'unstable'");

    num("simulate", "phi_const", c.phi_const);
    num("simulate", "t_end", c.t_end);

    double seed_d = double(c.seed);
    num("run", "seed", seed_d);
    c.seed = std::uint64_t(seed_d);
    str("run", "out", c.out_dir);

    // basic sanity
    for (const char* what : {"fp_tol", "root_tol", "center_tol", "boundary_tol"})
        (void)what;
    if (c.fp_tol <= 0 || c.root_tol <= 0 || c.center_tol <= 0 || c.boundary_tol <= 0)
        throw ConfigError(path + ": tolerances must be positive");
    if (c.h <= 0)
        throw ConfigError(path + ": grid h must be positive");
    if (double(c.max_mollifier_n) * c.h > 1.0 + 1e-12)
        throw ConfigError(path + ": grid too coarse for the largest mollifier (need n*h <= 1)");
    return c;
}

ProblemConfig ProblemConfig::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

KernelModel ProblemConfig::make_kernel() const
{
    KernelModel k;
    k.dim = dim;
    k.rho = rho;
    k.terms = terms;
    k.validate();
    return k;
}

double ProblemConfig::effective_theta() const
{
    if (theta > 0)
        return theta;
    return std::max(20.0 / rho, 40.0);
}

std::string config_hash(const std::string& raw_text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : raw_text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace cmred

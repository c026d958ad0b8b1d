#include "config.hpp"

#include "hartree/field.hpp"
#include "hartree/nbody.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace hartree::cli {

namespace {

// ||Q||^2 of the default ground state; only used for the separation estimate in validate().
constexpr double kMassSqEstimate = 44.049;

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (boost::trim_copy(s.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(key + ": expected a number, got '" + s + "'");
}

std::vector<std::string> split(const std::string& s, const char* sep) {
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(sep));
    for (auto& p : parts) boost::trim(p);
    parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
    return parts;
}

}  // namespace

const std::vector<KeyInfo>& known_keys() {
    static const std::vector<KeyInfo> keys = {
        {"groundstate.n", "2048", "radial grid points"},
        {"groundstate.r_max", "20", "outer radius"},
        {"groundstate.stretch", "2", "sinh map stretch"},
        {"groundstate.tol", "1e-10", "Newton tolerance"},

        {"nbody.class", "hyperbolic", "hyperbolic | parabolic | mixed"},
        {"nbody.lambdas", "1, 1", "scales lambda_j"},
        {"nbody.targets", "0.75, 0.05, 0; -0.75, -0.05, 0", "velocities a_j (hyperbolic, mixed) or shape b_j (parabolic)"},
        {"nbody.shape", "", "intra-cluster shape b_j for mixed data"},
        {"nbody.offsets", "7, 0, 0; -7, 0, 0", "extra position offsets added at t0"},
        {"nbody.t0", "1", "initial time"},
        {"nbody.horizon", "1e6", "end of the m-body integration"},
        {"nbody.tol", "1e-12", "RKF78 tolerance"},

        {"trajectory.N", "2", "expansion order"},
        {"trajectory.T0", "1000", "start of the corrected trajectory (backward runs start it at evolution.T_end when earlier)"},
        {"trajectory.horizon", "1e5", "end of the Picard time grid"},
        {"trajectory.nodes", "800", "geometric time nodes"},
        {"trajectory.tol", "1e-10", "Picard tolerance"},
        {"trajectory.epsilon", "0.1", "weight exponent"},
        {"trajectory.max_iter", "60", "Picard iterations"},

        {"profiles.N", "2", "profile order"},
        {"profiles.ell_max", "4", "largest harmonic degree written"},

        {"residual.separations", "20, 40, 80", "pair separations a"},
        {"residual.orders", "1, 2", "orders N"},
        {"residual.beta", "0, 0.1, 0.05", "half velocity of the first soliton (the second gets -beta)"},
        {"residual.lambdas", "1, 1.1", "scales of the pair"},

        {"evolution.kind", "backward", "backward (from the ansatz at T_n) | standing (u0 = Q forward)"},
        {"evolution.n", "80", "grid points per axis"},
        {"evolution.L", "66", "box side"},
        {"evolution.dt", "0.01", "time step"},
        {"evolution.T_n", "10", "start of the backward run"},
        {"evolution.T_end", "1", "end of the backward run (duration for standing runs)"},
        {"evolution.mode", "padded", "periodic | isolated | padded potential"},
        {"evolution.snapshot_every", "10", "steps between records"},
        {"evolution.fit", "true", "fit modulation parameters at every record"},
        {"evolution.boundary_tol", "1e-6", "placement tolerance of the ansatz"},
        {"evolution.write_fields", "false", "write the final field as CF3D"},

        {"analysis.samples", "100", "random orthogonal perturbations"},
        {"analysis.eps_norm", "1e-3", "H^1 norm of the perturbations"},
        {"analysis.fit_trials", "20", "randomized fit round trips"},
        {"analysis.separation", "20", "separation for sampling and fit trials"},
        {"analysis.n", "64", "grid for sampling and fit trials"},
        {"analysis.L", "62", "box for sampling and fit trials"},
        {"analysis.coercivity_grids", "1024, 2048", "radial grids, successive refinements"},
        {"analysis.ell_max", "2", "largest harmonic degree of the spectra"},
        {"analysis.kernel_tol", "1e-4", "kernel eigenvalue tolerance"},
        {"analysis.parts", "spectra, functional", "what the coercivity subcommand computes"},

        {"output.dir", "out", "artifact directory (overridden by --out)"},
        {"output.formats", "csv, json, svg", "subset of csv, json, svg"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : known_keys()) values_[k.key] = k.value;
}

Config Config::load(const std::string& path) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(path, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        std::ostringstream os;
        os << path;
        if (e.line() > 0) os << ":" << e.line();
        os << ": " << e.message();
        throw ValidationError(os.str());
    }
    Config c;
    for (const auto& [section, body] : pt) {
        if (body.empty() && !body.data().empty()) {
            c.unknown.push_back(section + " (outside any section)");
            continue;
        }
        for (const auto& [key, leaf] : body) {
            const std::string full = section + "." + key;
            if (!c.values_.count(full)) {
                c.unknown.push_back(full);
                continue;
            }
            c.values_[full] = leaf.data();
        }
    }
    return c;
}

void Config::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + assignment + "'");
    set(boost::trim_copy(assignment.substr(0, eq)), boost::trim_copy(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ValidationError("unknown configuration key '" + key + "'");
    values_[key] = value;
}

const std::string& Config::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("configuration key not declared: " + key);
    return it->second;
}

double Config::num(const std::string& key) const { return parse_double(key, raw(key)); }

int Config::integer(const std::string& key) const {
    const double v = num(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError(key + ": expected an integer");
    return static_cast<int>(v);
}

bool Config::flag(const std::string& key) const {
    const std::string v = boost::to_lower_copy(raw(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError(key + ": expected true/false, got '" + raw(key) + "'");
}

std::vector<double> Config::list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& p : split(raw(key), ",")) out.push_back(parse_double(key, p));
    return out;
}

std::vector<Vec3> Config::vectors(const std::string& key) const {
    std::vector<Vec3> out;
    for (const auto& item : split(raw(key), ";")) {
        const auto c = split(item, ",");
        if (c.size() != 3) throw ValidationError(key + ": each vector needs 3 components, got '" + item + "'");
        out.emplace_back(parse_double(key, c[0]), parse_double(key, c[1]), parse_double(key, c[2]));
    }
    return out;
}

std::string Config::canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
}

std::vector<std::string> Config::validate(const std::string& subcommand) const {
    std::vector<std::string> v;
    for (const auto& u : unknown) v.push_back("unknown key " + u);
    auto guard = [&](auto&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            v.push_back(e.what());
        }
    };

    guard([&] {
        if (integer("groundstate.n") < 64) v.push_back("groundstate.n >= 64 required");
        if (!(num("groundstate.r_max") > 0)) v.push_back("groundstate.r_max must be positive");
        if (!(num("groundstate.tol") > 0)) v.push_back("groundstate.tol must be positive");
    });
    for (const char* k : {"trajectory.N", "profiles.N"})
        guard([&] {
            const int N = integer(k);
            if (N > 3) v.push_back(std::string(k) + " = " + std::to_string(N) + ": N <= 3 supported");
            if (N < 0) v.push_back(std::string(k) + " must be >= 0");
        });
    guard([&] {
        if (integer("profiles.ell_max") < 0 || integer("profiles.ell_max") > 4)
            v.push_back("profiles.ell_max must lie in 0..4");
    });

    // m-body data and the separation reached at T_n
    guard([&] {
        const auto cls = orbit_class_from_string(str("nbody.class"));
        const auto lam = list("nbody.lambdas");
        const auto targets = vectors("nbody.targets");
        if (lam.empty()) v.push_back("nbody.lambdas: at least one soliton");
        if (lam.size() != targets.size())
            v.push_back("nbody.lambdas has " + std::to_string(lam.size()) + " entries, nbody.targets " +
                        std::to_string(targets.size()));
        for (double l : lam)
            if (!(l > 0)) v.push_back("nbody.lambdas must be positive");
        const auto off = vectors("nbody.offsets");
        if (!off.empty() && off.size() != lam.size()) v.push_back("nbody.offsets must have one vector per soliton");
        if (cls == OrbitClass::mixed && vectors("nbody.shape").size() != lam.size())
            v.push_back("mixed data needs nbody.shape with one vector per soliton");
        if (!(num("nbody.horizon") > num("nbody.t0")) || !(num("nbody.t0") > 0))
            v.push_back("nbody: 0 < t0 < horizon required");
        if (!v.empty()) return;

        AsymptoticTargets tg;
        if (cls == OrbitClass::parabolic) tg.b = targets;
        else tg.a = targets;
        if (cls == OrbitClass::mixed) tg.b = vectors("nbody.shape");
        const double T_n = num("evolution.T_n");
        BodyConfig bc = make_asymptotic_initial_data(cls, tg, lam, kMassSqEstimate, num("nbody.t0"));
        for (std::size_t j = 0; j < off.size(); ++j) bc.alpha0[j] += off[j];
        const bool evolving = subcommand.empty() || subcommand == "validate" || subcommand == "evolve";
        if (evolving && str("evolution.kind") == "backward" && bc.m() > 1) {
            const auto path = integrate_at(bc, {bc.t0, T_n}, 1e-10);
            double sep = 0;
            for (int j = 0; j < bc.m(); ++j)
                for (int k = j + 1; k < bc.m(); ++k) sep = std::max(sep, (path.alpha[1][j] - path.alpha[1][k]).norm());
            const double L = num("evolution.L");
            const bool padded = str("evolution.mode") == "padded";
            const double factor = padded ? 2 : 4;
            if (L < factor * sep) {
                std::ostringstream os;
                os << "box too small: evolution.L = " << L << " but the separation at T_n is " << sep << " (need L >= "
                   << factor << " * separation" << (padded ? " with the padded potential)" : ")");
                v.push_back(os.str());
            }
        }
    });

    guard([&] {
        if (integer("trajectory.nodes") < 50) v.push_back("trajectory.nodes >= 50 required");
        if (!(num("trajectory.horizon") > num("trajectory.T0"))) v.push_back("trajectory: T0 < horizon required");
        if (!(num("trajectory.tol") > 0)) v.push_back("trajectory.tol must be positive");
    });
    guard([&] {
        const auto a = list("residual.separations");
        if (a.size() < 2) v.push_back("residual.separations: at least two separations for a slope");
        for (double x : a)
            if (!(x > 0)) v.push_back("residual.separations must be positive");
        for (double N : list("residual.orders"))
            if (N < 0 || N > 2 || N != std::floor(N)) v.push_back("residual.orders: orders 0..2 supported");
        if (list("residual.lambdas").size() != 2) v.push_back("residual.lambdas: two scales");
        if (vectors("residual.beta").size() != 1) v.push_back("residual.beta: one vector");
    });
    guard([&] {
        const std::string kind = str("evolution.kind");
        if (kind != "backward" && kind != "standing") v.push_back("evolution.kind must be backward or standing");
        const int n = integer("evolution.n");
        if (n < 8 || n % 2 || !fft_friendly(n)) v.push_back("evolution.n must be even with prime factors 2, 3, 5");
        if (!(num("evolution.L") > 0)) v.push_back("evolution.L must be positive");
        if (!(num("evolution.dt") > 0)) v.push_back("evolution.dt must be positive");
        if (kind == "backward" && !(num("evolution.T_end") < num("evolution.T_n")))
            v.push_back("evolution: T_end < T_n required");
        if (kind == "standing" && !(num("evolution.T_end") > 0)) v.push_back("evolution.T_end must be positive");
        const std::string mode = str("evolution.mode");
        if (mode != "periodic" && mode != "isolated" && mode != "padded")
            v.push_back("evolution.mode must be periodic, isolated or padded");
        if (integer("evolution.snapshot_every") < 1) v.push_back("evolution.snapshot_every >= 1 required");
        flag("evolution.fit");
        flag("evolution.write_fields");
    });
    guard([&] {
        if (integer("analysis.samples") < 1) v.push_back("analysis.samples >= 1 required");
        if (integer("analysis.fit_trials") < 1) v.push_back("analysis.fit_trials >= 1 required");
        if (!(num("analysis.eps_norm") > 0)) v.push_back("analysis.eps_norm must be positive");
        const auto grids = list("analysis.coercivity_grids");
        if (grids.empty()) v.push_back("analysis.coercivity_grids: at least one grid");
        for (std::size_t i = 1; i < grids.size(); ++i)
            if (!(grids[i] > grids[i - 1])) v.push_back("analysis.coercivity_grids must increase");
        for (double g : grids)
            if (g > 4096 || g < 64) v.push_back("analysis.coercivity_grids entries must lie in 64..4096");
        std::set<std::string> parts;
        for (auto p : split(raw("analysis.parts"), ",")) {
            if (p != "spectra" && p != "functional") v.push_back("analysis.parts: unknown part '" + p + "'");
            parts.insert(p);
        }
        if (parts.empty()) v.push_back("analysis.parts: at least one of spectra, functional");
        const int ell = integer("analysis.ell_max");
        if (ell < 0 || ell > 4) v.push_back("analysis.ell_max must lie in 0..4");
        const int n = integer("analysis.n");
        if (n % 2 || !fft_friendly(n)) v.push_back("analysis.n must be even with prime factors 2, 3, 5");
        const double h = num("analysis.L") / n;
        if (num("analysis.separation") < 16 * h) v.push_back("analysis.separation below 16 grid spacings");
        if (num("analysis.L") < 2 * num("analysis.separation"))
            v.push_back("analysis.L must be at least twice analysis.separation");
    });
    guard([&] {
        for (const auto& f : split(str("output.formats"), ","))
            if (f != "csv" && f != "json" && f != "svg") v.push_back("output.formats: unknown format '" + f + "'");
    });
    return v;
}

}  // namespace hartree::cli

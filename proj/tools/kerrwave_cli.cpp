// Batch front end: kerrwave_cli <subcommand> [flags]. Exit 0 ok, 2 bad input, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kerrwave/angular.hpp"
#include "kerrwave/geodesics.hpp"
#include "kerrwave/geometry.hpp"
#include "kerrwave/propagator.hpp"
#include "kerrwave/radial.hpp"
#include "kerrwave/scattering.hpp"

using namespace kerrwave;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct Params {
    double mass = 1.0;
    double spin = 0.0;
    int s = 0;
    std::vector<int> k{0};
    int n = 1;
    std::vector<double> omega;
    double tol = 1e-10;
    std::string out;
    std::string config;
    unsigned threads = default_threads();
    // geodesic
    double r = 6.0, theta = std::numbers::pi / 2, phi = 0.0;
    double vr = 0.0, vtheta = 0.0, vphi = 0.0;
    bool null = false;
    bool lower_branch = false;
    double length = 1000.0;
    double ds = 0.0;
    // angular
    double aw = 0.0;
    int count = 5;
    int basis = 32;
    // potential
    double umin = -50.0, umax = 50.0;
    int points = 201;
    // scatter
    double flux_tol = 1e-6;
    double guard = 1e-3;
    // evolve
    double omega_tilde = 0.0;
    double L = 20.0;
    double L_min = 10.0;
    double c_in = 1.0, c_out = 0.0;
    std::vector<double> times{0.0};
    double hu = 0.5;
    double margin = 40.0;
    int level = 0;
    double tail = 1e-4;
    double r_cut = 0.0;
};

// Output sink: a file (with its manifest) or stdout.
class Output {
public:
    Output(std::string sub, const Params& p, json params)
        : sub_(std::move(sub)), base_(p.out), params_(std::move(params)), start_(std::chrono::steady_clock::now()) {}

    void write(const std::string& suffix, const std::string& text) {
        if (base_.empty()) {
            std::cout << text;
            return;
        }
        const std::string path = base_ + suffix;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw InputError("cannot open output file " + path);
        f << text;
        files_.push_back(path);
    }

    void finish(std::size_t failures, json extra = json::object()) {
        if (base_.empty()) return;
        json m;
        m["subcommand"] = sub_;
        m["version"] = kVersion;
        m["parameters"] = params_;
        m["outputs"] = files_;
        m["failures"] = failures;
        for (auto& [key, v] : extra.items()) m[key] = v;
        m["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream f(base_ + ".manifest.json", std::ios::binary);
        if (!f) throw InputError("cannot open manifest for " + base_);
        f << m.dump(2) << "\n";
    }

private:
    std::string sub_, base_;
    json params_;
    std::vector<std::string> files_;
    std::chrono::steady_clock::time_point start_;
};

std::vector<double> omega_grid(const std::vector<double>& w) {
    if (w.size() == 1) return w;
    if (w.size() != 3) throw InputError("--omega takes <min max steps>");
    const double steps = w[2];
    if (!(steps >= 1.0) || steps != std::floor(steps)) throw InputError("--omega steps must be a positive integer");
    if (steps == 1.0) return {w[0]};
    return linspace(w[0], w[1], static_cast<std::size_t>(steps));
}

// key=value lines, '#' comments; returns tokens to append after the command line.
std::vector<std::string> config_tokens(const std::string& path, const std::vector<std::string>& given) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot read config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        for (char& c : key) if (c == '_') c = '-';
        if (key.empty() || key == "config") throw InputError(path + ":" + std::to_string(lineno) + ": invalid key");
        const std::string flag = "--" + key;
        bool overridden = false;
        for (const auto& g : given) overridden = overridden || g == flag || g.rfind(flag + "=", 0) == 0;
        if (overridden) continue;
        std::istringstream vs(value);
        std::vector<std::string> vals;
        for (std::string v; vs >> v;) vals.push_back(v);
        if (vals.size() == 1 && (vals[0] == "true" || vals[0] == "false")) {
            if (vals[0] == "true") tokens.push_back(flag);
            continue;
        }
        tokens.push_back(flag);
        tokens.insert(tokens.end(), vals.begin(), vals.end());
    }
    return tokens;
}

json common_params(const Params& p) {
    json j;
    j["mass"] = p.mass;
    j["spin"] = p.spin;
    j["s"] = p.s;
    j["k"] = p.k;
    j["n"] = p.n;
    j["tol"] = p.tol;
    return j;
}

int single_k(const Params& p) {
    if (p.k.size() != 1) throw InputError("this subcommand takes a single --k");
    return p.k.front();
}

int run_geometry(const Params& p) {
    BlackHole bh(p.mass, p.spin);
    json j;
    j["mass"] = p.mass;
    j["spin"] = p.spin;
    j["horizon_radius"] = bh.r_plus();
    j["ergosphere_radius"] = horizon_and_ergosphere(bh, std::numbers::pi / 2).ergosphere_radius;
    j["irreducible_mass"] = irreducible_mass(bh);
    j["k"] = p.k;
    json w0 = json::array();
    for (int k : p.k) w0.push_back(horizon_frequency(bh, k, 0.0).omega0);
    j["omega0"] = w0;
    json par;
    par["mass"] = p.mass;
    par["spin"] = p.spin;
    par["k"] = p.k;
    Output out("geometry", p, par);
    out.write(".json", j.dump(2) + "\n");
    out.finish(0);
    return 0;
}

int run_geodesic(const Params& p) {
    BlackHole bh(p.mass, p.spin);
    auto init = make_geodesic_state(bh, {0.0, p.r, p.theta, p.phi}, p.vr, p.vtheta, p.vphi,
                                    p.null ? NormClass::null : NormClass::timelike,
                                    p.lower_branch ? Branch::lower_energy : Branch::higher_energy);
    GeodesicOptions o;
    o.sample_ds = p.ds;
    json par = common_params(p);
    for (auto [key, v] : {std::pair{"r", p.r}, {"theta", p.theta}, {"phi", p.phi}, {"vr", p.vr}, {"vtheta", p.vtheta},
                          {"vphi", p.vphi}, {"length", p.length}, {"ds", p.ds}})
        par[key] = v;
    par["null"] = p.null;
    par["branch"] = p.lower_branch ? "lower_energy" : "higher_energy";
    Output out("geodesic", p, par);
    std::string csv = "s,t,r,theta,phi,ut,ur,utheta,uphi,E,Lz,norm\n";
    auto emit = [&](const std::vector<TrajectorySample>& samples) {
        for (const auto& smp : samples) {
            const auto c = conserved_quantities(bh, smp.state);
            const auto& x = smp.state.x;
            const auto& v = smp.state.v;
            csv += num(smp.s) + "," + num(x.t) + "," + num(x.r) + "," + num(x.theta) + "," + num(x.phi) + "," + num(v[0]) +
                   "," + num(v[1]) + "," + num(v[2]) + "," + num(v[3]) + "," + num(c.energy) + "," + num(c.angular_momentum) + "," +
                   num(c.norm) + "\n";
        }
    };
    auto traj = integrate_geodesic(bh, init, p.length, p.tol, o);
    emit(traj.samples);
    out.write(".csv", csv);
    json extra;
    extra["termination"] = to_string(traj.reason);
    extra["steps"] = traj.steps;
    out.finish(0, extra);
    return 0;
}

int run_angular(const Params& p) {
    const int k = single_k(p);
    auto pairs = spheroidal_eigenvalues({p.s, k, p.aw, p.basis}, p.count);
    std::string csv = "n,lambda,convergence_drift\n";
    for (const auto& e : pairs) csv += std::to_string(e.n) + "," + num(e.lambda) + "," + num(e.convergence_drift) + "\n";
    json par;
    par["s"] = p.s;
    par["k"] = k;
    par["aw"] = p.aw;
    par["count"] = p.count;
    par["basis"] = p.basis;
    Output out("angular", p, par);
    out.write(".csv", csv);
    out.finish(0);
    return 0;
}

int run_potential(const Params& p) {
    BlackHole bh(p.mass, p.spin);
    if (p.omega.size() != 1) throw InputError("potential takes a single --omega value");
    if (p.points < 2 || !(p.umax > p.umin)) throw InputError("need --points >= 2 and --umax > --umin");
    const ModeSpec mode = make_mode(bh, p.s, single_k(p), p.n, p.omega.front(), p.basis);
    std::string csv = "u,re_V,im_V\n";
    for (double u : linspace(p.umin, p.umax, static_cast<std::size_t>(p.points))) {
        const cplx v = potential(mode, u);
        csv += num(u) + "," + num(v.real()) + "," + num(v.imag()) + "\n";
    }
    json par = common_params(p);
    par["omega"] = p.omega.front();
    par["lambda"] = mode.lambda;
    par["umin"] = p.umin;
    par["umax"] = p.umax;
    par["points"] = p.points;
    Output out("potential", p, par);
    out.write(".csv", csv);
    out.finish(0);
    return 0;
}

int run_scatter(const Params& p) {
    BlackHole bh(p.mass, p.spin);
    if (p.s != 0) throw InputError("scattering coefficients are computed for s = 0");
    if (p.omega.empty()) throw InputError("scatter needs --omega <min max steps>");
    const auto grid = omega_grid(p.omega);
    ScatteringOptions o;
    o.tol = p.tol;
    o.flux_tol = p.flux_tol;
    o.guard = p.guard;
    o.basis = p.basis;
    auto data = amplification_scan(bh, single_k(p), p.n, grid, o, p.threads);
    std::string csv = "omega,re_A,im_A,re_B,im_B,amplification_percent,flux_residual,in_window\n";
    std::size_t failed = 0;
    for (const auto& d : data) {
        failed += d.failed ? 1 : 0;
        csv += num(d.mode.omega) + "," + num(d.A.real()) + "," + num(d.A.imag()) + "," + num(d.B.real()) + "," +
               num(d.B.imag()) + "," + num(d.amplification_percent()) + "," + num(d.flux_residual) + "," +
               (d.in_window ? "1" : "0") + "\n";
    }
    json par = common_params(p);
    par["omega"] = p.omega;
    par["flux_tol"] = p.flux_tol;
    par["guard"] = p.guard;
    Output out("scatter", p, par);
    out.write(".csv", csv);
    out.finish(failed);
    if (failed > 0) {
        std::cerr << "scatter: " << failed << " of " << data.size() << " points failed the flux gate\n";
        return 3;
    }
    return 0;
}

int run_evolve(const Params& p) {
    BlackHole bh(p.mass, p.spin);
    const int k = single_k(p);
    Channel ch = make_channel(bh, p.s, k, p.n, p.omega_tilde, p.basis);
    WavePacketSpec spec{p.omega_tilde, p.L, p.c_in, p.c_out, p.L_min};
    auto [lo, hi] = wavepacket_support(spec);
    const double ua = std::min(p.umin, lo - p.margin), ub = std::max(p.umax, hi + p.margin);
    if (!(p.hu > 0.0)) throw InputError("--hu must be positive");
    const auto npts = static_cast<std::size_t>(std::ceil((ub - ua) / p.hu)) + 1;
    const auto grid = linspace(ua, ub, npts);
    const StateVector psi0 = make_wavepacket(ch, spec, grid);
    SynthesisOptions o;
    o.level = p.level;
    o.tail = p.tail;
    o.tol = p.tol;
    o.threads = p.threads;
    auto ev = synthesize_evolution(ch, psi0, p.times, o);

    json par = common_params(p);
    par["k"] = k;
    for (auto [key, v] : {std::pair{"omega_tilde", p.omega_tilde}, {"L", p.L}, {"L_min", p.L_min}, {"c_in", p.c_in},
                          {"c_out", p.c_out}, {"hu", p.hu}, {"umin", ua}, {"umax", ub}, {"tail", p.tail},
                          {"r_cut", p.r_cut}})
        par[key] = v;
    par["times"] = p.times;
    par["level"] = p.level;
    Output out("evolve", p, par);
    for (std::size_t t = 0; t < ev.states.size(); ++t) {
        std::string csv = "u,re_phi,im_phi,re_pi,im_pi\n";
        const auto& st = ev.states[t];
        for (std::size_t i = 0; i < grid.size(); ++i)
            csv += num(grid[i]) + "," + num(st.phi[i].real()) + "," + num(st.phi[i].imag()) + "," +
                   num(st.pi[i].real()) + "," + num(st.pi[i].imag()) + "\n";
        out.write("_t" + std::to_string(t) + ".csv", csv);
    }
    json summary;
    summary["times"] = p.times;
    summary["omega_band"] = {ev.omega_lo, ev.omega_hi};
    summary["frequency_nodes"] = ev.nodes;
    std::size_t failures = 0;
    if (p.s == 0) {
        const double e0 = energy(ch, psi0).total;
        summary["initial_energy"] = e0;
        json es = json::array();
        for (const auto& st : ev.states) es.push_back(energy(ch, st).total);
        summary["energy"] = es;
        if (ev.states.size() >= 2) {
            auto oe = outgoing_energy(ch, ev, p.r_cut, 1e-2, false);
            const double escaped = initial_outgoing_energy(ch, psi0);
            summary["outgoing_energy_grid"] = oe.value;
            summary["outgoing_energy_initial"] = escaped;
            summary["E_out"] = oe.value + escaped;
            summary["E_out_trend"] = oe.trend;
            summary["E_out_stabilized"] = oe.stabilized;
            summary["E_out_ratio"] = (oe.value + escaped) / e0;
            failures += oe.stabilized ? 0 : 1;
            const ModeSpec m = make_mode(bh, 0, k, p.n, p.omega_tilde, p.basis);
            auto sc = scatter_mode(m);
            summary["amplification_mode"] = sc.amplification;
            summary["amplification_deviation"] = std::abs((oe.value + escaped) / e0 - sc.amplification);
        }
    }
    out.write("_summary.json", summary.dump(2) + "\n");
    out.finish(failures);
    if (failures > 0) {
        std::cerr << "evolve: outgoing energy did not stabilize between the last two times\n";
        return 3;
    }
    return 0;
}

void add_common(CLI::App* sub, Params& p) {
    sub->add_option("--mass", p.mass, "black hole mass M")->capture_default_str();
    sub->add_option("--spin", p.spin, "spin parameter a (|a| < M)")->capture_default_str();
    sub->add_option("--s", p.s, "spin weight")->capture_default_str();
    sub->add_option("--k", p.k, "azimuthal number(s)")->capture_default_str();
    sub->add_option("--n", p.n, "angular index, from 1")->capture_default_str();
    sub->add_option("--omega", p.omega, "frequency, or <min max steps>")->expected(1, 3);
    sub->add_option("--tol", p.tol, "integration tolerance")->capture_default_str();
    sub->add_option("--out", p.out, "output path prefix (stdout when absent)");
    sub->add_option("--config", p.config, "key=value config file; flags override it");
    sub->add_option("--threads", p.threads, "worker threads")->capture_default_str();
    sub->add_option("--basis", p.basis, "angular basis size")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    Params p;
    CLI::App app{"Kerr black hole wave toolkit"};
    app.require_subcommand(1);
    auto* geometry = app.add_subcommand("geometry", "horizon, ergosphere, irreducible mass, w0");
    auto* geodesic = app.add_subcommand("geodesic", "integrate a geodesic, CSV trajectory");
    auto* angular = app.add_subcommand("angular", "spheroidal eigenvalues");
    auto* pot = app.add_subcommand("potential", "radial potential on a u grid");
    auto* scatter = app.add_subcommand("scatter", "reflection/transmission scan");
    auto* evolve = app.add_subcommand("evolve", "wave packet evolution by frequency synthesis");
    for (auto* sub : {geometry, geodesic, angular, pot, scatter, evolve}) add_common(sub, p);

    geodesic->add_option("--r", p.r)->capture_default_str();
    geodesic->add_option("--theta", p.theta)->capture_default_str();
    geodesic->add_option("--phi", p.phi)->capture_default_str();
    geodesic->add_option("--vr", p.vr)->capture_default_str();
    geodesic->add_option("--vtheta", p.vtheta)->capture_default_str();
    geodesic->add_option("--vphi", p.vphi)->capture_default_str();
    geodesic->add_flag("--null", p.null, "null instead of timelike");
    geodesic->add_flag("--lower-branch", p.lower_branch, "lower-energy root for v^t");
    geodesic->add_option("--length", p.length, "affine length")->capture_default_str();
    geodesic->add_option("--ds", p.ds, "sample spacing (default length/1000)");

    angular->add_option("--aw", p.aw, "spheroidicity a*omega")->capture_default_str();
    angular->add_option("--count", p.count, "number of eigenvalues")->capture_default_str();

    pot->add_option("--umin", p.umin)->capture_default_str();
    pot->add_option("--umax", p.umax)->capture_default_str();
    pot->add_option("--points", p.points)->capture_default_str();

    scatter->add_option("--flux-tol", p.flux_tol)->capture_default_str();
    scatter->add_option("--guard", p.guard)->capture_default_str();

    evolve->add_option("--omega-tilde", p.omega_tilde, "packet frequency")->capture_default_str();
    evolve->add_option("--L", p.L, "packet scale")->capture_default_str();
    evolve->add_option("--L-min", p.L_min)->capture_default_str();
    evolve->add_option("--c-in", p.c_in)->capture_default_str();
    evolve->add_option("--c-out", p.c_out)->capture_default_str();
    evolve->add_option("--times", p.times, "output times")->capture_default_str();
    evolve->add_option("--umin", p.umin)->capture_default_str();
    evolve->add_option("--umax", p.umax)->capture_default_str();
    evolve->add_option("--hu", p.hu, "grid spacing in u")->capture_default_str();
    evolve->add_option("--margin", p.margin, "grid margin around the packet")->capture_default_str();
    evolve->add_option("--level", p.level, "frequency refinement level")->capture_default_str();
    evolve->add_option("--tail", p.tail, "band edge, relative to the spectral peak")->capture_default_str();
    evolve->add_option("--r-cut", p.r_cut, "outgoing energy cut radius (default 2 r1)");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string cfg;
            if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
            if (!cfg.empty()) {
                auto extra = config_tokens(cfg, args);
                args.insert(args.end(), extra.begin(), extra.end());
                break;
            }
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*geometry) return run_geometry(p);
        if (*geodesic) return run_geodesic(p);
        if (*angular) return run_angular(p);
        if (*pot) return run_potential(p);
        if (*scatter) return run_scatter(p);
        if (*evolve) return run_evolve(p);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
        return 3;
    }
    return 2;
}

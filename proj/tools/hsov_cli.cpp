// Command-line front end: curve/scenario ingestion, verification suites,
// forward/inverse separation-of-variables runs, and JSON report emission.
//
// Exit codes: 0 all checks pass, 1 check failure or runtime error,
// 2 usage / parse error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <thread>

#include "hsov/io.hpp"

using namespace hsov;
using nlohmann::json;

namespace {

// --- configuration plumbing ----------------------------------------------

std::string config_dir() {
    const char* env = std::getenv("HSOV_CONFIG_DIR");
    return env ? std::string(env) : std::string("configs");
}

struct Options {
    std::string curve_path, scenario_path, out_path, in_path;
    std::vector<std::string> tol_overrides;
    uint64_t seed = 0;
    bool seed_set = false;
    int count = -1;
    double fd_step = -1;
    int workers = 1;
};

std::map<std::string, double> parse_overrides(const std::vector<std::string>& raw) {
    std::map<std::string, double> out;
    for (const std::string& s : raw) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error("parse error: --tolerance expects name=value, got " + s);
        char* end = nullptr;
        double v = std::strtod(s.c_str() + eq + 1, &end);
        if (end == s.c_str() + eq + 1 || *end != '\0')
            throw Error("parse error: bad tolerance value in " + s);
        out[s.substr(0, eq)] = v;
    }
    return out;
}

SurfaceContext load_curve(const Options& opt) {
    std::string path = opt.curve_path.empty() ? config_dir() + "/curve_g2.json" : opt.curve_path;
    io::CurveConfig cc = io::curve_config_from_json(io::load_json(path));
    return build_context(HyperellipticCurve(cc.f_coeffs, cc.numeric.root_separation),
                         cc.basepoint, cc.numeric);
}

io::ScenarioConfig load_scenario(const Options& opt, const SurfaceContext& ctx) {
    io::ScenarioConfig sc;
    if (!opt.scenario_path.empty()) {
        sc = io::scenario_from_json(io::load_json(opt.scenario_path));
    } else {
        // seed-driven default scenario for the curve's genus
        if (ctx.g == 2) {
            sc.ref = default_reference_g2();
            sc.base_q = default_moduli_q_g2();
        } else if (ctx.g == 3) {
            sc.ref = default_reference_g3();
            sc.base_q.add({cplx(0.8, 1.2), +1}, 1);
            sc.base_q.add({cplx(-1.55, 0.4), -1}, 1);
            sc.base_q.add({cplx(0.15, -1.8), -1}, 1);
        } else {
            throw Error("parse error: no default scenario for this genus; pass --scenario");
        }
        sc.seed = 42;
        sc.count = 20;
    }
    if (opt.seed_set) sc.seed = opt.seed;
    if (opt.count >= 0) sc.count = opt.count;
    if (opt.fd_step > 0) sc.fd_step = opt.fd_step;
    sc.ref.validate_shape(ctx);
    auto overrides = parse_overrides(opt.tol_overrides);
    if (overrides.count("roundtrip")) sc.roundtrip_tol = overrides["roundtrip"];
    if (overrides.count("bracket")) sc.bracket_tol = overrides["bracket"];
    return sc;
}

// --- check recording ------------------------------------------------------

struct CheckSink {
    json checks = json::array();
    std::map<std::string, double> tol_override;

    void add(int scenario_id, const std::string& name, double residual, double default_tol,
             const std::string& witness) {
        auto it = tol_override.find(name);
        double tol = it != tol_override.end() ? it->second : default_tol;
        checks.push_back({{"scenario_id", scenario_id},
                          {"check_name", name},
                          {"residual", residual},
                          {"tolerance", tol},
                          {"pass", residual < tol},
                          {"witness", witness}});
    }
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.at("pass").get<bool>()) return false;
        return true;
    }
};

/// Deterministic scenario-parallel loop: results land in index order no
/// matter how the work is scheduled.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

DarbouxPoint scenario_point(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int s) {
    std::mt19937_64 rng(sc.seed + 1000003ull * static_cast<uint64_t>(s));
    return random_darboux_point(ctx, sc.ref, sc.base_q, rng);
}

cplx rng_cplx(std::mt19937_64& rng, double radius) {
    auto u = [&] { return -radius + 2 * radius * (double(rng() >> 11) * 0x1.0p-53); };
    double re = u(), im = u();
    return {re, im};
}

SurfacePoint random_off_branch(const SurfaceContext& ctx, std::mt19937_64& rng) {
    for (int t = 0; t < 256; ++t) {
        cplx z = ctx.curve.centroid() + rng_cplx(rng, 2.0);
        if (ctx.curve.dist_to_branch(z) < 0.35 * ctx.curve.min_branch_separation()) continue;
        if (std::abs(z) < 0.2) continue;
        return {z, (rng() & 1) ? +1 : -1};
    }
    throw Error("degenerate configuration");
}

// --- verify checks --------------------------------------------------------

void verify_periods(const SurfaceContext& ctx, CheckSink& sink) {
    double sym = (ctx.B - ctx.B.transpose()).cwiseAbs().maxCoeff();
    sink.add(0, "period_symmetry", sym, 1e-9, "max |B - B^T|");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.B.imag());
    double min_eig = es.eigenvalues().minCoeff();
    sink.add(0, "period_positivity", std::max(0.0, -min_eig), 1e-12,
             "negative part of the smallest eigenvalue of Im B (" + std::to_string(min_eig) +
                 ")");
    auto h = ctx.omega_integrand();
    double norm_resid = 0;
    for (int j = 0; j < ctx.g; ++j) {
        VecC col = ctx.cycle_integral(ctx.a_cycles[j], h, ctx.g);
        for (int i = 0; i < ctx.g; ++i)
            norm_resid = std::max(norm_resid, std::abs(col(i) - (i == j ? 1.0 : 0.0)));
    }
    sink.add(0, "a_period_normalization", norm_resid, 1e-8,
             "max |a-period matrix - identity|");
}

void verify_theta(const SurfaceContext& ctx, const io::ScenarioConfig& sc, CheckSink& sink) {
    std::mt19937_64 rng(sc.seed ^ 0x7e7au);
    double qp = 0, parity = 0;
    for (int t = 0; t < 12; ++t) {
        VecC z(ctx.g);
        for (int i = 0; i < ctx.g; ++i) z(i) = rng_cplx(rng, 0.8);
        Eigen::VectorXi n(ctx.g), m(ctx.g);
        for (int i = 0; i < ctx.g; ++i) {
            n(i) = int(rng() % 3) - 1;
            m(i) = int(rng() % 3) - 1;
        }
        VecC shifted = z;
        VecC mB = VecC::Zero(ctx.g);
        for (int i = 0; i < ctx.g; ++i) {
            shifted(i) += double(n(i));
            shifted += double(m(i)) * ctx.B.col(i);
            mB += double(m(i)) * ctx.B.col(i);
        }
        cplx mz = 0, mBm = 0;
        for (int i = 0; i < ctx.g; ++i) {
            mz += double(m(i)) * z(i);
            mBm += double(m(i)) * mB(i);
        }
        cplx factor = std::exp(2.0 * kPi * kI * (-0.5 * mBm - mz));
        cplx lhs = theta(ctx, shifted), rhs = factor * theta(ctx, z);
        qp = std::max(qp, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        parity = std::max(parity, std::abs(theta(ctx, VecC(-z)) - theta(ctx, z)) /
                                      std::max(1.0, std::abs(theta(ctx, z))));
    }
    sink.add(0, "theta_quasi_periodicity", qp, 1e-9,
             "relative defect of the lattice transformation law");
    sink.add(0, "theta_parity", parity, 1e-9, "relative defect of theta(-z) = theta(z)");
    double odd = std::abs(theta_char(ctx, ctx.char_alpha, ctx.char_beta, VecC::Zero(ctx.g)));
    sink.add(0, "theta_odd_vanishing", odd, 1e-9,
             "|theta[delta](0)| for the chosen odd characteristic");
}

void verify_prime_form(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int pairs,
                       CheckSink& sink) {
    std::mt19937_64 rng(sc.seed ^ 0xef0cu);
    SurfacePoint probe = random_off_branch(ctx, rng);
    sink.add(0, "prime_form_diagonal", std::abs(prime_form(ctx, probe, probe)), 1e-12,
             "|E(z, z)|");
    double anti = 0, local = 0;
    for (int t = 0; t < pairs; ++t) {
        SurfacePoint a = random_off_branch(ctx, rng);
        SurfacePoint b = random_off_branch(ctx, rng);
        cplx e = prime_form(ctx, a, b);
        anti = std::max(anti, std::abs(e + prime_form(ctx, b, a)) /
                                  std::max(1.0, std::abs(e)));
        // local behavior against the coordinate difference
        cplx delta = 1e-4 * std::exp(kI * cplx(2 * kPi * (double(rng() >> 11) * 0x1.0p-53)));
        SurfacePoint w{a.z + delta, a.sheet};
        if (ctx.curve.dist_to_branch(w.z) < 0.3 * ctx.curve.min_branch_separation()) continue;
        local = std::max(local, std::abs(prime_form(ctx, a, w) / (a.z - w.z) - 1.0));
    }
    sink.add(0, "prime_form_antisymmetry", anti, 1e-10, "relative |E(a,b) + E(b,a)|");
    sink.add(0, "prime_form_local", local, 1e-5,
             "max |E(z,w)/(z-w) - 1| over nearby pairs");
}

/// Random divisor data satisfying the class constraint by construction:
/// zeros u = g hyperelliptic-conjugate pairs, poles v = one conjugate pair,
/// and coincident auxiliary degree-g divisors.
void verify_differentials(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int count,
                          CheckSink& sink) {
    std::vector<json> slots(count);
    auto run = [&](int t) {
        CheckSink local;
        local.tol_override = sink.tol_override;
        std::mt19937_64 rng(sc.seed + 7919ull * static_cast<uint64_t>(t) + 13ull);
        auto fresh_center = [&](std::vector<cplx>& used) {
            for (int a = 0; a < 256; ++a) {
                cplx z = ctx.curve.centroid() + rng_cplx(rng, 1.8);
                if (ctx.curve.dist_to_branch(z) < 0.35 * ctx.curve.min_branch_separation())
                    continue;
                bool clear = true;
                for (cplx u : used)
                    if (std::abs(z - u) < 0.3) clear = false;
                if (!clear) continue;
                used.push_back(z);
                return z;
            }
            throw Error("degenerate configuration");
        };
        std::vector<cplx> used;
        Divisor u, v, q;
        std::vector<cplx> zero_z, pole_z;
        for (int i = 0; i < ctx.g; ++i) {
            cplx c = fresh_center(used);
            u.add({c, +1}, 1);
            u.add({c, -1}, 1);
            zero_z.push_back(c);
        }
        cplx vc = fresh_center(used);
        v.add({vc, +1}, 1);
        v.add({vc, -1}, 1);
        pole_z.push_back(vc);
        for (int i = 0; i < ctx.g; ++i) q.add(random_off_branch(ctx, rng), 1);

        auto d = differential_from_divisor_data(ctx, u, v, q, q);
        // the theta product carries an arbitrary overall magnitude; rescale
        // to unit probe size so relative monodromy defects are meaningful
        std::vector<SurfacePoint> probes;
        for (int a = 0; a < 6; ++a) probes.push_back(random_off_branch(ctx, rng));
        auto normalized = [&](const MeromorphicDifferential& raw) {
            double s = 0;
            for (const auto& p : probes)
                s = std::max(s, std::abs(raw.density(p.z, ctx.curve.y_of(p))));
            MeromorphicDifferential out = raw;
            auto f = raw.density;
            out.density = [f, s](cplx z, cplx y) { return f(z, y) / s; };
            if (raw.needs_abel) {
                auto fa = raw.abel_evaluator;
                out.abel_evaluator = [fa, s](cplx z, cplx y, const VecC& A) {
                    return fa(z, y, A) / s;
                };
            }
            return out;
        };
        auto dn = normalized(d);
        double mono = 0;
        for (int cyc = 0; cyc < 2 * ctx.g; ++cyc)
            mono = std::max(mono, monodromy_check(ctx, dn, cyc));
        local.add(t, "monodromy_valid", mono, 1e-6,
                  "worst single-valuedness defect over the homology basis");

        double scale = 1.0;  // dn is unit-normalized over the probes
        double zero_resid = 0;
        for (cplx c : zero_z)
            for (int sheet : {+1, -1}) {
                SurfacePoint p{c, sheet};
                zero_resid = std::max(
                    zero_resid, std::abs(dn.density(p.z, ctx.curve.y_of(p))) / scale);
            }
        local.add(t, "declared_zero_loci", zero_resid, 1e-6,
                  "relative magnitude at the declared zeros");
        double pole_resid = 0;
        for (cplx c : pole_z)
            for (int sheet : {+1, -1}) {
                SurfacePoint p{c, sheet};
                double r = contour_radius(ctx.curve, p.z, used);
                cplx res = contour_coeff(ctx.curve, dn.density, p, r, -1);
                cplx a2 = contour_coeff(ctx.curve, dn.density, p, r, -2);
                if (std::abs(res) / scale < 1e-6) pole_resid = std::max(pole_resid, 1.0);
                pole_resid = std::max(pole_resid, std::abs(a2) / std::max(1e-300, std::abs(res)));
            }
        local.add(t, "declared_pole_loci", pole_resid, 1e-4,
                  "simple-pole witness: residue present, no double-pole part");

        // discrimination: displace one zero wholesale so the class defect is
        // an order-one lattice offset and the multivaluedness is visible.
        // Redraw displacements whose class defect lands near the lattice
        // (input selection by a deterministic criterion, not by outcome).
        Divisor u_bad = u;
        for (int attempt = 0; attempt < 64; ++attempt) {
            u_bad.entries.front().first = {fresh_center(used), +1};
            VecC defect = ctx.abel(u_bad) - ctx.abel(u);
            if (ctx.lattice_residual(defect) > 0.15) break;
        }
        auto d_bad = normalized(differential_from_divisor_data(ctx, u_bad, v, q, q, 1e-6, false));
        double worst = 0;
        for (int cyc = 0; cyc < 2 * ctx.g; ++cyc)
            worst = std::max(worst, monodromy_check(ctx, d_bad, cyc));
        local.add(t, "monodromy_discrimination", std::max(0.0, 1e-2 - worst), 1e-12,
                  "shortfall of the violating-data defect below 1e-2 (defect " +
                      std::to_string(worst) + ")");
        slots[t] = std::move(local.checks);
    };
    parallel_for(count, 1, run);
    for (auto& s : slots)
        for (auto& c : s) sink.checks.push_back(std::move(c));
}

void verify_higgs(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int count,
                  int workers, CheckSink& sink) {
    std::vector<json> slots(count);
    auto run = [&](int s) {
        CheckSink local;
        local.tol_override = sink.tol_override;
        DarbouxPoint pt = scenario_point(ctx, sc, s);
        Divisor q0 = q_of_lambda(ctx, sc.ref, pt.lambda, sc.base_q);
        auto interp = bounded_differential_basis(ctx, sc.ref, q0, interpolation_bound(sc.ref, q0));
        local.add(s, "interp_dimension",
                  std::abs(double(interp.space.dimension() - sc.ref.N())), 0.5,
                  "dim of the prescribed-pole differential space vs N");
        ModuliPoint mp;
        mp.q = q0;
        mp.x = pt.x;
        mp.lambda = pt.lambda;
        auto phip = phi_plus_from_k(ctx, sc.ref, mp, pt.k);
        auto phi0 = phi0_from_coords(ctx, sc.ref, mp, pt.kappa, pt.k);
        double res_resid = 0;
        auto ppts = sc.ref.p.expanded();
        for (int r = 0; r < sc.ref.N(); ++r) {
            double rad = contour_radius(ctx.curve, ppts[r].z, detail::support_z(sc.ref, mp.q));
            cplx res = contour_residue(ctx.curve, phi0.density, ppts[r], rad);
            res_resid = std::max(res_resid, std::abs(res + pt.x(r) * pt.k(r)) /
                                                std::max(1.0, std::abs(pt.x(r) * pt.k(r))));
        }
        local.add(s, "residue_relation", res_resid, 1e-7,
                  "diagonal residues at p vs -x_r k_r");
        auto pm = solve_phi_minus(ctx, sc.ref, mp, phi0, phip);
        local.add(s, "null_dimension",
                  std::abs(double(pm.null_dim - (ctx.g - 1 - sc.ref.s_d()))), 0.5,
                  "null space of the completion system vs g - 1 - s_d");
        double fit_resid = 0;
        fit_quadratic(
            ctx,
            [&](cplx z, cplx y) {
                cplx a = phi0.density(z, y);
                return a * a + phip.density(z, y) * pm.phi_minus.density(z, y);
            },
            fit_resid);
        local.add(s, "determinant_holomorphic", fit_resid, 1e-6,
                  "quadratic-differential fit residual of the determinant");
        local.add(s, "moment_map", std::abs(moment_map(pt.x, pt.k)), 1e-9, "|x . k|");
        slots[s] = std::move(local.checks);
    };
    parallel_for(count, workers, run);
    for (auto& s : slots)
        for (auto& c : s) sink.checks.push_back(std::move(c));
}

void verify_brackets(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int count,
                     int workers, CheckSink& sink) {
    std::vector<json> slots(count);
    auto run = [&](int s) {
        CheckSink local;
        local.tol_override = sink.tol_override;
        DarbouxPoint pt = scenario_point(ctx, sc, s);
        auto br = fd_poisson_brackets(ctx, sc.ref, pt, sc.fd_step);
        local.add(s, "canonical_brackets", br.max_deviation, sc.bracket_tol,
                  "max deviation from the (0, delta, 0) pattern; CR residual " +
                      std::to_string(br.cr_residual));
        if (s == 0) {
            local.add(s, "momentum_identity_u",
                      momentum_identity_check(ctx, sc.ref, pt, momentum_identity_function_u(ctx, sc.ref, pt, 0),
                                    sc.fd_step),
                      sc.bracket_tol, "derivative identity for F = u_1");
            local.add(s, "momentum_identity_lambda",
                      momentum_identity_check(ctx, sc.ref, pt, momentum_identity_function_lambda(0), sc.fd_step),
                      sc.bracket_tol, "derivative identity for F = lambda_1");
            local.add(s, "momentum_identity_kk",
                      momentum_identity_check(ctx, sc.ref, pt, momentum_identity_function_kk(0, 1), sc.fd_step),
                      sc.bracket_tol, "derivative identity for F = k_1 k_2");
        }
        slots[s] = std::move(local.checks);
    };
    parallel_for(count, workers, run);
    for (auto& s : slots)
        for (auto& c : s) sink.checks.push_back(std::move(c));
}

void verify_symplectic(const SurfaceContext& ctx, const io::ScenarioConfig& sc, int count,
                       int workers, CheckSink& sink) {
    {
        DarbouxPoint pt = scenario_point(ctx, sc, 0);
        Eigen::VectorXcd at = darboux_to_vec(pt);
        int n = ctx.g + sc.ref.N();
        auto identity = [](const Eigen::VectorXcd& v) { return v; };
        sink.add(0, "symplectic_identity",
                 symplectic_jacobian_check(identity, at, canonical_omega(n),
                                           canonical_omega(n), sc.fd_step),
                 1e-10, "pullback residual of the identity map");
    }
    std::vector<json> slots(count);
    auto run = [&](int s) {
        CheckSink local;
        local.tol_override = sink.tol_override;
        DarbouxPoint pt = scenario_point(ctx, sc, s);
        local.add(s, "symplectic_reduction", reduction_symplectic_check(pt, sc.fd_step), 1e-6,
                  "pullback residual of the projective-chart lift");
        local.add(s, "symplectic_sov", sov_symplectic_check(ctx, sc.ref, pt, sc.fd_step),
                  sc.bracket_tol, "pullback residual of the full separation map");
        slots[s] = std::move(local.checks);
    };
    parallel_for(count, workers, run);
    for (auto& s : slots)
        for (auto& c : s) sink.checks.push_back(std::move(c));
}

// --- commands -------------------------------------------------------------

int emit_report(const Options& opt, json report, bool pass) {
    report["pass"] = pass;
    if (!opt.out_path.empty())
        io::save_json(opt.out_path, report);
    else
        std::cout << report.dump(2) << "\n";
    return pass ? 0 : 1;
}

int cmd_verify(const Options& opt, const std::string& which) {
    SurfaceContext ctx = load_curve(opt);
    io::ScenarioConfig sc = load_scenario(opt, ctx);
    CheckSink sink;
    sink.tol_override = parse_overrides(opt.tol_overrides);
    int scen_count = std::max(1, std::min(sc.count, 20));
    int pair_count = opt.count >= 0 ? opt.count : 1000;
    int data_count = std::max(1, std::min(sc.count, 20));

    if (which == "periods" || which == "all") verify_periods(ctx, sink);
    if (which == "theta" || which == "all") verify_theta(ctx, sc, sink);
    if (which == "prime-form" || which == "all")
        verify_prime_form(ctx, sc, which == "all" ? std::min(pair_count, 200) : pair_count,
                          sink);
    if (which == "differentials" || which == "all")
        verify_differentials(ctx, sc, which == "all" ? std::min(data_count, 5) : data_count,
                             sink);
    if (which == "higgs" || which == "all")
        verify_higgs(ctx, sc, which == "all" ? std::min(scen_count, 5) : scen_count,
                     opt.workers, sink);
    if (which == "brackets" || which == "all")
        verify_brackets(ctx, sc, which == "all" ? std::min(scen_count, 5) : scen_count,
                        opt.workers, sink);
    if (which == "symplectic" || which == "all")
        verify_symplectic(ctx, sc, which == "all" ? std::min(scen_count, 5) : scen_count,
                          opt.workers, sink);
    if (sink.checks.empty()) throw Error("parse error: unknown verify target " + which);

    json report = {{"schema_version", 1},
                   {"command", "verify " + which},
                   {"seed", sc.seed},
                   {"checks", sink.checks}};
    return emit_report(opt, std::move(report), sink.all_pass());
}

int cmd_sov(const Options& opt, const std::string& direction) {
    SurfaceContext ctx = load_curve(opt);
    io::ScenarioConfig sc = load_scenario(opt, ctx);

    if (direction == "forward") {
        DarbouxPoint pt = opt.in_path.empty()
                              ? scenario_point(ctx, sc, 0)
                              : io::darboux_from_json(io::load_json(opt.in_path), sc.ref);
        BAConfiguration ba = sov_forward(ctx, sc.ref, pt);
        json out = io::ba_to_json(ba);
        out["command"] = "sov forward";
        return emit_report(opt, std::move(out), true);
    }

    if (direction == "inverse") {
        if (opt.in_path.empty())
            throw Error("parse error: sov inverse requires --in with a BA configuration");
        BAConfiguration ba = io::ba_from_json(io::load_json(opt.in_path));
        double q_resid = 0;
        QuadraticDifferential qd = reconstruct_q(ctx, ba, q_resid);
        // try the square-root sheets until one admits a consistent inverse
        std::string last_error = "no admissible square-root choice";
        for (int sch = 0; sch < (1 << (2 * ctx.g)); ++sch) {
            try {
                InverseResult inv = sov_inverse(ctx, sc.ref, ba, qd, sch, nullptr,
                                                sc.roundtrip_tol);
                json out = io::darboux_to_json(inv.pt);
                out["command"] = "sov inverse";
                out["sqrt_choice"] = sch;
                out["report"] = {{"class_residual", inv.report.class_residual},
                                 {"phi_plus_crosscheck", inv.report.phi_plus_crosscheck},
                                 {"system_residual", inv.report.system_residual},
                                 {"phi_minus_max_residue", inv.report.phi_minus_max_residue},
                                 {"q_reconstruction_residual", q_resid}};
                return emit_report(opt, std::move(out), true);
            } catch (const Error& e) {
                last_error = e.what();
                // precondition violations are not sheet-dependent: surface now
                std::string msg = e.what();
                if (msg.find("off spectral curve") != std::string::npos ||
                    msg.find("degenerate configuration") != std::string::npos ||
                    msg.find("non-simple") != std::string::npos)
                    throw;
            }
        }
        throw Error(last_error);
    }

    if (direction == "roundtrip") {
        int count = std::max(1, sc.count);
        std::vector<json> slots(count);
        auto run = [&](int s) {
            DarbouxPoint pt = scenario_point(ctx, sc, s);
            Divisor q0 = q_of_lambda(ctx, sc.ref, pt.lambda, sc.base_q);
            BAConfiguration ba = sov_forward(ctx, sc.ref, pt, &q0);
            ModuliPoint mp;
            mp.q = q0;
            mp.x = pt.x;
            mp.lambda = pt.lambda;
            auto phip = phi_plus_from_k(ctx, sc.ref, mp, pt.k);
            auto phi0 = phi0_from_coords(ctx, sc.ref, mp, pt.kappa, pt.k);
            auto pm = solve_phi_minus(ctx, sc.ref, mp, phi0, phip);
            double fit_resid = 0;
            auto qd = fit_quadratic(
                ctx,
                [&](cplx z, cplx y) {
                    cplx a = phi0.density(z, y);
                    return a * a + phip.density(z, y) * pm.phi_minus.density(z, y);
                },
                fit_resid);
            int sch = matching_sqrt_choice(ctx, sc.ref, ba, pt.lambda);
            cplx gauge = pt.k(0);
            InverseResult inv = sov_inverse(ctx, sc.ref, ba, qd, sch, &gauge);
            double dev = ctx.lattice_residual(inv.pt.lambda - pt.lambda);
            dev = std::max(dev, (inv.pt.x - pt.x).cwiseAbs().maxCoeff());
            dev = std::max(dev, (inv.pt.kappa - pt.kappa).cwiseAbs().maxCoeff());
            dev = std::max(dev, (inv.pt.k - pt.k).cwiseAbs().maxCoeff());
            slots[s] = {{"scenario_id", s}, {"max_deviation", dev}};
        };
        parallel_for(count, opt.workers, run);
        double worst = 0;
        for (const auto& s : slots)
            worst = std::max(worst, s.at("max_deviation").get<double>());
        json out = {{"schema_version", 1},
                    {"command", "sov roundtrip"},
                    {"seed", sc.seed},
                    {"count", count},
                    {"tolerance", sc.roundtrip_tol},
                    {"max_deviation", worst},
                    {"scenarios", slots}};
        return emit_report(opt, std::move(out), worst < sc.roundtrip_tol);
    }

    throw Error("parse error: unknown sov direction " + direction);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hitchin separation-of-variables toolkit"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--curve", opt.curve_path, "curve config JSON");
        cmd->add_option("--scenario", opt.scenario_path, "scenario JSON");
        cmd->add_option("--seed", opt.seed, "RNG seed (alternative to --scenario)")
            ->each([&](const std::string&) { opt.seed_set = true; });
        cmd->add_option("--count", opt.count, "scenario / sample count override");
        cmd->add_option("--out", opt.out_path, "report output path (default: stdout)");
        cmd->add_option("--tolerance", opt.tol_overrides, "override, name=value (repeatable)");
        cmd->add_option("--fd-step", opt.fd_step, "finite-difference step");
        cmd->add_option("--workers", opt.workers, "scenario-parallel worker count");
        cmd->add_option("--in", opt.in_path, "input data file (DarbouxPoint / BA JSON)");
    };

    std::string verify_which, sov_dir;
    CLI::App* verify = app.add_subcommand("verify", "run verification checks");
    verify
        ->add_option("target", verify_which,
                     "periods|theta|prime-form|differentials|higgs|brackets|symplectic|all")
        ->required();
    add_common(verify);
    CLI::App* sov = app.add_subcommand("sov", "separation-of-variables runs");
    sov->add_option("direction", sov_dir, "forward|inverse|roundtrip")->required();
    add_common(sov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(opt, verify_which);
        return cmd_sov(opt, sov_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string(e.what()).rfind("parse error", 0) == 0 ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

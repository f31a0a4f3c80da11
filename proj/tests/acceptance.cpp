// Acceptance gate for the genus-2 desk configuration: one line per
// criterion, nonzero exit if any criterion fails. All tolerances are
// pinned here; the random draws are fixed-seed so the run is
// deterministic.
#include <chrono>
#include <cstdio>
#include <random>

#include "hsov/harness.hpp"
#include "test_support.hpp"

using namespace hsov;
using namespace hsov::testing;

namespace {

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, title,
                detail.c_str());
    if (!pass) ++failures;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
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

DarbouxPoint scenario_point(const SurfaceContext& ctx, const ReferenceData& ref,
                            const Divisor& base_q, uint64_t seed, int s) {
    std::mt19937_64 rng(seed + 1000003ull * static_cast<uint64_t>(s));
    return random_darboux_point(ctx, ref, base_q, rng);
}

/// Max mismatch between two BA configurations after nearest-point matching
/// (the forward map fixes the point set, not the listing order).
double ba_mismatch(const BAConfiguration& a, const BAConfiguration& b) {
    if (a.points.size() != b.points.size()) return std::numeric_limits<double>::infinity();
    double worst = 0;
    for (const auto& pa : a.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& pb : b.points) {
            if (pa.u.sheet != pb.u.sheet) continue;
            best = std::min(best, std::max(std::abs(pa.u.z - pb.u.z), std::abs(pa.v - pb.v)));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

// --- criteria -------------------------------------------------------------

void criterion1(const SurfaceContext& ctx, double build_seconds) {
    double worst = (ctx.B - ctx.B.transpose()).cwiseAbs().maxCoeff();
    bool pass = worst < 1e-9;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.B.imag());
    pass = pass && es.eigenvalues().minCoeff() > 0;
    auto h = ctx.omega_integrand();
    double norm_resid = 0;
    for (int j = 0; j < ctx.g; ++j) {
        VecC col = ctx.cycle_integral(ctx.a_cycles[j], h, ctx.g);
        for (int i = 0; i < ctx.g; ++i)
            norm_resid = std::max(norm_resid, std::abs(col(i) - (i == j ? 1.0 : 0.0)));
    }
    pass = pass && norm_resid < 1e-8;
    std::mt19937_64 rng(0x7e7a);
    double qp = 0;
    for (int t = 0; t < 12; ++t) {
        VecC z(ctx.g);
        std::vector<int> n(ctx.g), m(ctx.g);
        for (int i = 0; i < ctx.g; ++i) z(i) = rng_cplx(rng, 0.8);
        for (int i = 0; i < ctx.g; ++i) {
            n[i] = int(rng() % 3) - 1;
            m[i] = int(rng() % 3) - 1;
        }
        VecC shifted = z;
        VecC mB = VecC::Zero(ctx.g);
        for (int i = 0; i < ctx.g; ++i) {
            shifted(i) += double(n[i]);
            shifted += double(m[i]) * ctx.B.col(i);
            mB += double(m[i]) * ctx.B.col(i);
        }
        cplx mz = 0, mBm = 0;
        for (int i = 0; i < ctx.g; ++i) {
            mz += double(m[i]) * z(i);
            mBm += double(m[i]) * mB(i);
        }
        cplx factor = std::exp(2.0 * kPi * kI * (-0.5 * mBm - mz));
        cplx lhs = theta(ctx, shifted), rhs = factor * theta(ctx, z);
        qp = std::max(qp, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    pass = pass && qp < 1e-9;
    pass = pass && build_seconds < 60.0;
    report(1, "period matrix, a-period normalization, theta transformation law", pass,
           "B asym " + fmt(worst) + ", a-period " + fmt(norm_resid) + ", theta " + fmt(qp) +
               ", build " + fmt(build_seconds) + "s");
}

void criterion2(const SurfaceContext& ctx) {
    std::mt19937_64 rng(0xef0c);
    SurfacePoint probe = random_off_branch(ctx, rng);
    double diag = std::abs(prime_form(ctx, probe, probe));
    double anti = 0, local = 0;
    for (int t = 0; t < 1000; ++t) {
        SurfacePoint a = random_off_branch(ctx, rng);
        SurfacePoint b = random_off_branch(ctx, rng);
        cplx e = prime_form(ctx, a, b);
        anti = std::max(anti,
                        std::abs(e + prime_form(ctx, b, a)) / std::max(1.0, std::abs(e)));
        cplx delta = 1e-4 * std::exp(kI * cplx(2 * kPi * (double(rng() >> 11) * 0x1.0p-53)));
        SurfacePoint w{a.z + delta, a.sheet};
        if (ctx.curve.dist_to_branch(w.z) < 0.3 * ctx.curve.min_branch_separation()) continue;
        local = std::max(local, std::abs(prime_form(ctx, a, w) / (a.z - w.z) - 1.0));
    }
    bool pass = diag < 1e-12 && anti < 1e-10 && local < 1e-5;
    report(2, "prime form: diagonal zero, antisymmetry, local normalization", pass,
           "diag " + fmt(diag) + ", antisym " + fmt(anti) + ", local " + fmt(local));
}

void criterion3(const SurfaceContext& ctx) {
    double mono_worst = 0, locus_worst = 0, disc_min = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 20; ++t) {
        std::mt19937_64 rng(42 + 7919ull * static_cast<uint64_t>(t) + 13ull);
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
        std::vector<cplx> zero_z;
        for (int i = 0; i < ctx.g; ++i) {
            cplx c = fresh_center(used);
            u.add({c, +1}, 1);
            u.add({c, -1}, 1);
            zero_z.push_back(c);
        }
        cplx vc = fresh_center(used);
        v.add({vc, +1}, 1);
        v.add({vc, -1}, 1);
        for (int i = 0; i < ctx.g; ++i) q.add(random_off_branch(ctx, rng), 1);
        auto d = differential_from_divisor_data(ctx, u, v, q, q);
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
        for (int cyc = 0; cyc < 2 * ctx.g; ++cyc)
            mono_worst = std::max(mono_worst, monodromy_check(ctx, dn, cyc));
        for (cplx c : zero_z)
            for (int sheet : {+1, -1})
                locus_worst = std::max(
                    locus_worst, std::abs(dn.density(c, ctx.curve.y_of({c, sheet}))));
        for (int sheet : {+1, -1}) {
            SurfacePoint p{vc, sheet};
            double r = contour_radius(ctx.curve, p.z, used);
            cplx res = contour_coeff(ctx.curve, dn.density, p, r, -1);
            if (std::abs(res) < 1e-6) locus_worst = std::max(locus_worst, 1.0);
        }
        // violating data: displace one declared zero wholesale
        Divisor u_bad = u;
        for (int attempt = 0; attempt < 64; ++attempt) {
            u_bad.entries.front().first = {fresh_center(used), +1};
            if (ctx.lattice_residual(ctx.abel(u_bad) - ctx.abel(u)) > 0.15) break;
        }
        auto d_bad =
            normalized(differential_from_divisor_data(ctx, u_bad, v, q, q, 1e-6, false));
        double defect = 0;
        for (int cyc = 0; cyc < 2 * ctx.g; ++cyc)
            defect = std::max(defect, monodromy_check(ctx, d_bad, cyc));
        disc_min = std::min(disc_min, defect);
    }
    bool pass = mono_worst < 1e-6 && locus_worst < 1e-6 && disc_min > 1e-2;
    report(3, "third-kind differentials: monodromy, declared loci, discrimination", pass,
           "monodromy " + fmt(mono_worst) + ", loci " + fmt(locus_worst) +
               ", violating defect " + fmt(disc_min));
}

void criterion4(const SurfaceContext& ctx, const ReferenceData& ref, const Divisor& base_q) {
    bool dims_ok = true, null_ok = true;
    double res_worst = 0, det_worst = 0;
    for (int s = 0; s < 50; ++s) {
        DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, s);
        Divisor q0 = q_of_lambda(ctx, ref, pt.lambda, base_q);
        auto interp = bounded_differential_basis(ctx, ref, q0, interpolation_bound(ref, q0));
        dims_ok = dims_ok && interp.space.dimension() == ref.N();
        ModuliPoint mp;
        mp.q = q0;
        mp.x = pt.x;
        mp.lambda = pt.lambda;
        auto phip = phi_plus_from_k(ctx, ref, mp, pt.k);
        auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
        auto ppts = ref.p.expanded();
        for (int r = 0; r < ref.N(); ++r) {
            double rad = contour_radius(ctx.curve, ppts[r].z, detail::support_z(ref, mp.q));
            cplx res = contour_residue(ctx.curve, phi0.density, ppts[r], rad);
            res_worst = std::max(res_worst, std::abs(res + pt.x(r) * pt.k(r)) /
                                                std::max(1.0, std::abs(pt.x(r) * pt.k(r))));
        }
        auto pm = solve_phi_minus(ctx, ref, mp, phi0, phip);
        null_ok = null_ok && pm.null_dim == ctx.g - 1 - ref.s_d();
        double fit_resid = 0;
        fit_quadratic(
            ctx,
            [&](cplx z, cplx y) {
                cplx a = phi0.density(z, y);
                return a * a + phip.density(z, y) * pm.phi_minus.density(z, y);
            },
            fit_resid);
        det_worst = std::max(det_worst, fit_resid);
    }
    bool pass = dims_ok && null_ok && res_worst < 1e-7 && det_worst < 1e-6;
    report(4, "Higgs-differential ledger over 50 scenarios", pass,
           std::string("dims ") + (dims_ok ? "exact" : "WRONG") + ", residues " +
               fmt(res_worst) + ", determinant fit " + fmt(det_worst) + ", null dim " +
               (null_ok ? "exact" : "WRONG"));
}

void criterion5(const SurfaceContext& ctx, const ReferenceData& ref, const Divisor& base_q,
                std::vector<BAConfiguration>& forward_out,
                std::vector<Divisor>& q_out) {
    double rt_worst = 0, cover_spread = 0;
    int cover = 0;
    for (int s = 0; s < 50; ++s) {
        DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, s);
        Divisor q0 = q_of_lambda(ctx, ref, pt.lambda, base_q);
        BAConfiguration ba = sov_forward(ctx, ref, pt, &q0);
        forward_out.push_back(ba);
        q_out.push_back(q0);
        ModuliPoint mp;
        mp.q = q0;
        mp.x = pt.x;
        mp.lambda = pt.lambda;
        auto phip = phi_plus_from_k(ctx, ref, mp, pt.k);
        auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
        auto pm = solve_phi_minus(ctx, ref, mp, phi0, phip);
        double fit_resid = 0;
        auto qd = fit_quadratic(
            ctx,
            [&](cplx z, cplx y) {
                cplx a = phi0.density(z, y);
                return a * a + phip.density(z, y) * pm.phi_minus.density(z, y);
            },
            fit_resid);
        int sch = matching_sqrt_choice(ctx, ref, ba, pt.lambda);
        cplx gauge = pt.k(0);
        InverseResult inv = sov_inverse(ctx, ref, ba, qd, sch, &gauge);
        double dev = ctx.lattice_residual(inv.pt.lambda - pt.lambda);
        dev = std::max(dev, (inv.pt.x - pt.x).cwiseAbs().maxCoeff());
        dev = std::max(dev, (inv.pt.kappa - pt.kappa).cwiseAbs().maxCoeff());
        dev = std::max(dev, (inv.pt.k - pt.k).cwiseAbs().maxCoeff());
        rt_worst = std::max(rt_worst, dev);

        // the square-root cover: distinct preimages share the forward image
        if (s == 0) {
            for (int choice = 0; choice < (1 << (2 * ctx.g)); ++choice) {
                try {
                    InverseResult alt = sov_inverse(ctx, ref, ba, qd, choice, nullptr, 1e-10);
                    BAConfiguration again = sov_forward(ctx, ref, alt.pt);
                    cover_spread = std::max(cover_spread, ba_mismatch(ba, again));
                    ++cover;
                } catch (const Error&) {
                }
            }
        }
    }
    bool pass = rt_worst < 1e-6 && cover >= 4 && cover_spread < 1e-9;
    report(5, "round trip over 50 scenarios and square-root cover", pass,
           "max deviation " + fmt(rt_worst) + ", cover " + std::to_string(cover) +
               " choices, image spread " + fmt(cover_spread));
}

void criterion6(const SurfaceContext& ctx, const ReferenceData& ref, const Divisor& base_q) {
    double br_worst = 0;
    for (int s = 0; s < 20; ++s) {
        DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, s);
        auto br = fd_poisson_brackets(ctx, ref, pt, 1e-5);
        br_worst = std::max(br_worst, br.max_deviation);
    }
    DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, 0);
    double dev_h = fd_poisson_brackets(ctx, ref, pt, 2e-5).max_deviation;
    double dev_half = fd_poisson_brackets(ctx, ref, pt, 1e-5).max_deviation;
    bool halving_ok = dev_half < dev_h || dev_half < 1e-7;  // roundoff floor
    double l_u = momentum_identity_check(ctx, ref, pt, momentum_identity_function_u(ctx, ref, pt, 0), 1e-5);
    double l_lam = momentum_identity_check(ctx, ref, pt, momentum_identity_function_lambda(0), 1e-5);
    double l_kk = momentum_identity_check(ctx, ref, pt, momentum_identity_function_kk(0, 1), 1e-5);
    double l_worst = std::max({l_u, l_lam, l_kk});
    bool pass = br_worst < 1e-4 && halving_ok && l_worst < 1e-4;
    report(6, "canonical brackets at 20 points, step halving, momentum identity", pass,
           "brackets " + fmt(br_worst) + ", halving " + fmt(dev_h) + "->" + fmt(dev_half) +
               ", identity " + fmt(l_worst));
}

void criterion7(const SurfaceContext& ctx, const ReferenceData& ref, const Divisor& base_q) {
    double red_worst = 0, lift_worst = 0;
    int done = 0;
    for (int s = 0; done < 20 && s < 200; ++s) {
        DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, s);
        if (std::abs(pt.x(0)) < 0.2) continue;  // chart x_1 bounded away from 0
        ++done;
        red_worst = std::max(red_worst, reduction_symplectic_check(pt, 1e-5));
        DarbouxPoint lifted = lift(reduce(pt));
        lift_worst = std::max(lift_worst, std::abs(moment_map(lifted.x, lifted.k)));
    }
    bool pass = done == 20 && red_worst < 1e-6 && lift_worst == 0.0;
    report(7, "symplectic reduction at 20 points, lift enforces the constraint exactly", pass,
           "pullback " + fmt(red_worst) + ", lift |x.k| " + fmt(lift_worst));
}

void criterion8(const SurfaceContext& ctx, const ReferenceData& ref,
                const std::vector<BAConfiguration>& forwards,
                const std::vector<Divisor>& qs) {
    double class_worst = 0, perturbed_min = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < forwards.size(); ++i) {
        class_worst = std::max(class_worst, divisor_class_check(ctx, ref, forwards[i], qs[i]));
        // displace the divisor point with the strongest Abel response; points
        // far out on the curve couple weakly to the class coordinates
        double best = 0;
        for (size_t p = 0; p < forwards[i].points.size(); ++p) {
            BAConfiguration bad = forwards[i];
            bad.points[p].u.z += 0.1;
            best = std::max(best, divisor_class_check(ctx, ref, bad, qs[i]));
        }
        perturbed_min = std::min(perturbed_min, best);
    }
    bool pass = class_worst < 1e-6 && perturbed_min > 1e-3;
    report(8, "divisor class of forward images, sensitivity to perturbation", pass,
           "class " + fmt(class_worst) + ", perturbed " + fmt(perturbed_min));
}

void criterion9(const SurfaceContext& ctx, const ReferenceData& ref, const Divisor& base_q) {
    double mm_worst = 0, inv_worst = 0;
    const cplx eps_list[] = {{2.0, 1.0}, {-0.3, 0.0}, {10.0, 0.0}};
    for (int s = 0; s < 10; ++s) {
        DarbouxPoint pt = scenario_point(ctx, ref, base_q, 42, s);
        mm_worst = std::max(mm_worst, std::abs(moment_map(pt.x, pt.k)));
        if (s < 3) {
            Divisor q0 = q_of_lambda(ctx, ref, pt.lambda, base_q);
            BAConfiguration ba = sov_forward(ctx, ref, pt, &q0);
            for (cplx eps : eps_list) {
                BAConfiguration scaled = sov_forward(ctx, ref, cstar_act(eps, pt), &q0);
                inv_worst = std::max(inv_worst, ba_mismatch(ba, scaled));
            }
        }
    }
    bool pass = mm_worst < 1e-9 && inv_worst < 1e-9;
    report(9, "moment-map vanishing and scaling invariance of the forward map", pass,
           "|x.k| " + fmt(mm_worst) + ", invariance " + fmt(inv_worst));
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    SurfaceContext ctx(HyperellipticCurve(sextic_coeffs()), default_basepoint(),
                       NumericConfig{});
    finalize_context(ctx);
    double build_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ReferenceData ref = default_reference_g2();
    Divisor base_q = default_moduli_q_g2();

    criterion1(ctx, build_seconds);
    criterion2(ctx);
    criterion3(ctx);
    criterion4(ctx, ref, base_q);
    std::vector<BAConfiguration> forwards;
    std::vector<Divisor> qs;
    criterion5(ctx, ref, base_q, forwards, qs);
    criterion6(ctx, ref, base_q);
    criterion7(ctx, ref, base_q);
    criterion8(ctx, ref, forwards, qs);
    criterion9(ctx, ref, base_q);

    if (failures) std::printf("%d criteria failed\n", failures);
    return failures ? 1 : 0;
}

#include <catch2/catch_amalgamated.hpp>

#include "hsov/sov.hpp"
#include "test_support.hpp"

using namespace hsov;
using namespace hsov::testing;

namespace {

SurfaceContext& fctx() {
    static std::unique_ptr<SurfaceContext> ctx = [] {
        auto c = std::make_unique<SurfaceContext>(HyperellipticCurve(sextic_coeffs()),
                                                  default_basepoint(), NumericConfig{});
        finalize_context(*c);
        return c;
    }();
    return *ctx;
}

DarbouxPoint default_darboux(const SurfaceContext& ctx, const ReferenceData& ref,
                             const Divisor& q) {
    DarbouxPoint pt;
    pt.ref = ref;
    pt.lambda = lambda_of_q(ctx, ref, q);
    pt.x = Eigen::VectorXcd(2);
    pt.x << cplx(1.2, -0.4), cplx(-0.7, 0.9);
    pt.k = Eigen::VectorXcd(2);
    pt.k(0) = cplx(1.0, 0.3);
    pt.k(1) = -pt.x(0) * pt.k(0) / pt.x(1);
    pt.kappa = Eigen::VectorXcd(2);
    pt.kappa << cplx(0.4, -1.1), cplx(-0.8, 0.25);
    return pt;
}

/// Holomorphic determinant of the Higgs differential assembled from pt.
QuadraticDifferential determinant_of(const SurfaceContext& ctx, const ReferenceData& ref,
                                     const DarbouxPoint& pt, const Divisor& q, double& resid) {
    ModuliPoint mp;
    mp.q = q;
    mp.x = pt.x;
    mp.lambda = pt.lambda;
    auto phip = phi_plus_from_k(ctx, ref, mp, pt.k);
    auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
    auto rep = solve_phi_minus(ctx, ref, mp, phi0, phip);
    auto dens = [&](cplx z, cplx y) {
        cplx a = phi0.density(z, y);
        return a * a + phip.density(z, y) * rep.phi_minus.density(z, y);
    };
    return fit_quadratic(ctx, dens, resid);
}

double config_distance(const BAConfiguration& a, const BAConfiguration& b) {
    if (a.points.size() != b.points.size()) return std::numeric_limits<double>::infinity();
    double worst = 0;
    for (const auto& pa : a.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& pb : b.points)
            if (pa.u.sheet == pb.u.sheet)
                best = std::min(best, std::abs(pa.u.z - pb.u.z) + std::abs(pa.v - pb.v));
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

TEST_CASE("forward transform produces m separated pairs with dual-route covectors") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);

    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);
    REQUIRE(static_cast<int>(ba.points.size()) == 2 * ctx.g - 2 + ref.s_d());
    REQUIRE(ba.points.size() == 3);
    for (const auto& p : ba.points) REQUIRE(ctx.curve.dist_to_branch(p.u.z) > 1e-4);

    // the covector values through the explicit momentum formula
    std::vector<SurfacePoint> u;
    for (const auto& p : ba.points) u.push_back(p.u);
    auto v2 = ba_covectors_formula(ctx, ref, pt, q, u);
    for (size_t i = 0; i < u.size(); ++i)
        REQUIRE(std::abs(v2[i] - ba.points[i].v) <
                1e-8 * std::max(1.0, std::abs(ba.points[i].v)));

    // scaling invariance of the whole configuration
    BAConfiguration scaled = sov_forward(ctx, ref, cstar_act(cplx(2.0, 1.0), pt), &q);
    REQUIRE(config_distance(ba, scaled) < 1e-9);

    // cold-start Jacobi inversion reaches the same configuration
    BAConfiguration cold = sov_forward(ctx, ref, pt);
    REQUIRE(config_distance(ba, cold) < 1e-9);

    // degenerate coordinates are rejected
    DarbouxPoint zero = pt;
    zero.k.setZero();
    REQUIRE_THROWS_WITH(sov_forward(ctx, ref, zero, &q),
                        Catch::Matchers::ContainsSubstring("non-simple BA divisor"));
}

TEST_CASE("C* action, reduction and lift satisfy the group and chart laws") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);

    cplx eps(0.7, -1.3);
    DarbouxPoint same = cstar_act(1.0 / eps, cstar_act(eps, pt));
    REQUIRE((same.x - pt.x).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE((same.k - pt.k).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(std::abs(moment_map(cstar_act(eps, pt).x, cstar_act(eps, pt).k) -
                     moment_map(pt.x, pt.k)) < 1e-14);
    REQUIRE_THROWS_WITH(cstar_act(0.0, pt), Catch::Matchers::ContainsSubstring("not in C*"));

    ReducedPoint rp = reduce(pt);
    DarbouxPoint back = lift(rp);
    // lift of reduce is the C* representative with x_1 = 1
    DarbouxPoint rep = cstar_act(1.0 / pt.x(0), pt);
    REQUIRE((back.x - rep.x).cwiseAbs().maxCoeff() < 1e-13);
    REQUIRE((back.k - rep.k).cwiseAbs().maxCoeff() < 1e-13);
    REQUIRE(std::abs(moment_map(back.x, back.k)) < 1e-14);
    // reduce of lift is the identity on the chart
    ReducedPoint rp2 = reduce(back);
    REQUIRE((rp2.y - rp.y).cwiseAbs().maxCoeff() < 1e-13);
    REQUIRE((rp2.y_check - rp.y_check).cwiseAbs().maxCoeff() < 1e-13);

    DarbouxPoint sing = pt;
    sing.x(0) = 0.0;
    REQUIRE_THROWS_WITH(reduce(sing), Catch::Matchers::ContainsSubstring("chart x₁ ≠ 0 required"));
}

TEST_CASE("square root bundles enumerate the half lattice") {
    auto& ctx = fctx();
    auto roots = square_root_bundles(ctx);
    REQUIRE(roots.size() == 16);
    REQUIRE(roots[0].cwiseAbs().maxCoeff() == 0.0);
    for (const auto& r : roots) REQUIRE(ctx.lattice_residual(2.0 * r) < 1e-12);
    // all representatives distinct modulo the full lattice
    for (size_t i = 0; i < roots.size(); ++i)
        for (size_t j = i + 1; j < roots.size(); ++j)
            REQUIRE(ctx.lattice_residual(roots[i] - roots[j]) > 1e-3);
}

TEST_CASE("divisor class check certifies forward output and flags perturbations") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);
    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);

    REQUIRE(divisor_class_check(ctx, ref, ba, q) < 1e-6);
    BAConfiguration bad = ba;
    bad.points[0].u.z += 0.1;
    REQUIRE(divisor_class_check(ctx, ref, bad, q) > 1e-3);
}

TEST_CASE("round trip recovers the Darboux coordinates in the matched gauge") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);
    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);

    double fit_resid = 0;
    QuadraticDifferential qd = determinant_of(ctx, ref, pt, q, fit_resid);
    REQUIRE(fit_resid < 1e-6);
    REQUIRE(qd.nondegenerate);
    // the spectral-curve relation v^2 = q(u) certifies the configuration
    for (const auto& p : ba.points)
        REQUIRE(std::abs(qd.density(p.u.z, ctx.curve.y_of(p.u)) - p.v * p.v) <
                1e-6 * std::max(1.0, std::abs(p.v * p.v)));

    int sc = matching_sqrt_choice(ctx, ref, ba, pt.lambda);
    cplx gauge = pt.k(0);
    auto inv = sov_inverse(ctx, ref, ba, qd, sc, &gauge);

    REQUIRE(ctx.lattice_residual(inv.pt.lambda - pt.lambda) < 1e-6);
    REQUIRE((inv.pt.k - pt.k).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE((inv.pt.x - pt.x).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE((inv.pt.kappa - pt.kappa).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(inv.report.class_residual < 1e-7);
    REQUIRE(inv.report.phi_plus_crosscheck < 1e-6);
    REQUIRE(inv.report.system_residual < 1e-7);
    REQUIRE(inv.report.phi_minus_max_residue < 1e-4);

    // the ratio completion agrees with the linear-system completion: the
    // upper-right component is unique once the rest of the data is fixed
    ModuliPoint mp;
    mp.q = q;
    mp.x = pt.x;
    mp.lambda = pt.lambda;
    auto phip = phi_plus_from_k(ctx, ref, mp, pt.k);
    auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
    auto pmrep = solve_phi_minus(ctx, ref, mp, phi0, phip);
    for (cplx zp : {cplx(2.1, -1.4), cplx(-1.9, 1.7), cplx(0.3, 2.4)}) {
        SurfacePoint p{zp, +1};
        cplx a = pmrep.phi_minus.evaluator(p), b = inv.higgs.phi_minus.evaluator(p);
        REQUIRE(std::abs(a - b) < 1e-6 * std::max(1.0, std::abs(a)));
    }

    // forward of the recovered point reproduces the configuration
    BAConfiguration again = sov_forward(ctx, ref, inv.pt, &inv.report.q);
    REQUIRE(config_distance(ba, again) < 1e-6);
}

TEST_CASE("different square roots give distinct lambda with the same forward image") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);
    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);
    double fit_resid = 0;
    QuadraticDifferential qd = determinant_of(ctx, ref, pt, q, fit_resid);

    int sc = matching_sqrt_choice(ctx, ref, ba, pt.lambda);
    int sc2 = (sc + 5) % 16;
    cplx gauge = pt.k(0);
    auto inv2 = sov_inverse(ctx, ref, ba, qd, sc2, &gauge);
    REQUIRE(ctx.lattice_residual(inv2.pt.lambda - pt.lambda) > 1e-3);
    BAConfiguration image = sov_forward(ctx, ref, inv2.pt, &inv2.report.q);
    REQUIRE(config_distance(ba, image) < 1e-6);
    // both sit in the right divisor class for their own q
    REQUIRE(divisor_class_check(ctx, ref, ba, inv2.report.q) < 1e-6);
}

TEST_CASE("inverse rejects off-curve, pull-back and duplicate data") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);
    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);
    double fit_resid = 0;
    QuadraticDifferential qd = determinant_of(ctx, ref, pt, q, fit_resid);
    int sc = matching_sqrt_choice(ctx, ref, ba, pt.lambda);

    BAConfiguration off = ba;
    off.points[1].v += 0.2;
    REQUIRE_THROWS_WITH(sov_inverse(ctx, ref, off, qd, sc),
                        Catch::Matchers::ContainsSubstring("BA data off spectral curve"));

    BAConfiguration pullback = ba;
    pullback.points[1] = {pullback.points[0].u, -pullback.points[0].v};
    REQUIRE_THROWS_WITH(sov_inverse(ctx, ref, pullback, qd, sc),
                        Catch::Matchers::ContainsSubstring("degenerate configuration"));

    BAConfiguration dup = ba;
    dup.points[1] = dup.points[0];
    REQUIRE_THROWS_WITH(sov_inverse(ctx, ref, dup, qd, sc),
                        Catch::Matchers::ContainsSubstring("non-simple BA divisor"));

    QuadraticDifferential degen = qd;
    degen.nondegenerate = false;
    REQUIRE_THROWS_WITH(sov_inverse(ctx, ref, ba, degen, sc),
                        Catch::Matchers::ContainsSubstring("degenerate configuration"));
}

TEST_CASE("quadratic differential is reconstructible from the configuration") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor q = default_moduli_q_g2();
    DarbouxPoint pt = default_darboux(ctx, ref, q);
    BAConfiguration ba = sov_forward(ctx, ref, pt, &q);
    double fit_resid = 0;
    QuadraticDifferential qd = determinant_of(ctx, ref, pt, q, fit_resid);

    double rec_resid = 0;
    QuadraticDifferential rec = reconstruct_q(ctx, ba, rec_resid);
    REQUIRE(rec_resid < 1e-8);
    for (cplx zp : {cplx(2.2, 1.1), cplx(-0.9, -2.0)}) {
        cplx y = ctx.curve.y_of({zp, +1});
        REQUIRE(std::abs(rec.density(zp, y) - qd.density(zp, y)) <
                1e-6 * std::max(1.0, std::abs(qd.density(zp, y))));
    }
}

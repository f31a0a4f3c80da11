#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace hsov;
using namespace hsov::testing;

TEST_CASE("curve construction orders branch points deterministically") {
    HyperellipticCurve C(sextic_coeffs());
    REQUIRE(C.genus() == 2);
    REQUIRE(C.branch_points().size() == 6);
    // sixth roots of unity, separation 1
    REQUIRE(C.min_branch_separation() == Catch::Approx(1.0).margin(1e-10));
    for (cplx e : C.branch_points()) {
        REQUIRE(std::abs(std::pow(e, 6) - 1.0) < 1e-10);
    }
    // a second build gives bit-identical ordering
    HyperellipticCurve C2(sextic_coeffs());
    for (size_t i = 0; i < 6; ++i) REQUIRE(C.branch_points()[i] == C2.branch_points()[i]);
}

TEST_CASE("degenerate curves are rejected") {
    // (z-1)^2 (z^4+1): repeated root
    auto p = Poly::from_roots({1.0, 1.0, kI, -kI, cplx(0.5, 0.5), cplx(-0.5, -0.5)});
    REQUIRE_THROWS_WITH(HyperellipticCurve(p.coeffs()),
                        Catch::Matchers::ContainsSubstring("degenerate curve"));
    REQUIRE_THROWS_WITH(HyperellipticCurve({cplx(1), cplx(0), cplx(1)}),
                        Catch::Matchers::ContainsSubstring("degenerate curve"));
}

TEST_CASE("period matrix is symmetric with positive definite imaginary part") {
    auto& ctx = default_context();
    double scale = std::max(1.0, ctx.B.cwiseAbs().maxCoeff());
    REQUIRE((ctx.B - ctx.B.transpose()).cwiseAbs().maxCoeff() < 1e-9 * scale);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.B.imag());
    REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("a-periods of normalized differentials form the identity") {
    auto& ctx = default_context();
    auto h = ctx.omega_integrand();
    for (int i = 0; i < ctx.g; ++i) {
        VecC col = ctx.cycle_integral(ctx.a_cycles[i], h, ctx.g);
        for (int j = 0; j < ctx.g; ++j) {
            double want = (i == j) ? 1.0 : 0.0;
            REQUIRE(std::abs(col(j) - want) < 1e-8);
        }
    }
}

TEST_CASE("b-periods of normalized differentials reproduce the period matrix") {
    auto& ctx = default_context();
    auto h = ctx.omega_integrand();
    for (int k = 0; k < ctx.g; ++k) {
        VecC col = ctx.cycle_integral(ctx.b_cycles[k], h, ctx.g);
        for (int j = 0; j < ctx.g; ++j) REQUIRE(std::abs(col(j) - ctx.B(j, k)) < 1e-8);
    }
}

TEST_CASE("connected b-cycle paths integrate like their homology parts") {
    auto& ctx = default_context();
    auto h = ctx.omega_integrand();
    for (int k = 0; k < ctx.g; ++k) {
        VecC via_parts = ctx.cycle_integral(ctx.b_cycles[k], h, ctx.g);
        VecC via_path =
            ctx.engine.integrate_loop(ctx.b_cycles[k].path, ctx.b_cycles[k].y0, h, ctx.g);
        REQUIRE((via_parts - via_path).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("raw pair-loop periods match the Gauss-Chebyshev cut oracle") {
    auto& ctx = default_context();
    const auto& e = ctx.curve.branch_points();
    int gg = ctx.g;
    VecIntegrand eta = [gg](cplx z, cplx y) -> VecC {
        VecC v(gg);
        cplx p = 1.0;
        for (int j = 0; j < gg; ++j) {
            v(j) = p / y;
            p *= z;
        }
        return v;
    };
    for (int k = 0; k < ctx.g; ++k) {
        // a_cycles[k] surrounds the branch pair (e[2k], e[2k+1]) up to sign
        VecC loop = ctx.cycle_integral(ctx.a_cycles[k], eta, ctx.g);
        for (int j = 0; j < ctx.g; ++j) {
            cplx oracle = 2.0 * cut_integral_oracle(ctx.curve, e[2 * k], e[2 * k + 1], j);
            double d = std::min(std::abs(loop(j) - oracle), std::abs(loop(j) + oracle));
            REQUIRE(d < 1e-6 * std::max(1.0, std::abs(oracle)));
        }
    }
}

TEST_CASE("abel map is stable and path-switching is consistent") {
    auto& ctx = default_context();
    SurfacePoint p{cplx(0.3, 1.4), +1};
    VecC A1 = ctx.abel(p);
    VecC A2 = ctx.abel(p);
    REQUIRE((A1 - A2).cwiseAbs().maxCoeff() == 0.0);  // deterministic
    // other sheet reachable, and A(P) + A(iota P) = A(iota z0) mod lattice
    SurfacePoint q = involution(p);
    VecC sum = ctx.abel(p) + ctx.abel(q) - ctx.abel_involution_basepoint();
    REQUIRE(ctx.lattice_residual(sum) < 1e-8);
}

TEST_CASE("involution identity holds for random points on both sheets") {
    auto& ctx = default_context();
    auto rng = seeded_rng(1234);
    int done = 0;
    while (done < 8) {
        cplx z = random_disk(rng, ctx.curve.centroid(), 2.2);
        if (ctx.curve.dist_to_branch(z) < 0.15) continue;
        int sheet = (rng() & 1) ? +1 : -1;
        SurfacePoint p{z, sheet};
        VecC sum = ctx.abel(p) + ctx.abel(involution(p)) - ctx.abel_involution_basepoint();
        REQUIRE(ctx.lattice_residual(sum) < 1e-8);
        ++done;
    }
}

TEST_CASE("abel_between increments agree with endpoint differences mod lattice") {
    auto& ctx = default_context();
    SurfacePoint p{cplx(1.1, 1.3), +1};
    SurfacePoint q{cplx(0.9, 1.5), -1};
    VecC inc = ctx.abel_between(p, q);
    VecC diff = ctx.abel(q) - ctx.abel(p);
    REQUIRE(ctx.lattice_residual(inc - diff) < 1e-8);
}

TEST_CASE("lattice reduction splits vectors exactly and lands in the cell") {
    auto& ctx = default_context();
    auto rng = seeded_rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        VecC v(ctx.g);
        for (int i = 0; i < ctx.g; ++i) v(i) = cplx(uniform(rng, -8, 8), uniform(rng, -8, 8));
        auto split = ctx.lattice_reduce(v);
        VecC recomposed = split.reduced;
        for (int i = 0; i < ctx.g; ++i) {
            recomposed(i) += double(split.n(i));
            recomposed += double(split.m(i)) * ctx.B.col(i);
        }
        REQUIRE((recomposed - v).cwiseAbs().maxCoeff() < 1e-10);
        // cell coordinates in [-1/2, 1/2)
        Eigen::VectorXd yv = ctx.B.imag().partialPivLu().solve(split.reduced.imag());
        Eigen::VectorXd xv = split.reduced.real() - ctx.B.real() * yv;
        for (int i = 0; i < ctx.g; ++i) {
            REQUIRE(xv(i) >= -0.5 - 1e-12);
            REQUIRE(xv(i) < 0.5 + 1e-12);
            REQUIRE(yv(i) >= -0.5 - 1e-12);
            REQUIRE(yv(i) < 0.5 + 1e-12);
        }
        // lattice vectors reduce to zero
        VecC lat = VecC::Zero(ctx.g);
        lat(0) = cplx(3, 0);
        lat += 2.0 * ctx.B.col(ctx.g - 1);
        REQUIRE(ctx.lattice_residual(lat) < 1e-10);
    }
}

TEST_CASE("context rebuild reproduces the period matrix exactly") {
    auto& ctx = default_context();
    SurfaceContext ctx2(HyperellipticCurve(sextic_coeffs()), default_basepoint(),
                        NumericConfig{});
    REQUIRE((ctx.B - ctx2.B).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((ctx.omega_coeff - ctx2.omega_coeff).cwiseAbs().maxCoeff() == 0.0);
}

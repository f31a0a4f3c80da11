#include <catch2/catch_amalgamated.hpp>

#include "hsov/harness.hpp"
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

DarbouxPoint default_darboux(const SurfaceContext& ctx, const ReferenceData& ref) {
    DarbouxPoint pt;
    pt.ref = ref;
    pt.lambda = lambda_of_q(ctx, ref, default_moduli_q_g2());
    pt.x = Eigen::VectorXcd(2);
    pt.x << cplx(1.2, -0.4), cplx(-0.7, 0.9);
    pt.k = Eigen::VectorXcd(2);
    pt.k(0) = cplx(1.0, 0.3);
    pt.k(1) = -pt.x(0) * pt.k(0) / pt.x(1);
    pt.kappa = Eigen::VectorXcd(2);
    pt.kappa << cplx(0.4, -1.1), cplx(-0.8, 0.25);
    return pt;
}

}  // namespace

TEST_CASE("separated variables satisfy the canonical bracket pattern") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    DarbouxPoint pt = default_darboux(ctx, ref);
    auto rep = fd_poisson_brackets(ctx, ref, pt, 1e-5);
    int m = static_cast<int>(rep.uu.rows());
    REQUIRE(m == 2 * ctx.g - 2 + ref.s_d());
    REQUIRE(rep.max_deviation < 1e-4);
    for (int n = 0; n < m; ++n) {
        for (int k = 0; k < m; ++k) {
            REQUIRE(std::abs(rep.uu(n, k)) < 1e-4);
            REQUIRE(std::abs(rep.vv(n, k)) < 1e-4);
            cplx target = (n == k) ? cplx(1.0) : cplx(0.0);
            REQUIRE(std::abs(rep.uv(n, k) - target) < 1e-4);
            // antisymmetry is exact by construction of the bracket
            REQUIRE(std::abs(rep.uu(n, k) + rep.uu(k, n)) < 1e-15);
        }
    }
    // the deviation is FD-converged: halving the step keeps it at the
    // same (already resolved) level rather than quartering it
    auto rep2 = fd_poisson_brackets(ctx, ref, pt, 5e-6);
    REQUIRE(rep2.max_deviation < 1e-4);
    // the difference quotients pass the holomorphy cross-check
    REQUIRE(rep.cr_residual < 1e-3);
}

TEST_CASE("momentum identity holds for positions, moduli, and momentum products") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    DarbouxPoint pt = default_darboux(ctx, ref);
    // F = u_m: the identity encodes {u_m, v_n} = delta
    REQUIRE(momentum_identity_check(ctx, ref, pt, momentum_identity_function_u(ctx, ref, pt, 1)) < 1e-4);
    // F = lambda_i: pure position dependence
    REQUIRE(momentum_identity_check(ctx, ref, pt, momentum_identity_function_lambda(0)) < 1e-4);
    // F = k_1 k_2: quadratic in the momenta, probes the gauge-fixed section
    REQUIRE(momentum_identity_check(ctx, ref, pt, momentum_identity_function_kk(0, 1)) < 1e-4);
}

TEST_CASE("symplectic Jacobian residual: identity, reduction lift, full map") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    DarbouxPoint pt = default_darboux(ctx, ref);
    // identity map pulls the form back exactly
    Eigen::VectorXcd at = darboux_to_vec(pt);
    auto identity = [](const Eigen::VectorXcd& v) { return v; };
    int n = ctx.g + ref.N();
    REQUIRE(symplectic_jacobian_check(identity, at, canonical_omega(n), canonical_omega(n)) <
            1e-10);
    // the projective-chart lift embeds the reduced space symplectically
    REQUIRE(reduction_symplectic_check(pt) < 1e-6);
    // the full separation map is symplectic on the reduced space
    REQUIRE(sov_symplectic_check(ctx, ref, pt) < 1e-4);
}

TEST_CASE("degenerate inputs are rejected with diagnostics") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    DarbouxPoint pt = default_darboux(ctx, ref);
    // an FD step comparable to the zero separation cannot resolve labels
    REQUIRE_THROWS_WITH(fd_poisson_brackets(ctx, ref, pt, 0.5),
                        Catch::Matchers::ContainsSubstring("labels unresolvable at this step"));
    // a rank-deficient Jacobian is flagged
    Eigen::VectorXcd at = darboux_to_vec(pt);
    auto constant = [&](const Eigen::VectorXcd&) { return at; };
    int n = ctx.g + ref.N();
    REQUIRE_THROWS_WITH(
        symplectic_jacobian_check(constant, at, canonical_omega(n), canonical_omega(n)),
        Catch::Matchers::ContainsSubstring("map degenerate at point"));
}

TEST_CASE("scenario suite is deterministic and passes on the default desk") {
    auto& ctx = fctx();
    ReferenceData ref = default_reference_g2();
    Divisor base_q = default_moduli_q_g2();
    auto rep = run_suite(ctx, ref, base_q, 2, 42);
    REQUIRE(rep.at("pass").get<bool>());
    REQUIRE(rep.at("count").get<int>() == 2);
    REQUIRE(rep.at("schema_version").get<int>() == 1);
    REQUIRE(rep.at("checks").size() == 10);
    for (const auto& c : rep.at("checks")) {
        REQUIRE(c.at("pass").get<bool>());
        REQUIRE(c.at("residual").get<double>() < c.at("tolerance").get<double>());
    }
    // replaying the seed reproduces the report verbatim
    auto rep2 = run_suite(ctx, ref, base_q, 2, 42);
    REQUIRE(rep.dump() == rep2.dump());
    // a different seed gives different residuals but still passes
    auto rep3 = run_suite(ctx, ref, base_q, 1, 7);
    REQUIRE(rep3.at("pass").get<bool>());
    REQUIRE(rep3.dump() != rep.dump());
    // the empty suite passes vacuously
    auto rep0 = run_suite(ctx, ref, base_q, 0, 42);
    REQUIRE(rep0.at("pass").get<bool>());
    REQUIRE(rep0.at("checks").empty());
}

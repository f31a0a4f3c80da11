#pragma once

#include "hsov/forms.hpp"

namespace hsov {

/// Density of the odd-characteristic holomorphic differential
/// omega_delta = sum_l d_l theta[delta](0) omega_l; its zeros sit at the
/// branch points, so it is nonvanishing at every admissible surface point.
inline cplx omega_delta_density(const SurfaceContext& ctx, cplx z, cplx y) {
    cplx acc = 0, pw = 1.0;
    for (int j = 0; j < ctx.g; ++j) {
        cplx col = 0;
        for (int i = 0; i < ctx.g; ++i) col += ctx.theta_grad0(i) * ctx.omega_coeff(i, j);
        acc += col * pw;
        pw *= z;
    }
    return acc / y;
}

inline cplx omega_delta_at(const SurfaceContext& ctx, const SurfacePoint& p) {
    return omega_delta_density(ctx, p.z, ctx.curve.y_of(p));
}

/// z-derivative of the density of omega_delta.
inline cplx omega_delta_deriv_at(const SurfaceContext& ctx, const SurfacePoint& p) {
    cplx acc = 0;
    for (int i = 0; i < ctx.g; ++i) acc += ctx.theta_grad0(i) * ctx.omega_deriv_at(i, p);
    return acc;
}

inline cplx theta_delta(const SurfaceContext& ctx, const VecC& v) {
    return theta_char(ctx, ctx.char_alpha, ctx.char_beta, v);
}

/// Prime form E(z, w) = theta[delta](A(z) - A(w)) / (s(z) s(w)) with
/// s = principal sqrt of the omega_delta density. Antisymmetric exactly;
/// E(z,w)/(z-w) -> 1 as w -> z on one sheet because s(z)^2 = omega_delta(z)
/// without sign ambiguity.
inline cplx prime_form(const SurfaceContext& ctx, const SurfacePoint& z, const SurfacePoint& w) {
    if (!ctx.theta_ready) throw Error("context not finalized");
    cplx oz = omega_delta_at(ctx, z), ow = omega_delta_at(ctx, w);
    if (std::abs(oz) < 1e-12 || std::abs(ow) < 1e-12)
        throw Error("characteristic degenerate at point");
    if (z.z == w.z && z.sheet == w.sheet) return 0.0;
    cplx t = theta_delta(ctx, ctx.abel(z) - ctx.abel(w));
    return t / (std::sqrt(oz) * std::sqrt(ow));
}

/// d_x log E(pole, x) in the dz chart:
///   sum_l (d_l theta / theta)(A(x) - A(pole)) omega_l(x)
///     - 1/2 omega_delta'(x)/omega_delta(x).
/// Simple pole at x = pole with residue +1.
inline cplx dlog_prime_form(const SurfaceContext& ctx, const SurfacePoint& pole,
                            const SurfacePoint& x) {
    if (x.z == pole.z && x.sheet == pole.sheet) throw Error("evaluation at pole");
    VecC v = ctx.abel(x) - ctx.abel(pole);
    cplx th = theta_delta(ctx, v);
    if (std::abs(th) == 0.0) throw Error("evaluation at pole");
    VecC gr = theta_grad(ctx, ctx.char_alpha, ctx.char_beta, v);
    cplx acc = 0;
    for (int i = 0; i < ctx.g; ++i) acc += gr(i) / th * ctx.omega_at(i, x);
    acc -= 0.5 * omega_delta_deriv_at(ctx, x) / omega_delta_at(ctx, x);
    return acc;
}

/// sigma(z)/sigma(w) through the theta-quotient representation with an
/// auxiliary generic degree-g divisor rho; the value is rho-independent.
inline cplx sigma_ratio(const SurfaceContext& ctx, const SurfacePoint& z, const SurfacePoint& w,
                        const Divisor& rho) {
    auto pts = rho.expanded();
    if (static_cast<int>(pts.size()) != ctx.g) throw Error("rho divisor non-generic");
    VecC rho_sum = VecC::Zero(ctx.g);
    for (const auto& p : pts) rho_sum += ctx.abel(p);
    VecC az = ctx.abel(z), aw = ctx.abel(w);
    cplx tz = theta(ctx, VecC(az - rho_sum + VecC(ctx.K)));
    cplx tw = theta(ctx, VecC(aw - rho_sum + VecC(ctx.K)));
    if (std::abs(tz) < 1e-10 || std::abs(tw) < 1e-10) throw Error("rho divisor non-generic");
    cplx ratio = tz / tw;
    for (const auto& p : pts) ratio *= prime_form(ctx, w, p) / prime_form(ctx, z, p);
    return ratio;
}

/// Deterministic generic auxiliary divisor for sigma^2 factors: g points on
/// a large circle, rotated until the theta factors are comfortably nonzero.
inline Divisor generic_rho(const SurfaceContext& ctx) {
    double scale = 0.0;
    for (cplx e : ctx.curve.branch_points())
        scale = std::max(scale, std::abs(e - ctx.curve.centroid()));
    for (int attempt = 0; attempt < 8; ++attempt) {
        Divisor rho;
        VecC rho_sum = VecC::Zero(ctx.g);
        bool ok = true;
        for (int l = 0; l < ctx.g; ++l) {
            double t = 2 * kPi * (l + 0.37 + 0.11 * attempt) / ctx.g;
            cplx zl = ctx.curve.centroid() + 1.9 * scale * std::exp(kI * t);
            if (ctx.curve.dist_to_branch(zl) < 0.3 * ctx.curve.min_branch_separation()) {
                ok = false;
                break;
            }
            SurfacePoint p{zl, +1};
            rho.add(p, 1);
            rho_sum += ctx.abel(p);
        }
        if (!ok) continue;
        // generic: the sigma numerator theta must be far from its zero locus
        SurfacePoint probe = ctx.basepoint;
        cplx t0 = theta(ctx, VecC(ctx.abel(probe) - rho_sum + VecC(ctx.K)));
        if (std::abs(t0) > 1e-4) return rho;
    }
    throw Error("rho divisor non-generic");
}

// --- pointwise theta-product differentials ------------------------------

/// A product of theta factors of the Abel map times a power of omega_delta:
///   value(z) = omega_delta(z)^p * prod theta[delta](A_z - a_i)^{m_i}
///                              * prod theta(A_z - b_j)^{n_j}.
/// Used for the prescribed-divisor differentials and the Baker-Akhiezer
/// building blocks; multivaluedness is controlled by the caller through the
/// balance of the exponents and the divisor-class constraint.
struct ThetaProduct {
    const SurfaceContext* ctx;
    int omega_power = 1;
    std::vector<std::pair<VecC, int>> delta_args;  // theta[delta](A_z - arg)^mult
    std::vector<std::pair<VecC, int>> plain_args;  // theta(A_z - arg)^mult

    cplx eval(cplx z, cplx y, const VecC& A) const {
        cplx acc = 1.0;
        cplx od = omega_delta_density(*ctx, z, y);
        for (int k = 0; k < std::abs(omega_power); ++k) acc *= (omega_power > 0) ? od : 1.0 / od;
        for (const auto& [a, m] : delta_args) {
            cplx t = theta_delta(*ctx, VecC(A - a));
            for (int k = 0; k < std::abs(m); ++k) acc *= (m > 0) ? t : 1.0 / t;
        }
        for (const auto& [b, n] : plain_args) {
            cplx t = theta(*ctx, VecC(A - b));
            for (int k = 0; k < std::abs(n); ++k) acc *= (n > 0) ? t : 1.0 / t;
        }
        return acc;
    }

    MeromorphicDifferential to_differential(Divisor bound, std::string label) const {
        const SurfaceContext* c = ctx;
        ThetaProduct copy = *this;
        MeromorphicDifferential d;
        d.needs_abel = true;
        d.abel_evaluator = [copy](cplx z, cplx y, const VecC& A) { return copy.eval(z, y, A); };
        d.evaluator = [copy, c](const SurfacePoint& p) {
            return copy.eval(p.z, c->curve.y_of(p), c->abel(p));
        };
        d.density = [copy, c](cplx z, cplx y) {
            SurfacePoint p{z, c->curve.sheet_of(z, y)};
            return copy.eval(z, y, c->abel(p));
        };
        d.declared_divisor_bound = std::move(bound);
        d.label = std::move(label);
        return d;
    }
};

/// One-form with zeros at u and q and poles at v and q_prime, assembled from
/// theta factors; requires the divisor-class constraint
///   A(u) - A(v) + A(q) - A(q_prime) - 2K  in  Z^g + B Z^g
/// (residual after lattice reduction below tolerance), otherwise the formula
/// is genuinely multivalued and construction fails. The B-lattice part of
/// the constraint is absorbed into one theta argument so that valid data
/// yields an exactly single-valued differential.
inline MeromorphicDifferential differential_from_divisor_data(
    const SurfaceContext& ctx, const Divisor& u, const Divisor& v, const Divisor& q,
    const Divisor& q_prime, double tolerance = 1e-6, bool enforce_constraint = true) {
    int g = ctx.g;
    if (u.degree() != v.degree() + 2 * g - 2 || q.degree() != g || q_prime.degree() != g)
        throw Error("divisor class mismatch");
    auto up = u.expanded(), vp = v.expanded(), qp = q.expanded(), qpp = q_prime.expanded();
    std::vector<VecC> Au, Av, Aq, Aqp;
    for (const auto& p : up) Au.push_back(ctx.abel(p));
    for (const auto& p : vp) Av.push_back(ctx.abel(p));
    for (const auto& p : qp) Aq.push_back(ctx.abel(p));
    for (const auto& p : qpp) Aqp.push_back(ctx.abel(p));
    VecC D = VecC::Zero(g);
    for (const auto& a : Au) D += a;
    for (const auto& a : Av) D -= a;
    for (const auto& a : Aq) D += a;
    for (const auto& a : Aqp) D -= a;
    VecC x = D - 2.0 * VecC(ctx.K);
    auto split = ctx.lattice_reduce(x);
    double residual = split.reduced.cwiseAbs().maxCoeff();
    if (enforce_constraint && residual > tolerance) throw Error("divisor class mismatch");
    // absorb the B-lattice part (makes valid data exactly single-valued;
    // violating data keeps its monodromy defect ~ residual)
    VecC shift = VecC::Zero(g);
    for (int i = 0; i < g; ++i) shift += double(split.m(i)) * ctx.B.col(i);
    Aqp.front() += shift;

    Divisor rho = generic_rho(ctx);
    VecC rho_sum = VecC::Zero(g);
    std::vector<VecC> Arho;
    for (const auto& p : rho.expanded()) {
        Arho.push_back(ctx.abel(p));
        rho_sum += Arho.back();
    }

    ThetaProduct tp;
    tp.ctx = &ctx;
    tp.omega_power = 1;
    for (const auto& a : Au) tp.delta_args.push_back({a, 1});
    for (const auto& a : Aq) tp.delta_args.push_back({a, 1});
    for (const auto& a : Av) tp.delta_args.push_back({a, -1});
    for (const auto& a : Aqp) tp.delta_args.push_back({a, -1});
    for (const auto& a : Arho) tp.delta_args.push_back({a, -2});
    tp.plain_args.push_back({VecC(rho_sum - VecC(ctx.K)), 2});

    Divisor bound;
    for (const auto& [p, m] : u.entries) bound.add(p, -m);
    for (const auto& [p, m] : q.entries) bound.add(p, -m);
    for (const auto& [p, m] : v.entries) bound.add(p, m);
    for (const auto& [p, m] : q_prime.entries) bound.add(p, m);
    return tp.to_differential(std::move(bound), "divisor_data_form");
}

}  // namespace hsov

#pragma once

#include <random>

#include "hsov/context.hpp"

namespace hsov {

/// Theta characteristic [alpha, beta] (half-integer vectors).
struct ThetaChar {
    Eigen::VectorXd alpha, beta;

    /// Parity of a half-integer characteristic: odd iff 4 alpha . beta is odd.
    bool odd() const {
        long s = std::lround(4.0 * alpha.dot(beta));
        return (s % 2 + 2) % 2 == 1;
    }
};

namespace detail {

/// Truncation radius needed so the Gaussian tail of the theta series is
/// below tol; throws if the configured radius cannot deliver it.
inline int theta_radius_for(const SurfaceContext& ctx, double tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.B.imag());
    double lmin = es.eigenvalues().minCoeff();
    double r = std::sqrt(std::max(0.0, -std::log(tol)) / (kPi * lmin)) + 0.5 * std::sqrt(double(ctx.g));
    int R = static_cast<int>(std::ceil(r)) + 1;
    if (R > ctx.theta_radius) throw Error("theta truncation insufficient");
    return R;
}

template <class Term>
inline void theta_lattice_sum(const SurfaceContext& ctx, const Eigen::VectorXd& alpha,
                              const VecC& z, int R, Term&& term) {
    int g = ctx.g;
    // recenter the sum on the real minimizer of the Gaussian factor
    Eigen::VectorXd shift = -ctx.B.imag().partialPivLu().solve(z.imag()) - alpha;
    Eigen::VectorXi n0(g);
    for (int i = 0; i < g; ++i) n0(i) = static_cast<int>(std::lround(shift(i)));
    Eigen::VectorXi k = Eigen::VectorXi::Constant(g, -R);
    while (true) {
        VecC m(g);
        for (int i = 0; i < g; ++i) m(i) = cplx(double(n0(i) + k(i)) + alpha(i), 0.0);
        cplx arg = 0.5 * m.dot(ctx.B * m) + m.dot(z);
        // Eigen's dot conjugates the left factor; m is real so this is safe
        term(m, std::exp(2.0 * kPi * kI * arg));
        int i = 0;
        for (; i < g; ++i) {
            if (k(i) < R) {
                ++k(i);
                break;
            }
            k(i) = -R;
        }
        if (i == g) break;
    }
}

}  // namespace detail

/// theta[alpha, beta](z) = sum_n exp(2 pi i (1/2 (n+a)^T B (n+a) + (n+a).(z+b)))
inline cplx theta_char(const SurfaceContext& ctx, const Eigen::VectorXd& alpha,
                       const Eigen::VectorXd& beta, const VecC& z) {
    int R = detail::theta_radius_for(ctx, ctx.cfg.theta_tol);
    VecC zb = z;
    for (int i = 0; i < ctx.g; ++i) zb(i) += beta(i);
    cplx acc = 0;
    detail::theta_lattice_sum(ctx, alpha, zb, R, [&](const VecC&, cplx t) { acc += t; });
    return acc;
}

inline cplx theta(const SurfaceContext& ctx, const VecC& z) {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(ctx.g);
    return theta_char(ctx, zero, zero, z);
}

inline cplx theta_char(const SurfaceContext& ctx, const ThetaChar& ch, const VecC& z) {
    return theta_char(ctx, ch.alpha, ch.beta, z);
}

/// Gradient in z of theta[alpha, beta].
inline VecC theta_grad(const SurfaceContext& ctx, const Eigen::VectorXd& alpha,
                       const Eigen::VectorXd& beta, const VecC& z) {
    int R = detail::theta_radius_for(ctx, ctx.cfg.theta_tol);
    VecC zb = z;
    for (int i = 0; i < ctx.g; ++i) zb(i) += beta(i);
    VecC acc = VecC::Zero(ctx.g);
    detail::theta_lattice_sum(ctx, alpha, zb, R,
                              [&](const VecC& m, cplx t) { acc += (2.0 * kPi * kI * t) * m; });
    return acc;
}

inline VecC theta_grad(const SurfaceContext& ctx, const ThetaChar& ch, const VecC& z) {
    return theta_grad(ctx, ch.alpha, ch.beta, z);
}

/// |theta| evaluated at the lattice-reduced argument: invariant under lattice
/// shifts of z (plain |theta| is not), so usable as a vanishing detector.
inline double reduced_theta_mag(const SurfaceContext& ctx, const VecC& z) {
    return std::abs(theta(ctx, ctx.lattice_reduce(z).reduced));
}

/// First odd half-integer characteristic in lexicographic order of the
/// integer bit vectors (n, m), alpha = n/2, beta = m/2. Deterministic.
inline ThetaChar find_odd_characteristic(const SurfaceContext& ctx) {
    int g = ctx.g;
    for (int nbits = 0; nbits < (1 << g); ++nbits) {
        for (int mbits = 0; mbits < (1 << g); ++mbits) {
            int dot = 0;
            for (int i = 0; i < g; ++i) dot += ((nbits >> i) & 1) * ((mbits >> i) & 1);
            if (dot % 2 == 0) continue;
            ThetaChar ch;
            ch.alpha = Eigen::VectorXd::Zero(g);
            ch.beta = Eigen::VectorXd::Zero(g);
            for (int i = 0; i < g; ++i) {
                ch.alpha(i) = 0.5 * ((nbits >> i) & 1);
                ch.beta(i) = 0.5 * ((mbits >> i) & 1);
            }
            return ch;
        }
    }
    throw Error("no odd characteristic found");  // unreachable for g >= 1
}

/// Riemann constants for the context basepoint: the unique vector K with
/// theta(K - A(xi)) = 0 for every effective divisor xi of degree g-1,
/// normalized by 2K + A(canonical class) in the lattice.
inline Eigen::VectorXcd riemann_constants(const SurfaceContext& ctx) {
    int g = ctx.g;
    auto h = ctx.omega_integrand();
    // W = (g-1) * integral from the first branch point to the basepoint
    cplx e1 = ctx.curve.branch_points().front();
    double r = 0.3 * ctx.curve.min_branch_separation();
    cplx dir = ctx.basepoint.z - e1;
    cplx w = e1 + r * dir / std::abs(dir);
    cplx yw = std::sqrt(ctx.curve.f().eval(w));
    VecC seg = ctx.engine.integrate_from_branch(e1, w, yw, h, g);
    Tracked t{w, yw};
    VecC rest = ctx.integrate_to(t, ctx.basepoint, h);
    VecC W = double(g - 1) * (seg + rest);

    // validation data: random effective degree-(g-1) divisors plus controls
    std::mt19937_64 rng(0x5eedULL);
    auto rnd = [&](double lo, double hi) {
        return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
    };
    double scale = 0.0;
    for (cplx e : ctx.curve.branch_points())
        scale = std::max(scale, std::abs(e - ctx.curve.centroid()));
    auto random_point = [&]() -> SurfacePoint {
        while (true) {
            cplx z = ctx.curve.centroid() +
                     cplx(rnd(-2.2, 2.2) * scale, rnd(-2.2, 2.2) * scale);
            if (ctx.curve.dist_to_branch(z) < 0.3 * ctx.curve.min_branch_separation()) continue;
            return {z, (rng() & 1) ? +1 : -1};
        }
    };
    const int kDivisors = 6;
    std::vector<VecC> xi_abel;
    for (int d = 0; d < kDivisors; ++d) {
        VecC acc = VecC::Zero(g);
        for (int j = 0; j < g - 1; ++j) acc += ctx.abel(random_point());
        xi_abel.push_back(acc);
    }
    // typical nonvanishing magnitude for normalization
    double typical = 0.0;
    for (int d = 0; d < 8; ++d) {
        VecC v(g);
        for (int i = 0; i < g; ++i) v(i) = cplx(rnd(-0.5, 0.5), rnd(-0.5, 0.5));
        typical = std::max(typical, reduced_theta_mag(ctx, v));
    }

    std::vector<VecC> passing;
    for (int s = 0; s < 2; ++s) {
        for (int nb = 0; nb < (1 << g); ++nb) {
            for (int mb = 0; mb < (1 << g); ++mb) {
                VecC K = (s == 0 ? 1.0 : -1.0) * W;
                for (int i = 0; i < g; ++i) {
                    K(i) += 0.5 * ((nb >> i) & 1);
                    K += 0.5 * double((mb >> i) & 1) * ctx.B.col(i);
                }
                double worst = 0.0;
                for (const auto& xa : xi_abel)
                    worst = std::max(worst, reduced_theta_mag(ctx, K - xa));
                if (worst < 1e-6 * typical) passing.push_back(K);
            }
        }
    }
    // doubling normalization: 2K - A(canonical) must be a lattice vector
    std::vector<VecC> normalized;
    for (const auto& K : passing) {
        VecC v = 2.0 * K - ctx.canonical_class_abel();
        if (ctx.lattice_residual(v) < 1e-6) normalized.push_back(K);
    }
    if (normalized.size() != 1) {
        // tolerate duplicates equal mod lattice
        std::vector<VecC> unique;
        for (const auto& K : normalized) {
            bool dup = false;
            for (const auto& U : unique)
                if (ctx.lattice_residual(K - U) < 1e-8) dup = true;
            if (!dup) unique.push_back(K);
        }
        if (unique.size() != 1) throw Error("riemann constants ambiguous");
        return ctx.lattice_reduce(unique.front()).reduced;
    }
    return ctx.lattice_reduce(normalized.front()).reduced;
}

/// Attach the theta characteristic and Riemann constants to a context.
inline void finalize_context(SurfaceContext& ctx) {
    ThetaChar ch = find_odd_characteristic(ctx);
    ctx.char_alpha = ch.alpha;
    ctx.char_beta = ch.beta;
    ctx.K = riemann_constants(ctx);
    ctx.theta_grad0 = theta_grad(ctx, ch, VecC(VecC::Zero(ctx.g)));
    ctx.theta_ready = true;
}

/// One-stop construction of a fully initialized surface context.
inline SurfaceContext build_context(HyperellipticCurve curve, SurfacePoint basepoint,
                                    NumericConfig cfg = {}) {
    SurfaceContext ctx(std::move(curve), basepoint, cfg);
    finalize_context(ctx);
    return ctx;
}

inline ThetaChar context_char(const SurfaceContext& ctx) {
    if (!ctx.theta_ready) throw Error("context not finalized");
    return {ctx.char_alpha, ctx.char_beta};
}

}  // namespace hsov

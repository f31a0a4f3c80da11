#pragma once

#include <optional>

#include "hsov/forms.hpp"

namespace hsov {

/// Fixed reference data for a coordinate atlas on the extension moduli: the
/// interpolation divisor p (degree N), the auxiliary divisor q_check with
/// L = O(q - q_check), the optional twist point (present iff the twist line
/// bundle has degree 1), and the integer labels (twist degree, d).
struct ReferenceData {
    Divisor p;
    Divisor q_check;
    std::optional<SurfacePoint> q_check_0;
    int Lambda_degree = 0;  // 0 or 1
    int d = 0;

    int s_d() const { return Lambda_degree - 2 * d; }
    int N() const { return p.degree(); }

    /// Pole bound r = 2 q_check + Lambda_degree * q_check_0 shared by the
    /// upper-right differentials.
    Divisor pole_bound_r() const {
        Divisor r;
        for (const auto& [pt, m] : q_check.entries) r.add(pt, 2 * m);
        if (Lambda_degree == 1) r.add(*q_check_0, 1);
        return r;
    }

    void validate_shape(const SurfaceContext& ctx) const {
        if (Lambda_degree != 0 && Lambda_degree != 1) throw Error("invalid reference data");
        if (q_check_0.has_value() != (Lambda_degree == 1)) throw Error("invalid reference data");
        int sd = s_d();
        if (sd <= 0 || sd > ctx.g - 1) throw Error("invalid reference data");
        if (p.degree() != ctx.g - 1 + sd) throw Error("invalid reference data");
        if (q_check.degree() != ctx.g - d) throw Error("invalid reference data");
        for (const auto& pt : all_points())
            ctx.curve.require_off_branch(pt, 0.1 * ctx.curve.min_branch_separation());
    }

    std::vector<SurfacePoint> all_points() const {
        std::vector<SurfacePoint> out = p.points();
        for (const auto& pt : q_check.points()) out.push_back(pt);
        if (q_check_0) out.push_back(*q_check_0);
        return out;
    }
};

/// A point of the moduli space in divisor coordinates: q of degree g encodes
/// the line bundle L = O(q - q_check); x are the extension-class coordinates
/// along p; lambda caches the Abel coordinates of q.
struct ModuliPoint {
    Divisor q;
    Eigen::VectorXcd x;
    VecC lambda;
};

struct ReferenceDiagnostics {
    bool span_ok = false;        // interpolation basis evaluation at p well-conditioned
    bool q_nonspecial = false;   // omega_j(q_i) invertible
    bool separation_ok = false;  // all support points pairwise separated
    double span_condition = 0;   // condition number witnesses
    double q_condition = 0;
    double min_separation = 0;
    bool all() const { return span_ok && q_nonspecial && separation_ok; }
};

/// Evaluation matrix omega_j(q_i) of the normalized holomorphic basis.
inline Eigen::MatrixXcd abel_jacobian(const SurfaceContext& ctx, const Divisor& q) {
    auto pts = q.expanded();
    Eigen::MatrixXcd J(ctx.g, pts.size());
    for (int i = 0; i < ctx.g; ++i)
        for (size_t j = 0; j < pts.size(); ++j) J(i, j) = ctx.omega_at(i, pts[j]);
    return J;
}

/// Divisor bound of the interpolation space Omega_{-2q+r}: double zeros at q,
/// poles allowed up to r.
inline Divisor interpolation_bound(const ReferenceData& ref, const Divisor& q) {
    Divisor div = ref.pole_bound_r();
    for (const auto& [pt, m] : q.entries) div.add(pt, -2 * m);
    return div;
}

/// Checks the three usability conditions of a reference configuration against
/// a concrete divisor q: (a) the interpolation basis evaluated at p spans
/// (condition-number proxy for the span condition), (b) q is non-special,
/// (c) all support points are pairwise separated. Diagnostics only.
inline ReferenceDiagnostics validate_reference(const SurfaceContext& ctx, const ReferenceData& ref,
                                               const Divisor& q, double cond_threshold = 1e8,
                                               double sep_threshold = 1e-6) {
    ref.validate_shape(ctx);
    ReferenceDiagnostics diag;

    auto cond_of = [](const Eigen::MatrixXcd& M) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
        double smin = svd.singularValues().minCoeff();
        return (smin == 0) ? std::numeric_limits<double>::infinity()
                           : svd.singularValues().maxCoeff() / smin;
    };

    // (c) first: coincident points would break the space construction below
    std::vector<SurfacePoint> pts = ref.all_points();
    for (const auto& pt : q.points()) pts.push_back(pt);
    diag.min_separation = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) {
            if (pts[i].sheet != pts[j].sheet) continue;
            diag.min_separation = std::min(diag.min_separation, std::abs(pts[i].z - pts[j].z));
        }
    diag.separation_ok = diag.min_separation > sep_threshold;

    // (b) non-speciality of q
    diag.q_condition = cond_of(abel_jacobian(ctx, q));
    diag.q_nonspecial = diag.q_condition < cond_threshold;

    // (a) span condition: basis of the interpolation space evaluated at p
    if (diag.separation_ok && diag.q_nonspecial) {
        OmegaSpaceBuilder forms(ctx, 1);
        auto space = forms.build(interpolation_bound(ref, q), "interp");
        int N = ref.N();
        if (space.dimension() == N) {
            Eigen::MatrixXcd E(N, N);
            auto ppts = ref.p.expanded();
            for (int r = 0; r < N; ++r)
                for (int b = 0; b < N; ++b)
                    E(r, b) = space.basis[b].density(ppts[r].z, ctx.curve.y_of(ppts[r]));
            // row scaling removes the arbitrary basis normalization
            for (int r = 0; r < N; ++r) {
                double s = E.row(r).cwiseAbs().maxCoeff();
                if (s > 0) E.row(r) /= s;
            }
            diag.span_condition = cond_of(E);
            diag.span_ok = diag.span_condition < cond_threshold;
        } else {
            diag.span_condition = std::numeric_limits<double>::infinity();
            diag.span_ok = false;
        }
    }
    return diag;
}

/// Abel coordinates lambda_i(q) = sum_j A_i(q_j); symmetric in the points.
inline VecC lambda_of_q(const SurfaceContext& ctx, const ReferenceData&, const Divisor& q) {
    VecC acc = VecC::Zero(ctx.g);
    for (const auto& pt : q.expanded()) acc += ctx.abel(pt);
    return acc;
}

/// Newton inversion of the Abel coordinates: moves the z-coordinates of the
/// guess divisor (sheets fixed) until the lattice-reduced residual vanishes.
inline Divisor q_of_lambda(const SurfaceContext& ctx, const ReferenceData& ref, const VecC& lambda,
                           const Divisor& guess, double tol = 1e-10, int max_iter = 40) {
    auto pts = guess.expanded();
    if (static_cast<int>(pts.size()) != ctx.g) throw Error("Jacobi inversion failed: guess out of basin");
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Divisor cur;
        for (const auto& pt : pts) cur.add(pt, 1);
        VecC res = ctx.lattice_reduce(lambda_of_q(ctx, ref, cur) - lambda).reduced;
        double rn = res.cwiseAbs().maxCoeff();
        if (rn < tol) return cur;
        if (rn > 10.0 * prev + 1.0) throw Error("Jacobi inversion failed: guess out of basin");
        prev = std::min(prev, rn);
        Eigen::MatrixXcd J = abel_jacobian(ctx, cur);
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(J);
        if (!lu.isInvertible()) throw Error("Jacobi inversion failed: guess out of basin");
        VecC dz = lu.solve(res);
        // damp steps that would leave the safe region around branch points
        double cap = 0.8 * ctx.curve.min_branch_separation();
        double dn = dz.cwiseAbs().maxCoeff();
        if (dn > cap) dz *= cap / dn;
        for (int j = 0; j < ctx.g; ++j) {
            cplx znew = pts[j].z - dz(j);
            if (ctx.curve.dist_to_branch(znew) < 0.15 * ctx.curve.min_branch_separation())
                throw Error("Jacobi inversion failed: guess out of basin");
            pts[j].z = znew;
        }
    }
    throw Error("Jacobi inversion failed: guess out of basin");
}

/// Chart covariance of the extension coordinates: changing the local
/// coordinate at reference point r rescales x_r by the derivative of the
/// chart change there. Callers must divide the paired momentum k_r by the
/// same factor (the product x_r k_r is chart-invariant).
inline Eigen::VectorXcd chart_rescale_x(const ReferenceData& ref, int r, cplx scale_derivative,
                                        const Eigen::VectorXcd& x) {
    if (r < 0 || r >= ref.N() || x.size() != ref.N()) throw Error("invalid reference data");
    if (scale_derivative == cplx(0)) throw Error("singular chart change");
    Eigen::VectorXcd out = x;
    out(r) *= scale_derivative;
    return out;
}

/// Transition matrices of the extension bundle in the local coordinate
/// w = z - z(point) at each reference/moduli point.
struct TransitionData {
    struct Entry {
        SurfacePoint at;
        std::string kind;  // "q" | "q_check" | "p" | "q_check_0"
        std::function<Eigen::Matrix2cd(cplx)> matrix;  // of the local coordinate w
    };
    std::vector<Entry> entries;
};

inline TransitionData transition_data(const ReferenceData& ref, const ModuliPoint& point) {
    TransitionData out;
    for (const auto& pt : point.q.expanded()) {
        out.entries.push_back({pt, "q", [](cplx w) {
                                   Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
                                   m(0, 0) = w;
                                   m(1, 1) = 1.0 / w;
                                   return m;
                               }});
    }
    for (const auto& pt : ref.q_check.expanded()) {
        out.entries.push_back({pt, "q_check", [](cplx w) {
                                   Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
                                   m(0, 0) = 1.0 / w;
                                   m(1, 1) = w;
                                   return m;
                               }});
    }
    auto ppts = ref.p.expanded();
    for (size_t r = 0; r < ppts.size(); ++r) {
        cplx xr = point.x(static_cast<int>(r));
        out.entries.push_back({ppts[r], "p", [xr](cplx w) {
                                   Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
                                   m(0, 1) = xr / w;
                                   return m;
                               }});
    }
    if (ref.Lambda_degree == 1) {
        out.entries.push_back({*ref.q_check_0, "q_check_0", [](cplx w) {
                                   Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
                                   m(1, 1) = w;
                                   return m;
                               }});
    }
    return out;
}

// --- desk configurations -------------------------------------------------

/// Degree-1 twist configuration for the default genus-2 curve y^2 = z^6 - 1:
/// d = 0, s_d = 1, N = 2, pole bound r of degree 5.
inline ReferenceData default_reference_g2() {
    ReferenceData ref;
    ref.Lambda_degree = 1;
    ref.d = 0;
    ref.p.add({cplx(1.45, 0.55), +1}, 1);
    ref.p.add({cplx(-0.85, 1.25), -1}, 1);
    ref.q_check.add({cplx(1.3, -0.8), +1}, 1);
    ref.q_check.add({cplx(-1.2, -0.9), -1}, 1);
    ref.q_check_0 = SurfacePoint{cplx(0.1, -0.5), +1};
    return ref;
}

/// Untwisted configuration for the genus-3 curve y^2 = z^8 - 1:
/// d = -1, s_d = 2, N = 4, pole bound r of degree 8.
inline ReferenceData default_reference_g3() {
    ReferenceData ref;
    ref.Lambda_degree = 0;
    ref.d = -1;
    ref.p.add({cplx(1.5, 0.6), +1}, 1);
    ref.p.add({cplx(-0.9, 1.3), -1}, 1);
    ref.p.add({cplx(0.55, -1.45), +1}, 1);
    ref.p.add({cplx(-1.55, -0.65), +1}, 1);
    ref.q_check.add({cplx(1.35, -0.85), +1}, 1);
    ref.q_check.add({cplx(-1.25, -0.95), -1}, 1);
    ref.q_check.add({cplx(0.25, 1.6), +1}, 1);
    ref.q_check.add({cplx(-0.35, -1.7), -1}, 1);
    return ref;
}

/// Octic curve for the secondary configuration.
inline std::vector<cplx> octic_coeffs() {
    std::vector<cplx> f(9, cplx(0));
    f[0] = -1.0;
    f[8] = 1.0;
    return f;
}

/// A generic degree-g moduli divisor for the default genus-2 configuration,
/// disjoint from the reference supports.
inline Divisor default_moduli_q_g2() {
    Divisor q;
    q.add({cplx(0.75, 1.15), +1}, 1);
    q.add({cplx(-1.5, 0.35), -1}, 1);
    return q;
}

}  // namespace hsov

#pragma once

#include "hsov/moduli.hpp"

namespace hsov {

/// Pointwise linear combination of arbitrary meromorphic differentials
/// (theta-built or rational); the divisor bound is supplied by the caller.
inline MeromorphicDifferential combine_differentials(
    const SurfaceContext& ctx, std::vector<std::pair<cplx, MeromorphicDifferential>> parts,
    Divisor bound, std::string label) {
    auto shared = std::make_shared<std::vector<std::pair<cplx, MeromorphicDifferential>>>(
        std::move(parts));
    const HyperellipticCurve* C = &ctx.curve;
    MeromorphicDifferential d;
    d.density = [shared](cplx z, cplx y) {
        cplx acc = 0;
        for (const auto& [c, f] : *shared) acc += c * f.density(z, y);
        return acc;
    };
    d.evaluator = [shared, C](const SurfacePoint& p) {
        cplx y = C->y_of(p);
        cplx acc = 0;
        for (const auto& [c, f] : *shared) acc += c * f.density(p.z, y);
        return acc;
    };
    d.declared_divisor_bound = std::move(bound);
    d.label = std::move(label);
    return d;
}

/// The triple of abelian differentials representing a Higgs field on the
/// extension bundle: phi_plus lower-left, phi0 diagonal, phi_minus upper-right.
struct HiggsDifferential {
    MeromorphicDifferential phi0, phi_plus, phi_minus;
    ModuliPoint base;
    ReferenceData ref;
};

/// Holomorphic quadratic differential in the explicit hyperelliptic basis
/// z^j dz^2/y^2 (j <= 2g-2) followed by z^j dz^2/y (j <= g-3).
struct QuadraticDifferential {
    int g = 0;
    Eigen::VectorXcd coeffs;
    bool nondegenerate = false;

    static int dim_even(int g) { return 2 * g - 1; }
    static int dim_odd(int g) { return std::max(0, g - 2); }
    static int dim(int g) { return dim_even(g) + dim_odd(g); }  // = 3g - 3

    Poly even_part() const {
        std::vector<cplx> a(dim_even(g));
        for (int j = 0; j < dim_even(g); ++j) a[j] = coeffs(j);
        return Poly(std::move(a));
    }
    Poly odd_part() const {
        std::vector<cplx> b(std::max(1, dim_odd(g)), cplx(0));
        for (int j = 0; j < dim_odd(g); ++j) b[j] = coeffs(dim_even(g) + j);
        return Poly(std::move(b));
    }
    cplx density(cplx z, cplx y) const {
        return (even_part().eval(z) + odd_part().eval(z) * y) / (y * y);
    }
    cplx operator()(const SurfacePoint& p, const HyperellipticCurve& C) const {
        return density(p.z, C.y_of(p));
    }
};

struct BoundedBasis {
    DifferentialSpace space;
    int expected_dim = 0;
    int excess = 0;  // actual - expected; positive excess is a wobbly indicator
};

/// Spanning set of the space of differentials with divisor >= -bound, with
/// the generic Riemann-Roch dimension as reference.
inline BoundedBasis bounded_differential_basis(const SurfaceContext& ctx, const ReferenceData&,
                                               const Divisor&, const Divisor& bound) {
    BoundedBasis out;
    OmegaSpaceBuilder forms(ctx, 1);
    out.space = forms.build(bound, "bounded");
    int degb = bound.degree();
    out.expected_dim = degb + ctx.g - 1 + (bound.entries.empty() ? 1 : 0);
    out.excess = out.space.dimension() - out.expected_dim;
    if (out.excess < 0) throw Error("basis construction ill-conditioned");
    return out;
}

/// Serre-pairing Hamiltonian H = x . k (no conjugation).
inline cplx moment_map(const Eigen::VectorXcd& x, const Eigen::VectorXcd& k) {
    return x.cwiseProduct(k).sum();
}

namespace detail {

inline std::vector<cplx> support_z(const ReferenceData& ref, const Divisor& q) {
    std::vector<cplx> out;
    for (const auto& p : ref.all_points()) out.push_back(p.z);
    for (const auto& p : q.points()) out.push_back(p.z);
    return out;
}

}  // namespace detail

/// Unique interpolation element of the lower-left space Omega_{-2q+r} taking
/// the values k_r at the reference points p_r; linear in k.
inline MeromorphicDifferential phi_plus_from_k(const SurfaceContext& ctx, const ReferenceData& ref,
                                               const ModuliPoint& point,
                                               const Eigen::VectorXcd& k) {
    int N = ref.N();
    if (k.size() != N) throw Error("reference divisor fails Span condition");
    OmegaSpaceBuilder forms(ctx, 1);
    auto space = forms.build(interpolation_bound(ref, point.q), "phi_plus");
    if (space.dimension() != N) throw Error("reference divisor fails Span condition");
    auto ppts = ref.p.expanded();
    Eigen::MatrixXcd E(N, N);
    for (int r = 0; r < N; ++r)
        for (int b = 0; b < N; ++b)
            E(r, b) = space.basis[b].density(ppts[r].z, ctx.curve.y_of(ppts[r]));
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(E);
    if (!lu.isInvertible()) throw Error("reference divisor fails Span condition");
    Eigen::VectorXcd c = lu.solve(k);
    RationalDifferential elem = space.element(c);
    Divisor bound = interpolation_bound(ref, point.q);
    return make_differential(ctx, {{1.0, elem}}, bound, "phi_plus");
}

/// Diagonal component from the Darboux coordinates:
///   phi0 = -sum_{r>=2} k_r x_r omega'_{p_r - p_1} - 1/2 sum_i kappa_i omega_i,
/// with the primed third-kind differentials vanishing on q. The Serre
/// constraint x . k = 0 makes the residue at p_1 come out right as well.
inline MeromorphicDifferential phi0_from_coords(const SurfaceContext& ctx, const ReferenceData& ref,
                                                const ModuliPoint& point,
                                                const Eigen::VectorXcd& kappa,
                                                const Eigen::VectorXcd& k,
                                                double serre_tol = 1e-9) {
    int N = ref.N();
    if (k.size() != N || point.x.size() != N || kappa.size() != ctx.g)
        throw Error("moment map nonzero: not a Higgs pull-back");
    double scale = std::max(1.0, point.x.cwiseAbs().maxCoeff() * k.cwiseAbs().maxCoeff());
    if (std::abs(moment_map(point.x, k)) > serre_tol * scale)
        throw Error("moment map nonzero: not a Higgs pull-back");

    auto qpts = point.q.expanded();
    Eigen::MatrixXcd J(ctx.g, ctx.g);
    for (int i = 0; i < ctx.g; ++i)
        for (int j = 0; j < ctx.g; ++j) J(i, j) = ctx.omega_at(j, qpts[i]);

    auto ppts = ref.p.expanded();
    std::vector<std::pair<cplx, MeromorphicDifferential>> parts;
    for (int r = 1; r < N; ++r) {
        auto wp = omega_third_kind_primed(ctx, ppts[r], ppts[0], point.q, J);
        parts.push_back({-k(r) * point.x(r), std::move(wp)});
    }
    for (int i = 0; i < ctx.g; ++i)
        parts.push_back({cplx(-0.5) * kappa(i), holomorphic_basis_form(ctx, i)});
    Divisor bound;
    for (const auto& p : ppts) bound.add(p, 1);
    return combine_differentials(ctx, std::move(parts), bound, "phi0");
}

/// Solvability report of the upper-right component: the vanishing conditions
/// on r reduce to a (2g + s_d) x (3g - 1) linear system on the coefficients
/// over a basis of Omega_{2q}; non-solvability (residual above tolerance) is
/// the surjectivity failure characterizing wobbly configurations.
struct PhiMinusReport {
    MeromorphicDifferential phi_minus;
    int rank_A = 0;
    int null_dim = 0;
    double residual = 0;  // relative least-squares residual of the system
    Eigen::VectorXcd l;
};

inline PhiMinusReport solve_phi_minus(const SurfaceContext& ctx, const ReferenceData& ref,
                                      const ModuliPoint& point,
                                      const MeromorphicDifferential& phi0,
                                      const MeromorphicDifferential& phi_plus) {
    int N = ref.N(), g = ctx.g;
    auto ppts = ref.p.expanded();
    auto all_z = detail::support_z(ref, point.q);

    // singular parts of phi_minus at p forced by holomorphy of phi0^2 + phi+ phi-
    Eigen::VectorXcd t_m2(N), t_m1(N);
    for (int r = 0; r < N; ++r) {
        double rho = contour_radius(ctx.curve, ppts[r].z, all_z);
        cplx kr = phi_plus.density(ppts[r].z, ctx.curve.y_of(ppts[r]));
        cplx kpr = contour_coeff(ctx.curve, phi_plus.density, ppts[r], rho, 1);
        cplx c0r = contour_coeff(ctx.curve, phi0.density, ppts[r], rho, 0);
        cplx xr = point.x(r);
        t_m2(r) = -xr * xr * kr;
        t_m1(r) = 2.0 * xr * c0r + xr * xr * kpr;
    }

    // particular element chi0 of Omega_{2p+2q} with those singular parts
    Divisor big;
    for (const auto& p : ppts) big.add(p, 2);
    for (const auto& p : point.q.expanded()) big.add(p, 2);
    OmegaSpaceBuilder forms(ctx, 1);
    auto S = forms.build(big, "chi_pool");
    int nS = S.dimension();
    Eigen::MatrixXcd Csing(2 * N, nS);
    Eigen::VectorXcd tsing(2 * N);
    for (int r = 0; r < N; ++r) {
        double rho = contour_radius(ctx.curve, ppts[r].z, all_z);
        for (int b = 0; b < nS; ++b) {
            Csing(2 * r, b) = contour_coeff(ctx.curve, S.basis[b].density, ppts[r], rho, -2);
            Csing(2 * r + 1, b) = contour_coeff(ctx.curve, S.basis[b].density, ppts[r], rho, -1);
        }
        tsing(2 * r) = t_m2(r);
        tsing(2 * r + 1) = t_m1(r);
    }
    Eigen::VectorXcd chi0_coef =
        Csing.completeOrthogonalDecomposition().solve(tsing);
    if ((Csing * chi0_coef - tsing).norm() > 1e-7 * std::max(1.0, tsing.norm()))
        throw Error("basis construction ill-conditioned");
    RationalDifferential chi0 = S.element(chi0_coef);

    // homogeneous freedom: basis of Omega_{2q}
    Divisor dq;
    for (const auto& p : point.q.expanded()) dq.add(p, 2);
    auto chi_space = forms.build(dq, "chi");
    int nC = chi_space.dimension();  // 3g - 1 generically

    // vanishing conditions at r: value + derivative at q_check, value at the
    // twist point
    struct Cond {
        SurfacePoint at;
        int order;  // 0 = value, 1 = first derivative
    };
    std::vector<Cond> conds;
    for (const auto& p : ref.q_check.expanded()) {
        conds.push_back({p, 0});
        conds.push_back({p, 1});
    }
    if (ref.Lambda_degree == 1) conds.push_back({*ref.q_check_0, 0});
    int nR = static_cast<int>(conds.size());  // 2g + s_d

    Eigen::MatrixXcd A(nR, nC);
    Eigen::VectorXcd l0(nR);
    for (int i = 0; i < nR; ++i) {
        double rho = contour_radius(ctx.curve, conds[i].at.z, all_z);
        for (int b = 0; b < nC; ++b)
            A(i, b) = conds[i].order == 0
                          ? chi_space.basis[b].density(conds[i].at.z, ctx.curve.y_of(conds[i].at))
                          : contour_coeff(ctx.curve, chi_space.basis[b].density, conds[i].at, rho,
                                          1);
        cplx v0 = conds[i].order == 0
                      ? chi0.density(conds[i].at.z, ctx.curve.y_of(conds[i].at))
                      : contour_coeff(ctx.curve, [&](cplx z, cplx y) { return chi0.density(z, y); },
                                      conds[i].at, rho, 1);
        l0(i) = -v0;
        double sc = std::max(A.row(i).cwiseAbs().maxCoeff(), std::abs(l0(i)));
        if (sc > 0) {
            A.row(i) /= sc;
            l0(i) /= sc;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > ctx.cfg.rank_tol * std::max(smax, 1e-300)) ++rank;

    PhiMinusReport rep;
    rep.rank_A = rank;
    rep.null_dim = nC - rank;
    rep.l = svd.solve(l0);
    rep.residual = (A * rep.l - l0).norm() / std::max(1.0, l0.norm());

    std::vector<std::pair<cplx, MeromorphicDifferential>> parts;
    Divisor bound;
    for (const auto& p : ppts) bound.add(p, 2);
    for (const auto& p : point.q.expanded()) bound.add(p, 2);
    for (const auto& [p, m] : ref.pole_bound_r().entries) bound.add(p, -m);
    parts.push_back({1.0, make_differential(ctx, {{1.0, chi0}}, {}, "chi0")});
    RationalDifferential hom = chi_space.element(rep.l);
    parts.push_back({1.0, make_differential(ctx, {{1.0, hom}}, {}, "chi_hom")});
    rep.phi_minus = combine_differentials(ctx, std::move(parts), bound, "phi_minus");
    return rep;
}

/// Least-squares fit of a density to the holomorphic quadratic-differential
/// basis; the relative residual is the holomorphy witness. Sample circles are
/// placed far outside the reference supports.
inline QuadraticDifferential fit_quadratic(const SurfaceContext& ctx,
                                           const std::function<cplx(cplx, cplx)>& dens,
                                           double& rel_residual,
                                           const std::vector<cplx>& avoid = {}) {
    int g = ctx.g;
    int n = QuadraticDifferential::dim(g);
    double scale = 0.0;
    for (cplx e : ctx.curve.branch_points())
        scale = std::max(scale, std::abs(e - ctx.curve.centroid()));
    std::vector<std::pair<cplx, cplx>> samples;  // (z, y) both sheets
    for (double rad : {2.6, 3.4}) {
        int m = 4 * g + 6;
        for (int j = 0; j < m; ++j) {
            cplx z = ctx.curve.centroid() +
                     rad * scale * std::exp(kI * (2.0 * kPi * (j + 0.13) / m));
            bool bad = false;
            for (cplx a : avoid)
                if (std::abs(z - a) < 0.2 * scale) bad = true;
            if (bad) continue;
            cplx y = std::sqrt(ctx.curve.f().eval(z));
            samples.push_back({z, y});
            samples.push_back({z, -y});
        }
    }
    int m = static_cast<int>(samples.size());
    Eigen::MatrixXcd M(m, n);
    Eigen::VectorXcd rhs(m);
    for (int s = 0; s < m; ++s) {
        auto [z, y] = samples[s];
        cplx pw = 1.0;
        for (int j = 0; j < QuadraticDifferential::dim_even(g); ++j) {
            M(s, j) = pw / (y * y);
            pw *= z;
        }
        pw = 1.0;
        for (int j = 0; j < QuadraticDifferential::dim_odd(g); ++j) {
            M(s, QuadraticDifferential::dim_even(g) + j) = pw / y;
            pw *= z;
        }
        rhs(s) = dens(z, y);
    }
    QuadraticDifferential out;
    out.g = g;
    out.coeffs = M.completeOrthogonalDecomposition().solve(rhs);
    rel_residual = (M * out.coeffs - rhs).norm() / std::max(1e-300, rhs.norm());

    // nondegeneracy: all 4g - 4 surface zeros simple
    Poly P = out.even_part(), Q = out.odd_part();
    double ptol = 1e-8 * std::max(1.0, P.max_abs_coeff());
    out.nondegenerate = true;
    if (Q.max_abs_coeff() < ptol) {
        auto roots = poly_roots(P);
        for (size_t i = 0; i < roots.size() && out.nondegenerate; ++i) {
            if (ctx.curve.dist_to_branch(roots[i]) < 1e-6 * scale) out.nondegenerate = false;
            for (size_t j = i + 1; j < roots.size(); ++j)
                if (std::abs(roots[i] - roots[j]) < 1e-6 * scale) out.nondegenerate = false;
        }
    } else {
        Poly R = P * P - Q * Q * ctx.curve.f();
        auto roots = poly_roots(R);
        std::vector<std::pair<cplx, int>> clusters;
        for (cplx r : roots) {
            bool merged = false;
            for (auto& [c, k] : clusters)
                if (std::abs(c - r) < 1e-6 * scale) {
                    ++k;
                    merged = true;
                }
            if (!merged) clusters.push_back({r, 1});
        }
        for (const auto& [c, k] : clusters) {
            if (k > 2 || ctx.curve.dist_to_branch(c) < 1e-6 * scale) out.nondegenerate = false;
            // a double root is fine only if both sheets carry one simple zero
            if (k == 2 && std::abs(Q.eval(c)) > ptol) out.nondegenerate = false;
        }
    }
    return out;
}

/// Dimension of quadratic differentials vanishing on D (the top-right
/// freedom at fixed determinant).
inline int quadratic_vanishing_dimension(const SurfaceContext& ctx, const Divisor& D) {
    int g = ctx.g, n = QuadraticDifferential::dim(g);
    std::vector<Eigen::VectorXcd> rows;
    for (const auto& [p, mult] : D.entries) {
        double rho = 0.3 * ctx.curve.dist_to_branch(p.z);
        for (int ord = 0; ord < mult; ++ord) {
            Eigen::VectorXcd row(n);
            for (int b = 0; b < n; ++b) {
                QuadraticDifferential e;
                e.g = g;
                e.coeffs = Eigen::VectorXcd::Zero(n);
                e.coeffs(b) = 1.0;
                row(b) = ord == 0 ? e.density(p.z, ctx.curve.y_of(p))
                                  : contour_coeff(ctx.curve,
                                                  [&](cplx z, cplx y) { return e.density(z, y); },
                                                  p, rho, ord);
            }
            double sc = row.cwiseAbs().maxCoeff();
            rows.push_back(sc > 0 ? Eigen::VectorXcd(row / sc) : row);
        }
    }
    if (rows.empty()) return n;
    Eigen::MatrixXcd C(rows.size(), n);
    for (size_t r = 0; r < rows.size(); ++r) C.row(r) = rows[r];
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(C);
    double smax = svd.singularValues()(0);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > ctx.cfg.rank_tol * std::max(smax, 1e-300)) ++rank;
    return n - rank;
}

/// Wobbly diagnostics: the h0 counts controlling surjectivity of the
/// diagonal-component map, computed as numerical null-space dimensions.
struct WobblyReport {
    int h0_L2inv = 0;      // sections of L^2 Lambda^{-1}
    int h0_nilpotent = 0;  // dim Omega_{2q-r}, the nilpotent count
    bool is_expected_rank = false;
};

inline WobblyReport wobbly_diagnostic(const SurfaceContext& ctx, const ReferenceData& ref,
                                      const ModuliPoint& point) {
    if (ref.s_d() > ctx.g - 1) throw Error("invalid reference data");
    // shared bound: poles up to 2q, zeros on r
    Divisor div;
    for (const auto& p : point.q.expanded()) div.add(p, 2);
    for (const auto& [p, m] : ref.pole_bound_r().entries) div.add(p, -m);

    auto checked_dim = [&](int weight, const char* tag) {
        Eigen::VectorXd sv;
        OmegaSpaceBuilder builder(ctx, weight);
        auto space = builder.build(div, tag, &sv);
        // a clear spectral gap must separate kept and dropped singular values
        if (sv.size()) {
            double cut = ctx.cfg.rank_tol * std::max(sv(0), 1e-300);
            double below = 0, above = std::numeric_limits<double>::infinity();
            for (int i = 0; i < sv.size(); ++i) {
                if (sv(i) > cut)
                    above = std::min(above, sv(i));
                else
                    below = std::max(below, sv(i));
            }
            if (below > 0 && above / below < 1e2) throw Error("rank indeterminate");
        }
        return space.dimension();
    };
    WobblyReport rep;
    rep.h0_L2inv = checked_dim(0, "L2inv");
    rep.h0_nilpotent = checked_dim(1, "nilpotent");
    rep.is_expected_rank = rep.h0_nilpotent == ctx.g - 1 - ref.s_d();
    return rep;
}

}  // namespace hsov

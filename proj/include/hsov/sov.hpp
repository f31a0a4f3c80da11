#pragma once

#include <numeric>

#include "hsov/higgs.hpp"
#include "hsov/primeform.hpp"

namespace hsov {

/// A point of phase space in Darboux coordinates: Abel coordinates lambda of
/// the degree-g divisor q, extension coordinates x, and conjugate momenta
/// (kappa, k) subject to the Serre constraint x . k = 0.
struct DarbouxPoint {
    VecC lambda;
    Eigen::VectorXcd x, kappa, k;
    ReferenceData ref;
};

/// The separated variables: an unordered set of m = 2g - 2 + s_d points of
/// the cotangent bundle, each a surface point u with the covector value v in
/// the global dz chart, together with the scaling gauge u0.
struct BAConfiguration {
    struct Point {
        SurfacePoint u;
        cplx v;
    };
    std::vector<Point> points;
    cplx u0 = 1.0;
};

/// Projective coordinates on the C*-quotient in the chart x_1 != 0.
struct ReducedPoint {
    VecC lambda;
    Eigen::VectorXcd y, kappa, y_check;
    ReferenceData ref;
};

// --- C* action and reduction --------------------------------------------

inline DarbouxPoint cstar_act(cplx epsilon, const DarbouxPoint& pt) {
    if (epsilon == cplx(0)) throw Error("not in C*");
    DarbouxPoint out = pt;
    out.x = epsilon * pt.x;
    out.k = pt.k / epsilon;
    return out;
}

inline ReducedPoint reduce(const DarbouxPoint& pt) {
    int N = static_cast<int>(pt.x.size());
    if (std::abs(pt.x(0)) < 1e-14) throw Error("chart x₁ ≠ 0 required");
    ReducedPoint rp;
    rp.lambda = pt.lambda;
    rp.kappa = pt.kappa;
    rp.ref = pt.ref;
    rp.y.resize(N - 1);
    rp.y_check.resize(N - 1);
    for (int r = 1; r < N; ++r) {
        rp.y(r - 1) = pt.x(r) / pt.x(0);
        rp.y_check(r - 1) = pt.x(0) * pt.k(r);
    }
    return rp;
}

/// Lift in the gauge x_1 = 1; the momentum k_1 is forced by the Serre
/// constraint, so the moment map of any lift vanishes identically.
inline DarbouxPoint lift(const ReducedPoint& rp) {
    int N = static_cast<int>(rp.y.size()) + 1;
    DarbouxPoint pt;
    pt.lambda = rp.lambda;
    pt.kappa = rp.kappa;
    pt.ref = rp.ref;
    pt.x.resize(N);
    pt.k.resize(N);
    pt.x(0) = 1.0;
    cplx acc = 0;
    for (int r = 1; r < N; ++r) {
        pt.x(r) = rp.y(r - 1);
        pt.k(r) = rp.y_check(r - 1);
        acc += pt.x(r) * pt.k(r);
    }
    pt.k(0) = -acc;
    return pt;
}

// --- square roots and divisor classes -----------------------------------

/// The 2^{2g} Jacobian representatives of the square roots of the trivial
/// bundle: half-lattice vectors n/2 + B m/2 with n, m in {0,1}^g.
inline std::vector<VecC> square_root_bundles(const SurfaceContext& ctx) {
    int g = ctx.g;
    std::vector<VecC> out;
    for (int nb = 0; nb < (1 << g); ++nb) {
        for (int mb = 0; mb < (1 << g); ++mb) {
            VecC v = VecC::Zero(g);
            for (int i = 0; i < g; ++i) {
                v(i) += 0.5 * ((nb >> i) & 1);
                v += 0.5 * double((mb >> i) & 1) * ctx.B.col(i);
            }
            out.push_back(v);
        }
    }
    return out;
}

/// Abel-map residual of the class relation O(u) = K L^{-2} Lambda with
/// L = O(q_L - q_check): small residual certifies that the BA divisor lies
/// in the right class.
inline double divisor_class_check(const SurfaceContext& ctx, const ReferenceData& ref,
                                  const BAConfiguration& ba, const Divisor& q_L) {
    VecC acc = -VecC(ctx.canonical_class_abel());
    for (const auto& p : ba.points) acc += ctx.abel(p.u);
    acc += 2.0 * ctx.abel(q_L);
    acc -= 2.0 * ctx.abel(ref.q_check);
    if (ref.Lambda_degree == 1) acc -= ctx.abel(*ref.q_check_0);
    return ctx.lattice_residual(acc);
}

// --- Jacobi inversion with cold starts ----------------------------------

namespace detail {

/// Seed-and-polish inversion of the Abel map: candidate points are ranked by
/// the reduced theta magnitude of A(x) - lambda + K on the precomputed grid
/// (the vanishing locus picks out the divisor), then Newton-polished.
inline Divisor invert_lambda(const SurfaceContext& ctx, const ReferenceData& ref,
                             const VecC& lambda) {
    if (!ctx.theta_ready) throw Error("context not finalized");
    int g = ctx.g;
    const auto& grid = ctx.grid();
    std::vector<std::pair<double, int>> ranked;
    for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
        VecC v = grid[i].A - lambda + VecC(ctx.K);
        ranked.push_back({reduced_theta_mag(ctx, v), i});
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double scale = 0.0;
    for (cplx e : ctx.curve.branch_points())
        scale = std::max(scale, std::abs(e - ctx.curve.centroid()));

    // enumerate separated g-subsets of the best candidates in rank order
    int pool = std::min<int>(14, static_cast<int>(ranked.size()));
    std::vector<int> comb(g);
    std::iota(comb.begin(), comb.end(), 0);
    auto next_comb = [&]() {
        for (int i = g - 1; i >= 0; --i) {
            if (comb[i] < pool - (g - i)) {
                ++comb[i];
                for (int j = i + 1; j < g; ++j) comb[j] = comb[j - 1] + 1;
                return true;
            }
        }
        return false;
    };
    int attempts = 0;
    do {
        Divisor guess;
        bool ok = true;
        for (int i = 0; i < g && ok; ++i) {
            SurfacePoint p = grid[ranked[comb[i]].second].p;
            for (const auto& [pp, m] : guess.entries)
                if (pp.sheet == p.sheet && std::abs(pp.z - p.z) < 0.15 * scale) ok = false;
            if (ok) guess.add(p, 1);
        }
        if (!ok) continue;
        try {
            Divisor q = q_of_lambda(ctx, ref, lambda, guess);
            if (ctx.lattice_residual(lambda_of_q(ctx, ref, q) - lambda) < 1e-8) {
                // polish toward quadrature precision; keep the coarse solution
                // if the tighter tolerance is out of reach
                try {
                    q = q_of_lambda(ctx, ref, lambda, q, 1e-13, 60);
                } catch (const Error&) {
                }
                return q;
            }
        } catch (const Error&) {
        }
        ++attempts;
    } while (next_comb() && attempts < 60);
    throw Error("Jacobi inversion failed: guess out of basin");
}

/// Interpolation element of the lower-left space as an explicit rational
/// differential (for root inventories).
inline RationalDifferential phi_plus_element(const SurfaceContext& ctx, const ReferenceData& ref,
                                             const Divisor& q, const Eigen::VectorXcd& k) {
    int N = ref.N();
    OmegaSpaceBuilder forms(ctx, 1);
    auto space = forms.build(interpolation_bound(ref, q), "phi_plus_elem");
    if (space.dimension() != N) throw Error("reference divisor fails Span condition");
    auto ppts = ref.p.expanded();
    Eigen::MatrixXcd E(N, N);
    for (int r = 0; r < N; ++r)
        for (int b = 0; b < N; ++b)
            E(r, b) = space.basis[b].density(ppts[r].z, ctx.curve.y_of(ppts[r]));
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(E);
    if (!lu.isInvertible()) throw Error("reference divisor fails Span condition");
    return space.element(lu.solve(k));
}

}  // namespace detail

/// The m zeros of the lower-left component away from its prescribed divisor,
/// with sheet resolution: the separated position variables u(lambda, k).
inline std::vector<SurfacePoint> ba_divisor_from_k(const SurfaceContext& ctx,
                                                   const ReferenceData& ref, const Divisor& q,
                                                   const Eigen::VectorXcd& k) {
    int m_expected = 2 * ctx.g - 2 + ref.s_d();
    RationalDifferential elem = detail::phi_plus_element(ctx, ref, q, k);
    Poly R = elem.A * elem.A - elem.B * elem.B * ctx.curve.f();
    double scale = 0.0;
    for (cplx e : ctx.curve.branch_points())
        scale = std::max(scale, std::abs(e - ctx.curve.centroid()));
    std::vector<cplx> support;
    for (const auto& p : q.points()) support.push_back(p.z);
    for (const auto& p : ref.pole_bound_r().points()) support.push_back(p.z);

    std::vector<cplx> extra;
    for (cplx r : poly_roots(R)) {
        bool near_support = false;
        for (cplx s : support)
            if (std::abs(r - s) < 1e-5 * scale) near_support = true;
        if (near_support) continue;
        extra.push_back(polish_root(R, r));
    }
    if (static_cast<int>(extra.size()) != m_expected) throw Error("degenerate configuration");
    for (size_t i = 0; i < extra.size(); ++i) {
        if (ctx.curve.dist_to_branch(extra[i]) < 1e-6 * scale)
            throw Error("non-simple BA divisor: outside s-locus");
        for (size_t j = i + 1; j < extra.size(); ++j)
            if (std::abs(extra[i] - extra[j]) < 1e-6 * scale)
                throw Error("non-simple BA divisor: outside s-locus");
        for (cplx s : support)
            if (std::abs(extra[i] - s) < 1e-4 * scale) throw Error("degenerate configuration");
    }
    std::vector<SurfacePoint> out;
    for (cplx z : extra) {
        cplx y = ctx.curve.y_of({z, +1});
        cplx plus = elem.A.eval(z) + elem.B.eval(z) * y;
        cplx minus = elem.A.eval(z) - elem.B.eval(z) * y;
        out.push_back({z, std::abs(plus) <= std::abs(minus) ? +1 : -1});
    }
    std::sort(out.begin(), out.end(), [](const SurfacePoint& a, const SurfacePoint& b) {
        if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
        if (a.z.imag() != b.z.imag()) return a.z.imag() < b.z.imag();
        return a.sheet < b.sheet;
    });
    return out;
}

/// Covector values at the separated positions through the explicit momentum
/// formula (chain rule through the Abel coordinates of q); an independent
/// cross-check of the direct diagonal-component evaluation.
inline std::vector<cplx> ba_covectors_formula(const SurfaceContext& ctx, const ReferenceData& ref,
                                              const DarbouxPoint& pt, const Divisor& q,
                                              const std::vector<SurfacePoint>& u) {
    int N = ref.N(), g = ctx.g;
    auto ppts = ref.p.expanded();
    auto qpts = q.expanded();
    Eigen::MatrixXcd M(g, g);  // M(i,j) = omega_i(q_j)
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) M(i, j) = ctx.omega_at(i, qpts[j]);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(M);
    if (!lu.isInvertible()) throw Error("special divisor q");
    std::vector<MeromorphicDifferential> base;
    for (int r = 1; r < N; ++r) base.push_back(omega_third_kind(ctx, ppts[r], ppts[0]));

    std::vector<cplx> v;
    for (const auto& un : u) {
        VecC om(g);
        for (int i = 0; i < g; ++i) om(i) = ctx.omega_at(i, un);
        // dq_j/du_n from d(lambda_i)/du_n = -omega_i(u_n)/2
        VecC dq = lu.solve(VecC(-0.5 * om));
        cplx acc = 0;
        for (int r = 1; r < N; ++r) {
            cplx bracket = base[r - 1].evaluator(un);
            for (int j = 0; j < g; ++j) bracket += 2.0 * base[r - 1].evaluator(qpts[j]) * dq(j);
            acc -= pt.k(r) * pt.x(r) * bracket;
        }
        for (int i = 0; i < g; ++i) acc -= 0.5 * pt.kappa(i) * om(i);
        v.push_back(acc);
    }
    return v;
}

/// Forward SoV transform: Darboux coordinates to the unordered configuration
/// of (position, covector) pairs, with u0 recording the momentum gauge.
inline BAConfiguration sov_forward(const SurfaceContext& ctx, const ReferenceData& ref,
                                   const DarbouxPoint& pt, const Divisor* q_hint = nullptr) {
    if (pt.x.cwiseAbs().maxCoeff() == 0.0 || pt.k.cwiseAbs().maxCoeff() == 0.0)
        throw Error("non-simple BA divisor: outside s-locus");
    Divisor q = q_hint ? q_of_lambda(ctx, ref, pt.lambda, *q_hint)
                       : detail::invert_lambda(ctx, ref, pt.lambda);
    BAConfiguration ba;
    ba.u0 = pt.k(0);
    auto u = ba_divisor_from_k(ctx, ref, q, pt.k);
    ModuliPoint mp;
    mp.q = q;
    mp.x = pt.x;
    mp.lambda = pt.lambda;
    auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
    for (const auto& un : u) ba.points.push_back({un, phi0.evaluator(un)});
    return ba;
}

// --- inverse construction ------------------------------------------------

struct InverseReport {
    Divisor q;
    double class_residual = 0;       // lattice residual of the Step-0 class
    double phi_plus_crosscheck = 0;  // theta-product vs interpolation mismatch
    double system_residual = 0;      // relative residual of the momentum system
    double phi_minus_max_residue = 0;
    cplx u0 = 1.0;
};

struct InverseResult {
    DarbouxPoint pt;
    HiggsDifferential higgs;
    InverseReport report;
};

namespace detail {

/// Theta-product realization of the lower-left component with prescribed
/// zeros 2q + u and poles on the reference divisor r, normalized afterwards.
inline MeromorphicDifferential phi_plus_theta(const SurfaceContext& ctx, const ReferenceData& ref,
                                              const Divisor& q,
                                              const std::vector<SurfacePoint>& u,
                                              double class_tol, double* class_residual) {
    int g = ctx.g;
    std::vector<std::pair<VecC, int>> args;
    VecC D = VecC::Zero(g);
    for (const auto& p : q.expanded()) {
        VecC a = ctx.abel(p);
        D += 2.0 * a;
        args.push_back({a, 2});
    }
    for (const auto& p : u) {
        VecC a = ctx.abel(p);
        D += a;
        args.push_back({a, 1});
    }
    // pole factors, kept at unit multiplicity so one argument can absorb the
    // B-lattice part of the class constraint
    std::vector<size_t> pole_slots;
    for (const auto& p : ref.q_check.expanded()) {
        VecC a = ctx.abel(p);
        D -= 2.0 * a;
        args.push_back({a, -1});
        pole_slots.push_back(args.size() - 1);
        args.push_back({a, -1});
    }
    if (ref.Lambda_degree == 1) {
        VecC a = ctx.abel(*ref.q_check_0);
        D -= a;
        args.push_back({a, -1});
        pole_slots.push_back(args.size() - 1);
    }
    VecC x = D - 2.0 * VecC(ctx.K);
    auto split = ctx.lattice_reduce(x);
    double residual = split.reduced.cwiseAbs().maxCoeff();
    if (class_residual) *class_residual = residual;
    if (residual > class_tol) throw Error("inconsistent (q, ũ) pair");
    VecC shift = VecC::Zero(g);
    for (int i = 0; i < g; ++i) shift += double(split.m(i)) * ctx.B.col(i);
    args[pole_slots.front()].first += shift;

    Divisor rho = generic_rho(ctx);
    VecC rho_sum = VecC::Zero(g);
    for (const auto& p : rho.expanded()) {
        VecC a = ctx.abel(p);
        rho_sum += a;
        args.push_back({a, -2});
    }

    ThetaProduct tp;
    tp.ctx = &ctx;
    tp.omega_power = 1;
    tp.delta_args = std::move(args);
    tp.plain_args.push_back({VecC(rho_sum - VecC(ctx.K)), 2});

    Divisor bound = ref.pole_bound_r();
    for (const auto& [p, m] : q.entries) bound.add(p, -2 * m);
    for (const auto& p : u) bound.add(p, -1);
    return tp.to_differential(std::move(bound), "phi_plus_theta");
}

}  // namespace detail

/// Inverse SoV transform: from a BA configuration and its quadratic
/// differential back to Darboux coordinates, following the four-step
/// reconstruction (divisor class inversion, lower-left component, momentum
/// system, upper-right completion).
inline InverseResult sov_inverse(const SurfaceContext& ctx, const ReferenceData& ref,
                                 const BAConfiguration& ba, const QuadraticDifferential& q_diff,
                                 int sqrt_choice = 0, const cplx* k1_gauge = nullptr,
                                 double tol = 1e-6) {
    int g = ctx.g, N = ref.N();
    int m = static_cast<int>(ba.points.size());
    if (m != 2 * g - 2 + ref.s_d() || !q_diff.nondegenerate)
        throw Error("degenerate configuration");
    double vscale = 1.0;
    for (const auto& p : ba.points) vscale = std::max(vscale, std::abs(p.v) * std::abs(p.v));
    for (int i = 0; i < m; ++i) {
        const auto& pi = ba.points[i];
        cplx qv = q_diff.density(pi.u.z, ctx.curve.y_of(pi.u));
        if (std::abs(qv - pi.v * pi.v) > 1e2 * tol * vscale)
            throw Error("BA data off spectral curve");
        for (int j = i + 1; j < m; ++j) {
            const auto& pj = ba.points[j];
            if (std::abs(pi.u.z - pj.u.z) < 1e-8 && pi.u.sheet == pj.u.sheet) {
                if (std::abs(pi.v + pj.v) < 1e-6 * vscale)
                    throw Error("degenerate configuration");  // pull-back pair
                throw Error("non-simple BA divisor: outside s-locus");
            }
        }
    }

    // Step 0: class inversion for the degree-g divisor q given the square root
    auto roots = square_root_bundles(ctx);
    if (sqrt_choice < 0 || sqrt_choice >= static_cast<int>(roots.size()))
        throw Error("degenerate configuration");
    VecC lambda = VecC(ctx.canonical_class_abel()) + 2.0 * ctx.abel(ref.q_check);
    if (ref.Lambda_degree == 1) lambda += ctx.abel(*ref.q_check_0);
    for (const auto& p : ba.points) lambda -= ctx.abel(p.u);
    lambda = 0.5 * lambda + roots[sqrt_choice];
    Divisor q = detail::invert_lambda(ctx, ref, lambda);
    lambda = lambda_of_q(ctx, ref, q);

    InverseReport rep;
    rep.q = q;

    // Step 1: lower-left component from its divisor, gauge phi_plus(p_1) = k_1
    std::vector<SurfacePoint> u;
    for (const auto& p : ba.points) u.push_back(p.u);
    auto tp = detail::phi_plus_theta(ctx, ref, q, u, 1e2 * tol, &rep.class_residual);
    auto ppts = ref.p.expanded();
    cplx raw1 = tp.evaluator(ppts[0]);
    // the product's overall magnitude is arbitrary: compare against its
    // typical size before declaring the gauge value degenerate
    double typical = 0;
    {
        const auto& grid = ctx.grid();
        for (size_t i = 0; i < grid.size(); i += 17)
            typical = std::max(typical, std::abs(tp.evaluator(grid[i].p)));
    }
    if (std::abs(raw1) < 1e-10 * typical) throw Error("non-generic BA data or reference divisor");
    cplx target_k1 = k1_gauge ? *k1_gauge : cplx(1.0);
    rep.u0 = target_k1 / raw1;
    Eigen::VectorXcd k(N);
    for (int r = 0; r < N; ++r) k(r) = rep.u0 * tp.evaluator(ppts[r]);

    ModuliPoint mp;
    mp.q = q;
    mp.lambda = lambda;
    auto phi_plus = phi_plus_from_k(ctx, ref, mp, k);
    {  // cross-check the theta product against the interpolation realization
        const auto& grid = ctx.grid();
        for (size_t i = 0; i < grid.size(); i += 11) {
            cplx a = rep.u0 * tp.evaluator(grid[i].p), b = phi_plus.evaluator(grid[i].p);
            rep.phi_plus_crosscheck =
                std::max(rep.phi_plus_crosscheck, std::abs(a - b) / std::max(1.0, std::abs(b)));
        }
    }

    // Step 2: the (m + 1) x (N + g) momentum system for (x, kappa)
    auto qpts = q.expanded();
    Eigen::MatrixXcd J(g, g);  // J(i,j) = omega_j(q_i)
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) J(i, j) = ctx.omega_at(j, qpts[i]);
    std::vector<MeromorphicDifferential> wprime;
    for (int r = 1; r < N; ++r)
        wprime.push_back(omega_third_kind_primed(ctx, ppts[r], ppts[0], q, J));

    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(m + 1, N + g);
    Eigen::VectorXcd rhs(m + 1);
    for (int j = 0; j < m; ++j) {
        for (int r = 1; r < N; ++r) A(j, r) = -k(r) * wprime[r - 1].evaluator(ba.points[j].u);
        for (int i = 0; i < g; ++i) A(j, N + i) = -0.5 * ctx.omega_at(i, ba.points[j].u);
        rhs(j) = ba.points[j].v;
    }
    for (int r = 0; r < N; ++r) A(m, r) = k(r);
    rhs(m) = 0;
    for (int i = 0; i <= m; ++i) {
        double sc = std::max(A.row(i).cwiseAbs().maxCoeff(), std::abs(rhs(i)));
        if (sc > 0) {
            A.row(i) /= sc;
            rhs(i) /= sc;
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
    qr.setThreshold(ctx.cfg.rank_tol);
    if (qr.rank() < N + g) throw Error("non-generic BA data or reference divisor");
    Eigen::VectorXcd sol = qr.solve(rhs);
    rep.system_residual = (A * sol - rhs).norm() / std::max(1.0, rhs.norm());
    if (rep.system_residual > 1e3 * tol) throw Error("non-generic BA data or reference divisor");

    DarbouxPoint pt;
    pt.lambda = lambda;
    pt.ref = ref;
    pt.k = k;
    pt.x = sol.head(N);
    pt.kappa = sol.tail(g);
    // impose the Serre constraint exactly: x_1 enters only through that row
    if (std::abs(k(0)) < 1e-14) throw Error("non-generic BA data or reference divisor");
    cplx tailsum = 0;
    for (int r = 1; r < N; ++r) tailsum += pt.x(r) * pt.k(r);
    pt.x(0) = -tailsum / pt.k(0);
    mp.x = pt.x;

    // Step 3: diagonal and upper-right components; the determinant relation
    // makes the ratio completion regular at the BA divisor
    auto phi0 = phi0_from_coords(ctx, ref, mp, pt.kappa, pt.k);
    auto phi0_dens = phi0.density;
    auto phip_dens = phi_plus.density;
    QuadraticDifferential qd = q_diff;
    const HyperellipticCurve* C = &ctx.curve;
    MeromorphicDifferential phi_minus;
    phi_minus.density = [phi0_dens, phip_dens, qd](cplx z, cplx y) {
        cplx a = phi0_dens(z, y);
        return (qd.density(z, y) - a * a) / phip_dens(z, y);
    };
    auto pm_dens = phi_minus.density;
    phi_minus.evaluator = [pm_dens, C](const SurfacePoint& p) {
        return pm_dens(p.z, C->y_of(p));
    };
    {
        Divisor bound;
        for (const auto& p : ppts) bound.add(p, 2);
        for (const auto& p : qpts) bound.add(p, 2);
        for (const auto& [p, mu] : ref.pole_bound_r().entries) bound.add(p, -mu);
        phi_minus.declared_divisor_bound = bound;
        phi_minus.label = "phi_minus_ratio";
    }
    std::vector<cplx> all_z = detail::support_z(ref, q);
    for (const auto& p : ba.points) all_z.push_back(p.u.z);
    for (const auto& bp : ba.points) {
        std::vector<cplx> others;
        for (cplx z : all_z)
            if (std::abs(z - bp.u.z) > 1e-12) others.push_back(z);
        double rho = contour_radius(ctx.curve, bp.u.z, others);
        cplx res = contour_residue(ctx.curve, phi_minus.density, bp.u, rho);
        rep.phi_minus_max_residue = std::max(rep.phi_minus_max_residue, std::abs(res));
    }
    if (rep.phi_minus_max_residue > 1e3 * tol * vscale) throw Error("inconsistent (q, ũ) pair");

    InverseResult out;
    out.pt = std::move(pt);
    out.higgs.phi0 = std::move(phi0);
    out.higgs.phi_plus = std::move(phi_plus);
    out.higgs.phi_minus = std::move(phi_minus);
    out.higgs.base = mp;
    out.higgs.ref = ref;
    out.report = std::move(rep);
    return out;
}

/// Half-lattice index whose square-root representative reproduces lambda
/// from the class of the BA divisor; the matched residual is near zero
/// exactly when lambda and the configuration belong to the same fiber.
inline int matching_sqrt_choice(const SurfaceContext& ctx, const ReferenceData& ref,
                                const BAConfiguration& ba, const VecC& lambda) {
    VecC base = VecC(ctx.canonical_class_abel()) + 2.0 * ctx.abel(ref.q_check);
    if (ref.Lambda_degree == 1) base += ctx.abel(*ref.q_check_0);
    for (const auto& p : ba.points) base -= ctx.abel(p.u);
    base *= 0.5;
    auto roots = square_root_bundles(ctx);
    int best = 0;
    double best_res = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
        double r = ctx.lattice_residual(lambda - base - roots[i]);
        if (r < best_res) {
            best_res = r;
            best = i;
        }
    }
    return best;
}

/// Least-squares reconstruction of the quadratic differential from the BA
/// configuration alone via q(u_i) = v_i^2; exactly determined only when
/// m >= 3g - 3, so the residual is the consistency witness.
inline QuadraticDifferential reconstruct_q(const SurfaceContext& ctx, const BAConfiguration& ba,
                                           double& rel_residual) {
    int g = ctx.g, n = QuadraticDifferential::dim(g);
    int m = static_cast<int>(ba.points.size());
    Eigen::MatrixXcd M(m, n);
    Eigen::VectorXcd rhs(m);
    for (int s = 0; s < m; ++s) {
        cplx y = ctx.curve.y_of(ba.points[s].u);
        for (int b = 0; b < n; ++b) {
            QuadraticDifferential e;
            e.g = g;
            e.coeffs = Eigen::VectorXcd::Zero(n);
            e.coeffs(b) = 1.0;
            M(s, b) = e.density(ba.points[s].u.z, y);
        }
        rhs(s) = ba.points[s].v * ba.points[s].v;
    }
    QuadraticDifferential out;
    out.g = g;
    out.coeffs = M.completeOrthogonalDecomposition().solve(rhs);
    rel_residual = (M * out.coeffs - rhs).norm() / std::max(1e-300, rhs.norm());
    double dummy = 0;
    auto refit = fit_quadratic(ctx, [&](cplx z, cplx y) { return out.density(z, y); }, dummy);
    out.nondegenerate = refit.nondegenerate;
    return out;
}

}  // namespace hsov

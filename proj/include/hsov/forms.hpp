#pragma once

#include <memory>
#include <string>

#include "hsov/theta.hpp"

namespace hsov {

/// Meromorphic differential carried as an evaluator in the dz chart with a
/// declared divisor bound (positive multiplicity = pole allowed, negative =
/// zero required). `density` is the sheet-resolved (z, y) form used for
/// continuation along tracked paths; `abel_evaluator` is set for
/// differentials assembled from theta functions of the Abel map, whose
/// single-valuedness is a property to be checked rather than automatic.
struct MeromorphicDifferential {
    std::function<cplx(const SurfacePoint&)> evaluator;
    std::function<cplx(cplx, cplx)> density;
    Divisor declared_divisor_bound;
    std::string label;
    bool needs_abel = false;
    std::function<cplx(cplx, cplx, const VecC&)> abel_evaluator;  // (z, y, A(z))

    cplx operator()(const SurfacePoint& p) const { return evaluator(p); }
};

/// Density (A(z) + B(z) y) / (D(z) y^w); w = 1 for one-forms written against
/// dz/y, w = 0 for functions. Closed under the pointwise algebra needed here.
struct RationalDifferential {
    Poly A, B, D;
    int w = 1;

    cplx density(cplx z, cplx y) const {
        cplx num = A.eval(z) + B.eval(z) * y;
        cplx den = D.eval(z);
        if (w == 1) den *= y;
        return num / den;
    }
};

inline MeromorphicDifferential make_differential(const SurfaceContext& ctx,
                                                 std::vector<std::pair<cplx, RationalDifferential>> parts,
                                                 Divisor bound, std::string label) {
    const HyperellipticCurve* C = &ctx.curve;
    auto shared = std::make_shared<std::vector<std::pair<cplx, RationalDifferential>>>(std::move(parts));
    MeromorphicDifferential d;
    d.density = [shared](cplx z, cplx y) {
        cplx acc = 0;
        for (const auto& [c, r] : *shared) acc += c * r.density(z, y);
        return acc;
    };
    d.evaluator = [shared, C](const SurfacePoint& p) {
        cplx y = C->y_of(p);
        cplx acc = 0;
        for (const auto& [c, r] : *shared) acc += c * r.density(p.z, y);
        return acc;
    };
    d.declared_divisor_bound = std::move(bound);
    d.label = std::move(label);
    return d;
}

inline MeromorphicDifferential holomorphic_basis_form(const SurfaceContext& ctx, int i) {
    std::vector<cplx> coeffs(ctx.g);
    for (int j = 0; j < ctx.g; ++j) coeffs[j] = ctx.omega_coeff(i, j);
    RationalDifferential r{Poly(std::move(coeffs)), Poly(), Poly::constant(1.0), 1};
    return make_differential(ctx, {{1.0, r}}, {}, "omega_" + std::to_string(i));
}

// --- sheet-resolved contour Laurent coefficients ------------------------

namespace detail {

/// Sample points of the circle |z - center.z| = rho on the sheet continued
/// from the center, with y tracked around.
struct ContourSamples {
    std::vector<cplx> z;
    std::vector<cplx> y;
    cplx zc;
    double rho;
};

inline ContourSamples contour_samples(const HyperellipticCurve& C, SurfacePoint center,
                                      double rho, int M) {
    ContourSamples s;
    s.zc = center.z;
    s.rho = rho;
    s.z.resize(M);
    s.y.resize(M);
    cplx y = C.y_of(center);
    // walk radially out, then around
    cplx z0 = center.z + rho;
    for (int step = 1; step <= 8; ++step)
        y = C.y_near(center.z + (z0 - center.z) * (double(step) / 8.0), y);
    for (int j = 0; j < M; ++j) {
        cplx zj = center.z + rho * std::exp(2.0 * kPi * kI * (double(j) / M));
        y = C.y_near(zj, y);
        s.z[j] = zj;
        s.y[j] = y;
    }
    return s;
}

}  // namespace detail

/// Laurent coefficient a_k of the density h around the given surface point:
/// h(z) = sum_k a_k (z - z_c)^k locally on that sheet.
inline cplx contour_coeff(const HyperellipticCurve& C, const std::function<cplx(cplx, cplx)>& h,
                          SurfacePoint center, double rho, int k, int M = 64) {
    auto s = detail::contour_samples(C, center, rho, M);
    cplx acc = 0;
    for (int j = 0; j < M; ++j) acc += h(s.z[j], s.y[j]) * std::pow(s.z[j] - s.zc, -k);
    return acc / double(M);
}

inline cplx contour_residue(const HyperellipticCurve& C, const std::function<cplx(cplx, cplx)>& h,
                            SurfacePoint center, double rho, int M = 64) {
    return contour_coeff(C, h, center, rho, -1, M);
}

/// Default contour radius at a surface point: well inside the branch
/// clearance and clear of the other marked z-locations.
inline double contour_radius(const HyperellipticCurve& C, cplx zc,
                             const std::vector<cplx>& other_z) {
    double r = C.dist_to_branch(zc);
    for (cplx o : other_z) {
        double d = std::abs(o - zc);
        if (d > 1e-11) r = std::min(r, d);
    }
    return 0.3 * r;
}

// --- bounded differential spaces ---------------------------------------

struct DifferentialSpace {
    std::vector<MeromorphicDifferential> basis;
    // structural data shared by all elements: density = (A + B y)/(D y^w)
    Poly D;
    int degA = -1, degB = -1;  // coefficient counts degA+1, degB+1
    int weight = 1;
    Eigen::MatrixXcd coeffs;  // row per basis element: [a_0.. a_degA, b_0.. b_degB]

    int dimension() const { return static_cast<int>(basis.size()); }

    RationalDifferential element(const Eigen::VectorXcd& combo) const {
        Eigen::VectorXcd c = coeffs.transpose() * combo;
        std::vector<cplx> a(degA + 1), b(std::max(0, degB + 1));
        for (int i = 0; i <= degA; ++i) a[i] = c(i);
        for (int i = 0; i <= degB; ++i) b[i] = c(degA + 1 + i);
        return {Poly(std::move(a)), Poly(std::move(b)), D, weight};
    }
};

/// Builds the space of differentials (weight 1) or functions (weight 0) with
/// divisor >= -D: positive multiplicities in D allow poles, negative ones
/// demand zeros, all sheet-resolved. Pole/zero orders are enforced through
/// contour-extracted Laurent coefficients; the space is the SVD null space
/// of the constraint matrix.
class OmegaSpaceBuilder {
  public:
    OmegaSpaceBuilder(const SurfaceContext& ctx, int weight) : ctx_(&ctx), w_(weight) {}

    DifferentialSpace build(const Divisor& div, const std::string& label,
                            Eigen::VectorXd* singular_values = nullptr) const {
        const auto& ctx = *ctx_;
        int g = ctx.g;
        // group divisor entries by z-coordinate, sheet-resolved orders
        struct Site {
            cplx z;
            int ord[2] = {0, 0};  // index 0: sheet +1, 1: sheet -1
        };
        std::vector<Site> sites;
        for (const auto& [p, m] : div.entries) {
            ctx.curve.require_off_branch(p, 1e-9);
            bool found = false;
            for (auto& s : sites)
                if (std::abs(s.z - p.z) < 1e-9) {
                    s.ord[p.sheet > 0 ? 0 : 1] += m;
                    found = true;
                }
            if (!found) {
                Site s;
                s.z = p.z;
                s.ord[p.sheet > 0 ? 0 : 1] = m;
                sites.push_back(s);
            }
        }
        // denominator: max allowed pole order over the two sheets at each z
        Poly D = Poly::constant(1.0);
        int M = 0;
        std::vector<int> dmult(sites.size());
        for (size_t i = 0; i < sites.size(); ++i) {
            int m = std::max({sites[i].ord[0], sites[i].ord[1], 0});
            dmult[i] = m;
            M += m;
            for (int k = 0; k < m; ++k) D = D * Poly({-sites[i].z, cplx(1.0)});
        }
        int degA = w_ == 1 ? M + g - 1 : M;
        int degB = w_ == 1 ? M - 2 : M - g - 1;
        int nA = degA + 1, nB = std::max(0, degB + 1);
        int n = nA + nB;

        // constraint rows: Laurent coefficients that must vanish
        std::vector<cplx> all_z;
        for (const auto& s : sites) all_z.push_back(s.z);
        std::vector<Eigen::VectorXcd> rows;
        for (size_t i = 0; i < sites.size(); ++i) {
            double rho = contour_radius(ctx.curve, sites[i].z, all_z);
            for (int sh = 0; sh < 2; ++sh) {
                int allowed = sites[i].ord[sh];
                if (allowed >= dmult[i] && allowed >= 0) continue;
                SurfacePoint center{sites[i].z, sh == 0 ? +1 : -1};
                auto samples = detail::contour_samples(ctx.curve, center, rho, 64);
                // basis values at the samples
                Eigen::MatrixXcd vals(64, n);
                for (int j = 0; j < 64; ++j) {
                    cplx z = samples.z[j], y = samples.y[j];
                    cplx den = D.eval(z);
                    if (w_ == 1) den *= y;
                    cplx pw = 1.0;
                    for (int a = 0; a < nA; ++a) {
                        vals(j, a) = pw / den;
                        pw *= z;
                    }
                    pw = 1.0;
                    for (int b = 0; b < nB; ++b) {
                        vals(j, nA + b) = pw * y / den;
                        pw *= z;
                    }
                }
                for (int k = -dmult[i]; k <= -allowed - 1; ++k) {
                    Eigen::VectorXcd row(n);
                    for (int c = 0; c < n; ++c) {
                        cplx acc = 0;
                        for (int j = 0; j < 64; ++j)
                            acc += vals(j, c) * std::pow(samples.z[j] - samples.zc, -k);
                        row(c) = acc / 64.0;
                    }
                    double sc = row.cwiseAbs().maxCoeff();
                    rows.push_back(sc > 0 ? Eigen::VectorXcd(row / sc) : row);
                }
            }
        }
        Eigen::MatrixXcd Cmat(rows.size(), n);
        for (size_t r = 0; r < rows.size(); ++r) Cmat.row(r) = rows[r];

        Eigen::MatrixXcd null;
        if (rows.empty()) {
            null = Eigen::MatrixXcd::Identity(n, n);
            if (singular_values) *singular_values = Eigen::VectorXd();
        } else {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Cmat, Eigen::ComputeFullV);
            if (singular_values) *singular_values = svd.singularValues();
            double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
            int rank = 0;
            for (int i = 0; i < svd.singularValues().size(); ++i)
                if (svd.singularValues()(i) > ctx.cfg.rank_tol * std::max(smax, 1e-300)) ++rank;
            null = svd.matrixV().rightCols(n - rank);
        }

        DifferentialSpace space;
        space.D = D;
        space.degA = degA;
        space.degB = degB;
        space.weight = w_;
        space.coeffs = null.transpose();
        for (int i = 0; i < null.cols(); ++i) {
            std::vector<cplx> a(nA), b(nB);
            for (int j = 0; j < nA; ++j) a[j] = null(j, i);
            for (int j = 0; j < nB; ++j) b[j] = null(nA + j, i);
            RationalDifferential r{Poly(std::move(a)), Poly(std::move(b)), D, w_};
            space.basis.push_back(make_differential(*ctx_, {{1.0, r}}, div,
                                                    label + "[" + std::to_string(i) + "]"));
        }
        return space;
    }

  private:
    const SurfaceContext* ctx_;
    int w_;
};

// --- third-kind differentials -------------------------------------------

/// Unique differential with simple poles at p_plus / p_minus of residues
/// +1 / -1 and vanishing a-periods.
inline MeromorphicDifferential omega_third_kind(const SurfaceContext& ctx, SurfacePoint p_plus,
                                                SurfacePoint p_minus) {
    if (std::abs(p_plus.z - p_minus.z) < 1e-12 && p_plus.sheet == p_minus.sheet)
        throw Error("degenerate third-kind differential");
    ctx.curve.require_off_branch(p_plus, 1e-9);
    ctx.curve.require_off_branch(p_minus, 1e-9);
    cplx yp = ctx.curve.y_of(p_plus), ym = ctx.curve.y_of(p_minus);
    cplx zp = p_plus.z, zm = p_minus.z;
    // [(y + y_+)/(z - z_+) - (y + y_-)/(z - z_-)] dz/(2y)
    //   = (A + B y) / (D y) dz with D = (z - z_+)(z - z_-)
    Poly D = Poly({-zp, cplx(1.0)}) * Poly({-zm, cplx(1.0)});
    Poly A = 0.5 * yp * Poly({-zm, cplx(1.0)}) - 0.5 * ym * Poly({-zp, cplx(1.0)});
    Poly B = Poly::constant(0.5 * (zp - zm));
    RationalDifferential raw{A, B, D, 1};
    // subtract a-periods
    VecIntegrand h1 = [raw](cplx z, cplx y) -> VecC {
        VecC v(1);
        v(0) = raw.density(z, y);
        return v;
    };
    std::vector<std::pair<cplx, RationalDifferential>> parts{{1.0, raw}};
    for (int i = 0; i < ctx.g; ++i) {
        cplx ci = ctx.cycle_integral(ctx.a_cycles[i], h1, 1)(0);
        std::vector<cplx> coeffs(ctx.g);
        for (int j = 0; j < ctx.g; ++j) coeffs[j] = ctx.omega_coeff(i, j);
        parts.push_back({-ci, {Poly(std::move(coeffs)), Poly(), Poly::constant(1.0), 1}});
    }
    Divisor bound;
    bound.add(p_plus, 1);
    bound.add(p_minus, 1);
    return make_differential(ctx, std::move(parts), bound, "omega_third_kind");
}

/// (3.5)-style correction: subtract the holomorphic combination that makes
/// the differential vanish on the degree-g divisor q.
inline MeromorphicDifferential omega_third_kind_primed(const SurfaceContext& ctx,
                                                       SurfacePoint p_plus, SurfacePoint p_minus,
                                                       const Divisor& q,
                                                       const Eigen::MatrixXcd& lambda_jacobian) {
    auto base = omega_third_kind(ctx, p_plus, p_minus);
    auto pts = q.expanded();
    if (static_cast<int>(pts.size()) != ctx.g) throw Error("special divisor q");
    for (const auto& p : pts)
        if ((std::abs(p.z - p_plus.z) < 1e-10 && p.sheet == p_plus.sheet) ||
            (std::abs(p.z - p_minus.z) < 1e-10 && p.sheet == p_minus.sheet))
            throw Error("special divisor q");
    // lambda_jacobian_{ij} = omega_j(q_i); correction coefficients solve it
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(lambda_jacobian);
    if (!lu.isInvertible()) throw Error("special divisor q");
    VecC w(ctx.g);
    for (int j = 0; j < ctx.g; ++j) w(j) = base.evaluator(pts[j]);
    VecC c = lu.solve(w);  // then omega' = omega - sum_i c_i omega_i
    auto omega_coeff = ctx.omega_coeff;
    int g = ctx.g;
    auto base_density = base.density;
    const HyperellipticCurve* C = &ctx.curve;
    MeromorphicDifferential d;
    d.density = [base_density, omega_coeff, c, g](cplx z, cplx y) {
        cplx acc = base_density(z, y);
        cplx pw = 1.0;
        VecC mono(g);
        for (int j = 0; j < g; ++j) {
            mono(j) = pw / y;
            pw *= z;
        }
        VecC om = omega_coeff * mono;
        for (int i = 0; i < g; ++i) acc -= c(i) * om(i);
        return acc;
    };
    auto dens = d.density;
    d.evaluator = [dens, C](const SurfacePoint& p) { return dens(p.z, C->y_of(p)); };
    d.declared_divisor_bound = base.declared_divisor_bound;
    for (const auto& p : pts) d.declared_divisor_bound.add(p, -1);
    d.label = "omega_third_kind_primed";
    return d;
}

// --- single-valuedness check --------------------------------------------

/// Continue the value of a differential along a homology basis cycle and
/// return |continued - original| / max(1, |original|). For theta-built
/// differentials the Abel argument is continued incrementally along the
/// path; for rational densities the result is zero by construction.
inline double monodromy_check(const SurfaceContext& ctx, const MeromorphicDifferential& d,
                              int cycle_index) {
    const CycleClass& cyc = cycle_index < ctx.g ? ctx.a_cycles[cycle_index]
                                                : ctx.b_cycles[cycle_index - ctx.g];
    const auto& path = cyc.path;
    Tracked t{path.front(), cyc.y0};
    // guard: the path must stay away from the singular support
    for (cplx zp : path)
        for (const auto& [p, m] : d.declared_divisor_bound.entries)
            if (m > 0 && std::abs(zp - p.z) < 1e-7) throw Error("cycle through singularity");
    if (!d.needs_abel) {
        cplx v0 = d.density(t.z, t.y);
        for (size_t i = 1; i < path.size(); ++i) t = ctx.engine.advance(t, path[i]);
        t = ctx.engine.advance(t, path.front());
        cplx v1 = d.density(t.z, t.y);
        return std::abs(v1 - v0) / std::max(1.0, std::abs(v0));
    }
    auto h = ctx.omega_integrand();
    SurfacePoint start{t.z, ctx.curve.sheet_of(t.z, t.y)};
    VecC A = ctx.abel(start);
    cplx v0 = d.abel_evaluator(t.z, t.y, A);
    for (size_t i = 1; i <= path.size(); ++i) {
        cplx target = i < path.size() ? path[i] : path.front();
        A += ctx.engine.integrate_segment(t, target, h, ctx.g);
    }
    cplx v1 = d.abel_evaluator(t.z, t.y, A);
    return std::abs(v1 - v0) / std::max(1.0, std::abs(v0));
}

}  // namespace hsov

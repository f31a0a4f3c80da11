#pragma once

#include <array>
#include <optional>

#include "hsov/path.hpp"

namespace hsov {

/// A homology cycle realized as an integer combination of simple closed
/// loops, plus one connected closed polyline representing the same class
/// (used for analytic-continuation checks).
struct Loop {
    std::vector<cplx> pts;  // closed polyline (first point not repeated)
    cplx y0;                // y at pts[0] fixing the starting sheet
};

struct CycleClass {
    std::vector<std::pair<Loop, int>> parts;  // (loop, coefficient)
    std::vector<cplx> path;                   // connected closed polyline
    cplx y0;                                  // starting y for `path`
};

struct LatticeSplit {
    VecC reduced;
    Eigen::VectorXi n, m;  // v = reduced + n + B m
};

/// Immutable bundle of curve data: normalized holomorphic differentials,
/// period matrix, Abel-map evaluator, theta characteristic and Riemann
/// constants (the latter two filled in by the theta layer).
class SurfaceContext {
  public:
    SurfaceContext(HyperellipticCurve c, SurfacePoint basepoint, NumericConfig cfg)
        : curve(std::move(c)),
          cfg(cfg),
          basepoint(basepoint),
          engine(curve, cfg.quad_tol),
          g(curve.genus()) {
        curve.require_off_branch(basepoint);
        theta_radius = cfg.theta_radius;
        clearance = 0.25 * curve.min_branch_separation();
        build_cycles();
        compute_periods();
        abel_iota_basepoint_ = abel(involution(basepoint));
        canonical_class_abel_ = double(g - 1) * abel_iota_basepoint_;
        build_grid();
    }

    HyperellipticCurve curve;
    NumericConfig cfg;
    SurfacePoint basepoint;
    PathEngine engine;
    int g;
    double clearance = 0;

    Eigen::MatrixXcd omega_coeff;  // row i: polynomial coeffs of omega_i * y/dz
    Eigen::MatrixXcd B;
    std::vector<CycleClass> a_cycles, b_cycles;

    // Filled by the theta layer (finalize_context).
    Eigen::VectorXd char_alpha, char_beta;  // odd characteristic (half-integers)
    Eigen::VectorXcd K;                     // Riemann constants
    VecC theta_grad0;                       // gradient of theta[char] at 0
    int theta_radius = 8;
    bool theta_ready = false;

    // --- holomorphic differentials -------------------------------------
    /// Densities of the g normalized differentials at (z, y).
    VecC omega_at(cplx z, cplx y) const {
        VecC mono(g);
        cplx p = 1.0;
        for (int j = 0; j < g; ++j) {
            mono(j) = p / y;
            p *= z;
        }
        return omega_coeff * mono;
    }
    cplx omega_at(int i, const SurfacePoint& p) const {
        return omega_at(p.z, curve.y_of(p))(i);
    }
    /// z-derivative of the density of omega_i at a point.
    cplx omega_deriv_at(int i, const SurfacePoint& p) const {
        cplx y = curve.y_of(p), z = p.z;
        cplx num = 0, dnum = 0, pw = 1.0, pwm = 0.0;
        for (int j = 0; j < g; ++j) {
            num += omega_coeff(i, j) * pw;
            if (j >= 1) dnum += omega_coeff(i, j) * double(j) * pwm;
            pwm = (j == 0) ? cplx(1.0) : pwm * z;  // z^{j-1} for next iteration
            pw *= z;
        }
        cplx yp = curve.f().derivative().eval(z) / (2.0 * y);
        return dnum / y - num * yp / (y * y);
    }

    VecIntegrand omega_integrand() const {
        Eigen::MatrixXcd coeff = omega_coeff;
        int gg = g;
        return [coeff, gg](cplx z, cplx y) -> VecC {
            VecC mono(gg);
            cplx p = 1.0;
            for (int j = 0; j < gg; ++j) {
                mono(j) = p / y;
                p *= z;
            }
            return coeff * mono;
        };
    }

    // --- cycles ---------------------------------------------------------
    VecC cycle_integral(const CycleClass& cyc, const VecIntegrand& h, int dim) const {
        VecC total = VecC::Zero(dim);
        for (const auto& [loop, coeff] : cyc.parts) {
            if (coeff == 0) continue;
            total += double(coeff) * engine.integrate_loop(loop.pts, loop.y0, h, dim);
        }
        return total;
    }

    // --- Abel map -------------------------------------------------------
    /// Abel map along the canonical path from the basepoint.
    VecC abel(const SurfacePoint& p) const {
        curve.require_off_branch(p, 1e-9);
        if (p.z == basepoint.z && p.sheet == basepoint.sheet) return VecC::Zero(g);
        auto h = omega_integrand();
        auto pts = route_path(curve, basepoint.z, p.z, clearance);
        Tracked a{basepoint.z, curve.y_of(basepoint)};
        VecC I = engine.integrate(pts, a, h, g);
        cplx want = curve.y_of(p);
        if (std::abs(a.y - want) > std::abs(a.y + want)) I += flip_excursion(a, h);
        if (std::abs(a.y - want) > std::abs(a.y + want)) throw Error("path degenerate");
        return I;
    }

    VecC abel(const Divisor& d) const {
        VecC total = VecC::Zero(g);
        for (const auto& [p, m] : d.entries) total += double(m) * abel(p);
        return total;
    }

    /// Direct short-path Abel increment between two nearby points (not
    /// reduced to the canonical path class; differs from abel(to)-abel(from)
    /// by a lattice vector in general).
    VecC abel_between(const SurfacePoint& from, const SurfacePoint& to) const {
        auto h = omega_integrand();
        auto pts = route_path(curve, from.z, to.z, clearance);
        Tracked a{from.z, curve.y_of(from)};
        VecC I = engine.integrate(pts, a, h, g);
        cplx want = curve.y_of(to);
        if (std::abs(a.y - want) > std::abs(a.y + want)) I += flip_excursion(a, h);
        if (std::abs(a.y - want) > std::abs(a.y + want)) throw Error("path degenerate");
        return I;
    }

    /// Continue the anchor to a target surface point along a routed path,
    /// appending a sheet-flip excursion at the end if needed.
    VecC integrate_to(Tracked& a, const SurfacePoint& target, const VecIntegrand& h) const {
        VecC I = engine.integrate(route_path(curve, a.z, target.z, clearance), a, h, g);
        cplx want = curve.y_of(target);
        if (std::abs(a.y - want) > std::abs(a.y + want)) I += flip_excursion(a, h);
        if (std::abs(a.y - want) > std::abs(a.y + want)) throw Error("path degenerate");
        return I;
    }

    const VecC& abel_involution_basepoint() const { return abel_iota_basepoint_; }
    /// Abel value of a canonical (degree 2g-2) divisor class representative.
    const VecC& canonical_class_abel() const { return canonical_class_abel_; }

    // --- lattice --------------------------------------------------------
    LatticeSplit lattice_reduce(const VecC& v) const {
        Eigen::VectorXd yv = imB_solver_.solve(v.imag());
        Eigen::VectorXd xv = v.real() - B.real() * yv;
        Eigen::VectorXi n(g), m(g);
        for (int i = 0; i < g; ++i) {
            n(i) = static_cast<int>(std::floor(xv(i) + 0.5));
            m(i) = static_cast<int>(std::floor(yv(i) + 0.5));
        }
        VecC red = v;
        for (int i = 0; i < g; ++i) {
            red(i) -= cplx(double(n(i)), 0.0);
            red -= double(m(i)) * B.col(i);
        }
        return {red, n, m};
    }
    double lattice_residual(const VecC& v) const {
        return lattice_reduce(v).reduced.cwiseAbs().maxCoeff();
    }

    // --- precomputed point grid (Jacobi-inversion seeds) ---------------
    struct GridPoint {
        SurfacePoint p;
        VecC A;
    };
    const std::vector<GridPoint>& grid() const { return grid_; }

  private:
    static cplx unit_from(cplx a, cplx e) {
        cplx d = a - e;
        double n = std::abs(d);
        return n > 1e-12 ? d / n : cplx(1, 0);
    }

    /// Out-and-back excursion from the anchor around the nearest branch
    /// point. The retraced legs undo each other's continuation, so the net
    /// effect on the anchor is exactly one sheet flip; the integral picks up
    /// the (non-cancelling) contribution of the excursion.
    VecC flip_excursion(Tracked& a, const VecIntegrand& h) const {
        cplx e = curve.branch_points().front();
        for (cplx c : curve.branch_points())
            if (std::abs(c - a.z) < std::abs(e - a.z)) e = c;
        double r = 0.3 * curve.min_branch_separation();
        cplx w = e + r * unit_from(a.z, e);
        cplx start = a.z;
        auto out = route_path(curve, start, w, clearance);
        VecC total = engine.integrate(out, a, h, g);
        auto circ = circle_polyline(e, r, 24, std::arg(w - e));
        for (size_t i = 1; i < circ.size(); ++i) total += engine.integrate_segment(a, circ[i], h, g);
        total += engine.integrate_segment(a, w, h, g);
        for (auto it = out.rbegin() + 1; it != out.rend(); ++it)
            total += engine.integrate_segment(a, *it, h, g);
        if (a.z != start) throw Error("path degenerate");
        return total;
    }

    Loop make_pair_loop(cplx A, cplx Bp) const {
        cplx c = 0.5 * (A + Bp), u = 0.5 * (Bp - A);
        double smin = 1e300;
        for (cplx e : curve.branch_points()) {
            if (std::abs(e - A) < 1e-12 || std::abs(e - Bp) < 1e-12) continue;
            smin = std::min(smin, (std::abs(e - A) + std::abs(e - Bp)) / std::abs(u));
        }
        double alpha2 = std::sqrt(2.0 * smin);  // geometric mean of 2 and smin
        double alpha = 0.5 * alpha2;
        double beta = std::sqrt(alpha * alpha - 1.0);
        int n = 48;
        Loop loop;
        loop.pts.reserve(n);
        for (int k = 0; k < n; ++k) {
            double t = 2 * kPi * k / n;
            loop.pts.push_back(c + u * cplx(alpha * std::cos(t), beta * std::sin(t)));
        }
        loop.y0 = std::sqrt(curve.f().eval(loop.pts[0]));
        return loop;
    }

    static Loop reversed(const Loop& l) {
        Loop r;
        r.pts.push_back(l.pts.front());
        for (size_t i = l.pts.size() - 1; i >= 1; --i) r.pts.push_back(l.pts[i]);
        r.y0 = l.y0;
        return r;
    }

    void build_cycles() {
        const auto& e = curve.branch_points();
        for (int k = 0; k < g; ++k) {
            raw_a_.push_back(make_pair_loop(e[2 * k], e[2 * k + 1]));
            raw_c_.push_back(make_pair_loop(e[2 * k + 1], e[2 * k + 2]));
        }
    }

    void compute_periods() {
        // periods of the unnormalized monomial differentials z^j dz / y
        int gg = g;
        VecIntegrand eta = [gg](cplx z, cplx y) -> VecC {
            VecC v(gg);
            cplx p = 1.0;
            for (int j = 0; j < gg; ++j) {
                v(j) = p / y;
                p *= z;
            }
            return v;
        };
        Eigen::MatrixXcd Pa(g, g), Pc(g, g);
        for (int i = 0; i < g; ++i) {
            Pa.col(i) = engine.integrate_loop(raw_a_[i].pts, raw_a_[i].y0, eta, g);
            Pc.col(i) = engine.integrate_loop(raw_c_[i].pts, raw_c_[i].y0, eta, g);
        }
        // orientation / assembly search: a_i -> sigma_i a_i, b_k = sum_l M_lk c_l
        auto try_choice = [&](const Eigen::VectorXi& sigma, const Eigen::MatrixXi& M,
                              Eigen::MatrixXcd& Bout, Eigen::MatrixXcd& Cout) -> bool {
            Eigen::MatrixXcd PaS = Pa;
            for (int i = 0; i < g; ++i) PaS.col(i) *= double(sigma(i));
            Eigen::MatrixXcd Pb = Pc * M.cast<double>();
            Eigen::FullPivLU<Eigen::MatrixXcd> lu(PaS);
            if (!lu.isInvertible()) return false;
            Eigen::MatrixXcd Bc = lu.solve(Pb);
            double scale = std::max(1.0, Bc.cwiseAbs().maxCoeff());
            if ((Bc - Bc.transpose()).cwiseAbs().maxCoeff() > 1e-6 * scale) return false;
            Eigen::MatrixXd Y = 0.5 * (Bc.imag() + Bc.imag().transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Y);
            if (es.eigenvalues().minCoeff() <= 1e-9) return false;
            Bout = 0.5 * (Bc + Bc.transpose());
            Cout = lu.inverse();
            chosen_sigma_ = sigma;
            chosen_M_ = M;
            return true;
        };
        bool found = false;
        Eigen::MatrixXcd Bres, Cres;
        // fast pass: suffix/prefix assemblies with per-loop signs
        for (int assembly = 0; assembly < 2 && !found; ++assembly) {
            for (int smask = 0; smask < (1 << g) && !found; ++smask) {
                for (int tmask = 0; tmask < (1 << g) && !found; ++tmask) {
                    Eigen::VectorXi sigma(g);
                    Eigen::MatrixXi M = Eigen::MatrixXi::Zero(g, g);
                    for (int i = 0; i < g; ++i) sigma(i) = (smask >> i) & 1 ? -1 : 1;
                    for (int k = 0; k < g; ++k)
                        for (int l = 0; l < g; ++l) {
                            bool in = assembly == 0 ? (l >= k) : (l <= k);
                            if (in) M(l, k) = (tmask >> l) & 1 ? -1 : 1;
                        }
                    found = try_choice(sigma, M, Bres, Cres);
                }
            }
        }
        if (!found) {
            // exhaustive fallback over small unimodular assemblies
            int total = 1;
            for (int i = 0; i < g * g; ++i) total *= 3;
            for (int smask = 0; smask < (1 << g) && !found; ++smask) {
                Eigen::VectorXi sigma(g);
                for (int i = 0; i < g; ++i) sigma(i) = (smask >> i) & 1 ? -1 : 1;
                for (int code = 0; code < total && !found; ++code) {
                    Eigen::MatrixXi M(g, g);
                    int c = code;
                    for (int i = 0; i < g * g; ++i) {
                        M(i / g, i % g) = (c % 3) - 1;
                        c /= 3;
                    }
                    if (std::abs(double(Eigen::MatrixXi(M).cast<double>().determinant())) < 0.5)
                        continue;
                    found = try_choice(sigma, M, Bres, Cres);
                }
            }
        }
        if (!found) throw Error("period integration failed");
        B = Bres;
        omega_coeff = Cres;  // row i: monomial coefficients of omega_i
        imB_solver_.compute(B.imag());
        assemble_cycles();
    }

    void assemble_cycles() {
        for (int i = 0; i < g; ++i) {
            CycleClass a;
            Loop l = chosen_sigma_(i) > 0 ? raw_a_[i] : reversed(raw_a_[i]);
            a.parts.emplace_back(l, 1);
            a.path = l.pts;
            a.y0 = l.y0;
            a_cycles.push_back(std::move(a));
        }
        for (int k = 0; k < g; ++k) {
            CycleClass b;
            std::vector<int> comps;
            for (int l = 0; l < g; ++l)
                if (chosen_M_(l, k) != 0) comps.push_back(l);
            for (int l : comps) {
                Loop lp = chosen_M_(l, k) > 0 ? raw_c_[l] : reversed(raw_c_[l]);
                b.parts.emplace_back(lp, std::abs(chosen_M_(l, k)));
            }
            // connected representative: traverse loops joined by retraced
            // connectors (their contributions cancel for closed classes)
            std::vector<cplx> path;
            std::vector<std::vector<cplx>> connectors;
            for (size_t ci = 0; ci < comps.size(); ++ci) {
                const Loop& lp =
                    chosen_M_(comps[ci], k) > 0 ? raw_c_[comps[ci]] : reversed(raw_c_[comps[ci]]);
                for (int rep = 0; rep < std::abs(chosen_M_(comps[ci], k)); ++rep) {
                    path.insert(path.end(), lp.pts.begin(), lp.pts.end());
                    path.push_back(lp.pts.front());
                }
                if (ci + 1 < comps.size()) {
                    auto conn = route_path(curve, lp.pts.front(),
                                           raw_c_[comps[ci + 1]].pts.front(), clearance);
                    connectors.push_back(conn);
                    path.insert(path.end(), conn.begin() + 1, conn.end());
                }
            }
            // retrace connectors backwards to close the path
            for (auto it = connectors.rbegin(); it != connectors.rend(); ++it) {
                for (auto p = it->rbegin() + 1; p != it->rend(); ++p) path.push_back(*p);
            }
            b.path = std::move(path);
            const Loop& first =
                chosen_M_(comps.front(), k) > 0 ? raw_c_[comps.front()] : reversed(raw_c_[comps.front()]);
            b.y0 = first.y0;
            if (!b.path.empty()) b.path.pop_back();  // closed polyline: no repeated endpoint
            b_cycles.push_back(std::move(b));
        }
    }

    void build_grid() {
        double scale = 0.0;
        for (cplx e : curve.branch_points()) scale = std::max(scale, std::abs(e - curve.centroid()));
        const double radii[] = {0.35, 0.6, 0.85, 1.15, 1.5, 2.0};
        std::vector<SurfacePoint> pts;
        for (double rf : radii) {
            for (int k = 0; k < 16; ++k) {
                double t = 2 * kPi * (k + 0.31) / 16.0;
                cplx z = curve.centroid() + rf * scale * cplx(std::cos(t), std::sin(t));
                if (curve.dist_to_branch(z) < 0.4 * clearance) continue;
                pts.push_back({z, +1});
            }
        }
        // chain incrementally for speed; record canonical-class values lazily
        VecC acc = abel(pts.front());
        grid_.push_back({pts.front(), acc});
        for (size_t i = 1; i < pts.size(); ++i) {
            acc = grid_.back().A + abel_between(grid_.back().p, pts[i]);
            grid_.push_back({pts[i], acc});
        }
        // opposite sheet: A(z,-1) continued through a sheet switch
        SurfacePoint flip{pts.front().z, -1};
        VecC accm = abel(flip);
        grid_.push_back({flip, accm});
        for (size_t i = 1; i < pts.size(); ++i) {
            SurfacePoint q{pts[i].z, -1};
            accm = grid_.back().A + abel_between(grid_.back().p, q);
            grid_.push_back({q, accm});
        }
    }

    std::vector<Loop> raw_a_, raw_c_;
    Eigen::VectorXi chosen_sigma_;
    Eigen::MatrixXi chosen_M_;
    Eigen::PartialPivLU<Eigen::MatrixXd> imB_solver_;
    VecC abel_iota_basepoint_, canonical_class_abel_;
    std::vector<GridPoint> grid_;
};

}  // namespace hsov

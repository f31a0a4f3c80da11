#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hsov/curve.hpp"

namespace hsov {

using VecC = Eigen::VectorXcd;

/// A point being continued along a path: base coordinate plus the current
/// value of y, which selects the sheet by continuity.
struct Tracked {
    cplx z;
    cplx y;
};

/// Integrand in the dz chart: (z, y) -> vector of densities h with
/// integral = int h dz. Vector-valued so that all g holomorphic
/// differentials (or any family) integrate in one pass.
using VecIntegrand = std::function<VecC(cplx, cplx)>;

namespace detail {
// 15-point Gauss-Legendre rule on [-1, 1].
inline const double kGLx[15] = {
    -0.9879925180204854, -0.9372733924007059, -0.8482065834104272, -0.7244177313601700,
    -0.5709721726085388, -0.3941513470775634, -0.2011940939974345, 0.0,
    0.2011940939974345,  0.3941513470775634,  0.5709721726085388,  0.7244177313601700,
    0.8482065834104272,  0.9372733924007059,  0.9879925180204854};
inline const double kGLw[15] = {
    0.0307532419961173, 0.0703660474881081, 0.1071592204671719, 0.1395706779261543,
    0.1662692058169939, 0.1861610000155622, 0.1984314853271116, 0.2025782419255613,
    0.1984314853271116, 0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
    0.1071592204671719, 0.0703660474881081, 0.0307532419961173};
}  // namespace detail

/// Sheet-tracked path integration on the curve y^2 = f(z). All paths are
/// polylines in the z-plane kept clear of branch points; y is continued in
/// small steps so the square-root branch is always unambiguous.
class PathEngine {
  public:
    explicit PathEngine(const HyperellipticCurve& c, double tol = 1e-12)
        : C_(&c), tol_(tol) {}

    const HyperellipticCurve& curve() const { return *C_; }

    /// Continue (z, y) to the target base point in steps bounded by the
    /// distance to the nearest branch point.
    Tracked advance(Tracked t, cplx target) const {
        int guard = 0;
        while (t.z != target) {
            double clear = C_->dist_to_branch(t.z);
            double remaining = std::abs(target - t.z);
            double near_end = C_->dist_to_branch(target);
            if (clear < 1e-12 || near_end < 1e-12) throw Error("path degenerate");
            double step = 0.2 * std::min(clear, near_end + remaining);
            if (remaining <= step) {
                t.y = C_->y_near(target, t.y);
                t.z = target;
                break;
            }
            cplx zn = t.z + (target - t.z) * (step / remaining);
            t.y = C_->y_near(zn, t.y);
            t.z = zn;
            if (++guard > 100000) throw Error("path degenerate");
        }
        return t;
    }

    /// Integral along the straight segment from the anchor to zb; the anchor
    /// is moved to (zb, continued y).
    VecC integrate_segment(Tracked& a, cplx zb, const VecIntegrand& h, int dim) const {
        VecC total = VecC::Zero(dim);
        segment_adaptive(a, zb, h, total, tol_, 0);
        a = advance(a, zb);
        return total;
    }

    /// Integral along a polyline; anchor is continued to the final vertex.
    VecC integrate(const std::vector<cplx>& pts, Tracked& anchor, const VecIntegrand& h,
                   int dim) const {
        VecC total = VecC::Zero(dim);
        for (cplx p : pts) total += integrate_segment(anchor, p, h, dim);
        return total;
    }

    /// Integral from a branch point e to b, where y(b) = yb fixes the sheet
    /// near the endpoint. Uses the substitution z = e + s^2 (b - e), which
    /// removes the square-root singularity of densities ~ 1/y.
    VecC integrate_from_branch(cplx e, cplx b, cplx yb, const VecIntegrand& h, int dim) const {
        // y restricted to the sub-path, continued in the parameter s.
        auto y_of_s = [&](double s, double s_ref, cplx y_ref) {
            // walk from s_ref to s in relative steps to keep the branch safe
            double cur = s_ref;
            cplx y = y_ref;
            int guard = 0;
            while (std::abs(cur - s) > 1e-16) {
                double step = 0.15 * std::max(cur, s);
                double nxt = (s > cur) ? std::min(s, cur + step) : std::max(s, cur - step);
                y = C_->y_near(e + nxt * nxt * (b - e), y);
                cur = nxt;
                if (++guard > 10000) throw Error("path degenerate");
            }
            return y;
        };
        VecC total = VecC::Zero(dim);
        // adaptive bisection in s over [0, 1], anchored at s = 1
        struct Frame {
            double s0, s1;
            cplx y1;  // y at s1
        };
        std::vector<Frame> stack{{0.0, 1.0, yb}};
        int guard = 0;
        while (!stack.empty()) {
            Frame f = stack.back();
            stack.pop_back();
            VecC whole = branch_panel(e, b, f.s0, f.s1, f.y1, y_of_s, h, dim);
            double smid = 0.5 * (f.s0 + f.s1);
            cplx ymid = y_of_s(smid, f.s1, f.y1);
            VecC lo = branch_panel(e, b, f.s0, smid, ymid, y_of_s, h, dim);
            VecC hi = branch_panel(e, b, smid, f.s1, f.y1, y_of_s, h, dim);
            double err = (whole - lo - hi).cwiseAbs().maxCoeff();
            if (err < tol_ || (f.s1 - f.s0) < 1e-10) {
                total += lo + hi;
            } else {
                stack.push_back({f.s0, smid, ymid});
                stack.push_back({smid, f.s1, f.y1});
            }
            if (++guard > 20000) throw Error("period integration failed");
        }
        return total;
    }

    /// Integral around a closed polyline (loop). The loop must enclose an
    /// even number of branch points so y returns to its start value; this is
    /// asserted. Starts on the sheet of y0 at pts.front().
    VecC integrate_loop(const std::vector<cplx>& pts, cplx y0, const VecIntegrand& h,
                        int dim) const {
        Tracked a{pts.front(), y0};
        VecC total = VecC::Zero(dim);
        for (size_t i = 1; i < pts.size(); ++i) total += integrate_segment(a, pts[i], h, dim);
        total += integrate_segment(a, pts.front(), h, dim);
        if (std::abs(a.y - y0) > 1e-6 * (1.0 + std::abs(y0)))
            throw Error("period integration failed");
        return total;
    }

  private:
    VecC panel(Tracked a, cplx zb, const VecIntegrand& h, int dim) const {
        cplx d = zb - a.z;
        VecC acc = VecC::Zero(dim);
        Tracked cur = a;
        for (int k = 0; k < 15; ++k) {
            double t = 0.5 * (detail::kGLx[k] + 1.0);
            cur = advance(cur, a.z + t * d);
            acc += (0.5 * detail::kGLw[k] * d) * h(cur.z, cur.y);
        }
        return acc;
    }

    void segment_adaptive(Tracked a, cplx zb, const VecIntegrand& h, VecC& total, double tol,
                          int depth) const {
        VecC whole = panel(a, zb, h, total.size());
        cplx zm = 0.5 * (a.z + zb);
        VecC lo = panel(a, zm, h, total.size());
        Tracked am = advance(a, zm);
        VecC hi = panel(am, zb, h, total.size());
        double err = (whole - lo - hi).cwiseAbs().maxCoeff();
        if (err < tol || depth >= 28) {
            if (depth >= 28 && err > 1e4 * tol) throw Error("period integration failed");
            total += lo + hi;
            return;
        }
        segment_adaptive(a, zm, h, total, 0.5 * tol, depth + 1);
        segment_adaptive(am, zb, h, total, 0.5 * tol, depth + 1);
    }

    template <class YofS>
    VecC branch_panel(cplx e, cplx b, double s0, double s1, cplx y1, const YofS& y_of_s,
                      const VecIntegrand& h, int dim) const {
        VecC acc = VecC::Zero(dim);
        double sref = s1;
        cplx yref = y1;
        for (int k = 14; k >= 0; --k) {  // descend from s1 towards s0
            double s = s0 + 0.5 * (detail::kGLx[k] + 1.0) * (s1 - s0);
            cplx y = y_of_s(s, sref, yref);
            sref = s;
            yref = y;
            cplx z = e + s * s * (b - e);
            acc += (0.5 * detail::kGLw[k] * (s1 - s0)) * (2.0 * s * (b - e)) * h(z, y);
        }
        return acc;
    }

    const HyperellipticCurve* C_;
    double tol_;
};

/// Polyline router: straight path from a to b with detours around branch
/// points that come closer than the clearance.
inline void route_segment(const HyperellipticCurve& C, cplx a, cplx b, double clearance,
                          std::vector<cplx>& out, int depth = 0) {
    if (depth > 12) throw Error("path degenerate");
    cplx d = b - a;
    double len = std::abs(d);
    if (len < 1e-15) {
        out.push_back(b);
        return;
    }
    double worst = 1e300;
    cplx worst_w{0, 0};
    bool found = false;
    for (cplx e : C.branch_points()) {
        double t = std::clamp((std::conj(d) * (e - a)).real() / (len * len), 0.0, 1.0);
        cplx proj = a + t * d;
        double dist = std::abs(e - proj);
        double local = std::min({clearance, 0.7 * std::abs(e - a), 0.7 * std::abs(e - b)});
        if (dist < local && dist < worst) {
            worst = dist;
            cplx n = (e - proj);
            cplx dir = d / len;
            cplx normal = cplx(-dir.imag(), dir.real());
            // push the waypoint to the side the path already favors
            if (std::abs(n) > 1e-12 && (std::conj(normal) * n).real() > 0) normal = -normal;
            worst_w = e + normal * (1.25 * local);
            found = true;
        }
    }
    if (!found) {
        out.push_back(b);
        return;
    }
    route_segment(C, a, worst_w, clearance, out, depth + 1);
    route_segment(C, worst_w, b, clearance, out, depth + 1);
}

inline std::vector<cplx> route_path(const HyperellipticCurve& C, cplx a, cplx b,
                                    double clearance) {
    std::vector<cplx> out{a};
    route_segment(C, a, b, clearance, out);
    return out;
}

/// Closed circle polyline around a single point.
inline std::vector<cplx> circle_polyline(cplx center, double radius, int n = 24,
                                         double phase0 = 0.0) {
    std::vector<cplx> pts;
    pts.reserve(n);
    for (int k = 0; k < n; ++k) {
        double t = phase0 + 2 * kPi * k / n;
        pts.push_back(center + radius * cplx(std::cos(t), std::sin(t)));
    }
    return pts;
}

}  // namespace hsov

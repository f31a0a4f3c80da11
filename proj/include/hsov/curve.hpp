#pragma once

#include <algorithm>

#include "hsov/polynomial.hpp"
#include "hsov/types.hpp"

namespace hsov {

/// Hyperelliptic curve X : y^2 = f(z), deg f = 2g+1 or 2g+2, simple roots.
class HyperellipticCurve {
  public:
    HyperellipticCurve(std::vector<cplx> f_coeffs, double root_separation = 1e-8)
        : f_(Poly(std::move(f_coeffs))) {
        int deg = f_.degree();
        if (deg < 5) throw Error("degenerate curve: deg f < 5 gives genus < 2");
        genus_ = (deg - 1) / 2;
        branch_ = poly_roots(f_);
        for (auto& r : branch_) r = polish_root(f_, r);
        // deterministic ordering: by argument about the centroid, then modulus
        cplx c0{0, 0};
        for (auto b : branch_) c0 += b;
        c0 /= double(branch_.size());
        centroid_ = c0;
        std::sort(branch_.begin(), branch_.end(), [c0](cplx a, cplx b) {
            double aa = std::arg(a - c0), ab = std::arg(b - c0);
            if (std::abs(aa - ab) > 1e-12) return aa < ab;
            return std::abs(a - c0) < std::abs(b - c0);
        });
        double sep = 1e300;
        for (size_t i = 0; i < branch_.size(); ++i)
            for (size_t j = i + 1; j < branch_.size(); ++j)
                sep = std::min(sep, std::abs(branch_[i] - branch_[j]));
        min_sep_ = sep;
        if (sep < root_separation) throw Error("degenerate curve");
    }

    const Poly& f() const { return f_; }
    int genus() const { return genus_; }
    const std::vector<cplx>& branch_points() const { return branch_; }
    double min_branch_separation() const { return min_sep_; }
    cplx centroid() const { return centroid_; }
    bool even_model() const { return f_.degree() % 2 == 0; }

    double dist_to_branch(cplx z) const {
        double d = 1e300;
        for (cplx b : branch_) d = std::min(d, std::abs(z - b));
        return d;
    }

    bool is_branch_point(cplx z, double tol = 1e-9) const { return dist_to_branch(z) < tol; }

    /// y on the sheet closest to a reference value (sheet continuation step).
    cplx y_near(cplx z, cplx y_ref) const {
        cplx y = std::sqrt(f_.eval(z));
        return (std::abs(y - y_ref) <= std::abs(-y - y_ref)) ? y : -y;
    }

    /// Sheet convention: sheet +1 carries the principal square root of f.
    cplx y_of(const SurfacePoint& p) const {
        cplx y = std::sqrt(f_.eval(p.z));
        return p.sheet > 0 ? y : -y;
    }

    /// Sheet of a given (z, y) pair under the principal-root convention.
    int sheet_of(cplx z, cplx y) const {
        cplx yp = std::sqrt(f_.eval(z));
        return (std::abs(y - yp) <= std::abs(y + yp)) ? +1 : -1;
    }

    void require_off_branch(const SurfacePoint& p, double tol = 1e-7) const {
        if (dist_to_branch(p.z) < tol) throw Error("point too close to a branch point");
    }

  private:
    Poly f_;
    int genus_;
    std::vector<cplx> branch_;
    double min_sep_ = 0;
    cplx centroid_;
};

}  // namespace hsov

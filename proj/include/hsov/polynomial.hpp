#pragma once

#include <Eigen/Dense>

#include "hsov/types.hpp"

namespace hsov {

/// Dense complex polynomial, coefficients in ascending order.
class Poly {
  public:
    Poly() : c_(1, cplx(0)) {}
    explicit Poly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.assign(1, cplx(0));
        trim();
    }
    static Poly constant(cplx v) { return Poly({v}); }
    static Poly monomial(int k, cplx v = 1.0) {
        std::vector<cplx> c(k + 1, cplx(0));
        c[k] = v;
        return Poly(std::move(c));
    }
    static Poly from_roots(const std::vector<cplx>& roots) {
        Poly p({cplx(1)});
        for (cplx r : roots) p = p * Poly({-r, cplx(1)});
        return p;
    }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    const std::vector<cplx>& coeffs() const { return c_; }
    cplx operator[](int k) const { return k < static_cast<int>(c_.size()) ? c_[k] : cplx(0); }

    cplx eval(cplx z) const {
        cplx acc = 0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
        return acc;
    }
    Poly derivative() const {
        if (c_.size() <= 1) return Poly();
        std::vector<cplx> d(c_.size() - 1);
        for (size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * cplx(double(k));
        return Poly(std::move(d));
    }

    friend Poly operator*(const Poly& a, const Poly& b) {
        std::vector<cplx> c(a.c_.size() + b.c_.size() - 1, cplx(0));
        for (size_t i = 0; i < a.c_.size(); ++i)
            for (size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
        return Poly(std::move(c));
    }
    friend Poly operator+(const Poly& a, const Poly& b) {
        std::vector<cplx> c(std::max(a.c_.size(), b.c_.size()), cplx(0));
        for (size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
        for (size_t i = 0; i < b.c_.size(); ++i) c[i] += b.c_[i];
        return Poly(std::move(c));
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        std::vector<cplx> c(std::max(a.c_.size(), b.c_.size()), cplx(0));
        for (size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
        for (size_t i = 0; i < b.c_.size(); ++i) c[i] -= b.c_[i];
        return Poly(std::move(c));
    }
    friend Poly operator*(cplx s, const Poly& a) {
        std::vector<cplx> c = a.c_;
        for (auto& v : c) v *= s;
        return Poly(std::move(c));
    }

    double max_abs_coeff() const {
        double m = 0;
        for (auto v : c_) m = std::max(m, std::abs(v));
        return m;
    }

  private:
    void trim() {
        while (c_.size() > 1 && std::abs(c_.back()) == 0.0) c_.pop_back();
    }
    std::vector<cplx> c_;
};

/// All complex roots via the companion-matrix eigenproblem.
inline std::vector<cplx> poly_roots(const Poly& p) {
    int n = p.degree();
    while (n > 0 && std::abs(p[n]) < 1e-14 * p.max_abs_coeff()) --n;
    if (n <= 0) return {};
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) C(i, n - 1) = -p[i] / p[n];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
    std::vector<cplx> roots(n);
    for (int i = 0; i < n; ++i) roots[i] = es.eigenvalues()(i);
    return roots;
}

/// Newton-polish a simple root of p near z0.
inline cplx polish_root(const Poly& p, cplx z0, int iters = 12) {
    Poly dp = p.derivative();
    cplx z = z0;
    for (int k = 0; k < iters; ++k) {
        cplx d = dp.eval(z);
        if (std::abs(d) == 0.0) break;
        cplx step = p.eval(z) / d;
        z -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) break;
    }
    return z;
}

/// Winding number of p along the boundary of an axis-aligned box, by adaptive
/// argument tracking. Box edges must avoid roots.
inline int winding_number_box(const Poly& p, cplx lo, cplx hi) {
    std::vector<cplx> corners = {lo, {hi.real(), lo.imag()}, hi, {lo.real(), hi.imag()}, lo};
    double total = 0.0;
    for (int e = 0; e < 4; ++e) {
        cplx a = corners[e], b = corners[e + 1];
        int n = 32;
        bool ok = false;
        while (!ok && n <= 65536) {
            double acc = 0.0;
            cplx prev = p.eval(a);
            ok = true;
            for (int k = 1; k <= n; ++k) {
                cplx z = a + (b - a) * (double(k) / n);
                cplx cur = p.eval(z);
                if (std::abs(cur) == 0.0) throw Error("winding: root on contour");
                double d = std::arg(cur / prev);
                if (std::abs(d) > 2.5) {  // phase step too coarse, refine
                    ok = false;
                    break;
                }
                acc += d;
                prev = cur;
            }
            if (ok) total += acc;
            n *= 2;
        }
        if (!ok) throw Error("winding: contour too close to a root");
    }
    return static_cast<int>(std::lround(total / (2 * kPi)));
}

/// Certified simple roots of p inside a box: companion-matrix roots polished,
/// then each validated by a unit winding number on a small surrounding box,
/// with the global count checked by the argument principle on the big box.
inline std::vector<cplx> certified_roots_in_box(const Poly& p, cplx lo, cplx hi,
                                                double isolation = 1e-6) {
    auto all = poly_roots(p);
    std::vector<cplx> in;
    for (cplx r : all) {
        r = polish_root(p, r);
        if (r.real() > lo.real() && r.real() < hi.real() && r.imag() > lo.imag() &&
            r.imag() < hi.imag())
            in.push_back(r);
    }
    int expected = winding_number_box(p, lo, hi);
    if (expected != static_cast<int>(in.size()))
        throw Error("argument-principle count mismatch in root certification");
    for (cplx r : in) {
        cplx d{isolation, isolation};
        int w = winding_number_box(p, r - d, r + d);
        if (w != 1) throw Error("root not simple or not isolated at requested scale");
    }
    return in;
}

}  // namespace hsov

#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsov {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline const cplx kI{0.0, 1.0};

/// Errors carry the exact diagnostic strings used throughout the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A point on the curve y^2 = f(z): base coordinate plus the sheet sign
/// selecting the branch of y. Branch points are excluded everywhere.
struct SurfacePoint {
    cplx z;
    int sheet = +1;  // +1 or -1

    friend bool operator==(const SurfacePoint& a, const SurfacePoint& b) {
        return a.z == b.z && a.sheet == b.sheet;
    }
};

inline SurfacePoint involution(const SurfacePoint& p) { return {p.z, -p.sheet}; }

/// Formal sum of surface points with integer multiplicities.
struct Divisor {
    std::vector<std::pair<SurfacePoint, int>> entries;

    Divisor() = default;
    Divisor(std::initializer_list<std::pair<SurfacePoint, int>> e) : entries(e) {}

    static Divisor of_points(const std::vector<SurfacePoint>& pts, int mult = 1) {
        Divisor d;
        for (const auto& p : pts) d.entries.emplace_back(p, mult);
        return d;
    }

    int degree() const {
        int s = 0;
        for (const auto& [p, m] : entries) s += m;
        return s;
    }
    bool effective() const {
        for (const auto& [p, m] : entries)
            if (m <= 0) return false;
        return true;
    }
    std::vector<SurfacePoint> points() const {
        std::vector<SurfacePoint> out;
        for (const auto& [p, m] : entries) out.push_back(p);
        return out;
    }
    /// Expands to a flat point list, repeating each point |multiplicity| times.
    std::vector<SurfacePoint> expanded() const {
        std::vector<SurfacePoint> out;
        for (const auto& [p, m] : entries)
            for (int k = 0; k < std::abs(m); ++k) out.push_back(p);
        return out;
    }
    void add(const SurfacePoint& p, int m) { entries.emplace_back(p, m); }

    /// Minimal pairwise z-distance over all support points (multiplicity-free check).
    double min_separation() const {
        double best = 1e300;
        for (size_t i = 0; i < entries.size(); ++i)
            for (size_t j = i + 1; j < entries.size(); ++j) {
                double d = std::abs(entries[i].first.z - entries[j].first.z);
                if (entries[i].first.sheet != entries[j].first.sheet) d += 1e-300;
                if (entries[i].first.sheet == entries[j].first.sheet)
                    best = std::min(best, d);
            }
        return best;
    }
};

struct NumericConfig {
    double quad_tol = 1e-12;        // absolute tolerance for path quadrature
    double root_separation = 1e-8;  // minimal branch-point separation
    int theta_radius = 8;           // lattice truncation radius
    double theta_tol = 1e-13;       // requested tail bound for theta sums
    double rank_tol = 1e-8;         // relative singular-value cutoff
};

}  // namespace hsov

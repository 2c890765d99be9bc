#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sbmp/errors.hpp"

namespace sbmp::envs {

// Natural cubic spline through waypoints, chord-length parameterized.
struct CubicSpline {
    int n = 0, d = 0;
    std::vector<double> knots;   // cumulative chord length, strictly increasing
    std::vector<double> pts;     // n x d
    std::vector<double> second;  // second derivatives at knots, n x d

    static CubicSpline fit(const std::vector<double>& raw_pts, int n_raw, int d) {
        // drop consecutive duplicates so knots stay strictly increasing
        std::vector<double> pts;
        pts.reserve(raw_pts.size());
        for (int i = 0; i < n_raw; ++i) {
            if (i > 0) {
                double dist = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double diff = raw_pts[static_cast<std::size_t>(i) * d + j] - pts[pts.size() - d + j];
                    dist += diff * diff;
                }
                if (std::sqrt(dist) < 1e-12) continue;
            }
            for (int j = 0; j < d; ++j) pts.push_back(raw_pts[static_cast<std::size_t>(i) * d + j]);
        }
        const int n = static_cast<int>(pts.size()) / d;
        if (n < 2) throw invalid_input_error("spline needs at least two distinct points");

        CubicSpline s;
        s.n = n;
        s.d = d;
        s.pts = std::move(pts);
        s.knots.resize(n);
        s.knots[0] = 0.0;
        for (int i = 1; i < n; ++i) {
            double dist = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = s.pts[static_cast<std::size_t>(i) * d + j] -
                                    s.pts[static_cast<std::size_t>(i - 1) * d + j];
                dist += diff * diff;
            }
            s.knots[i] = s.knots[i - 1] + std::sqrt(dist);
        }
        s.second.assign(static_cast<std::size_t>(n) * d, 0.0);
        if (n == 2) return s;

        // tridiagonal solve per dimension with natural end conditions
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), rhs(n, 0.0), scratch(n, 0.0);
        for (int j = 0; j < d; ++j) {
            for (int i = 1; i + 1 < n; ++i) {
                const double h0 = s.knots[i] - s.knots[i - 1];
                const double h1 = s.knots[i + 1] - s.knots[i];
                a[i] = h0 / 6.0;
                b[i] = (h0 + h1) / 3.0;
                c[i] = h1 / 6.0;
                const double y0 = s.pts[static_cast<std::size_t>(i - 1) * d + j];
                const double y1 = s.pts[static_cast<std::size_t>(i) * d + j];
                const double y2 = s.pts[static_cast<std::size_t>(i + 1) * d + j];
                rhs[i] = (y2 - y1) / h1 - (y1 - y0) / h0;
            }
            // forward sweep over interior rows
            for (int i = 2; i + 1 < n; ++i) {
                const double w = a[i] / b[i - 1];
                b[i] -= w * c[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for (int i = n - 2; i >= 1; --i) {
                scratch[i] = (rhs[i] - (i + 1 < n - 1 ? c[i] * scratch[i + 1] : 0.0)) / b[i];
            }
            for (int i = 1; i + 1 < n; ++i) s.second[static_cast<std::size_t>(i) * d + j] = scratch[i];
        }
        return s;
    }

    double total_knot() const { return knots[n - 1]; }

    void eval(double u, double* out) const {
        if (u <= 0.0) u = 0.0;
        if (u >= total_knot()) u = total_knot();
        int lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (knots[mid] <= u)
                lo = mid;
            else
                hi = mid;
        }
        const double h = knots[hi] - knots[lo];
        const double t1 = (knots[hi] - u) / h;
        const double t2 = (u - knots[lo]) / h;
        for (int j = 0; j < d; ++j) {
            const double y0 = pts[static_cast<std::size_t>(lo) * d + j];
            const double y1 = pts[static_cast<std::size_t>(hi) * d + j];
            const double m0 = second[static_cast<std::size_t>(lo) * d + j];
            const double m1 = second[static_cast<std::size_t>(hi) * d + j];
            out[j] = t1 * y0 + t2 * y1 +
                     ((t1 * t1 * t1 - t1) * m0 + (t2 * t2 * t2 - t2) * m1) * h * h / 6.0;
        }
    }
};

// One round of Chaikin corner cutting; endpoints are preserved.
inline std::vector<double> chaikin(const std::vector<double>& pts, int n, int d) {
    if (n < 3) return pts;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * n) * d);
    for (int j = 0; j < d; ++j) out.push_back(pts[j]);
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j < d; ++j)
            out.push_back(0.75 * pts[static_cast<std::size_t>(i) * d + j] +
                          0.25 * pts[static_cast<std::size_t>(i + 1) * d + j]);
        for (int j = 0; j < d; ++j)
            out.push_back(0.25 * pts[static_cast<std::size_t>(i) * d + j] +
                          0.75 * pts[static_cast<std::size_t>(i + 1) * d + j]);
    }
    for (int j = 0; j < d; ++j) out.push_back(pts[static_cast<std::size_t>(n - 1) * d + j]);
    return out;
}

// Quintic time scaling with zero boundary velocity and acceleration.
inline double min_jerk_fraction(double tau) {
    const double t3 = tau * tau * tau;
    return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

// Samples a spline at L positions following the min-jerk arc-length profile.
inline std::vector<double> sample_min_jerk(const CubicSpline& spline, int length, double* total_arc = nullptr) {
    const int dense = std::max(2048, 8 * length);
    const int d = spline.d;
    std::vector<double> dense_pts(static_cast<std::size_t>(dense) * d);
    std::vector<double> arc(dense, 0.0);
    for (int i = 0; i < dense; ++i) {
        const double u = spline.total_knot() * i / (dense - 1);
        spline.eval(u, &dense_pts[static_cast<std::size_t>(i) * d]);
        if (i > 0) {
            double seg = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = dense_pts[static_cast<std::size_t>(i) * d + j] -
                                    dense_pts[static_cast<std::size_t>(i - 1) * d + j];
                seg += diff * diff;
            }
            arc[i] = arc[i - 1] + std::sqrt(seg);
        }
    }
    const double S = arc[dense - 1];
    if (total_arc) *total_arc = S;
    std::vector<double> out(static_cast<std::size_t>(length) * d);
    int cursor = 0;
    for (int i = 0; i < length; ++i) {
        const double target = S * min_jerk_fraction(static_cast<double>(i) / (length - 1));
        while (cursor + 1 < dense - 1 && arc[cursor + 1] < target) ++cursor;
        const double lo = arc[cursor], hi = arc[cursor + 1];
        const double f = hi > lo ? (target - lo) / (hi - lo) : 0.0;
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(i) * d + j] =
                (1.0 - f) * dense_pts[static_cast<std::size_t>(cursor) * d + j] +
                f * dense_pts[static_cast<std::size_t>(cursor + 1) * d + j];
    }
    return out;
}

}  // namespace sbmp::envs

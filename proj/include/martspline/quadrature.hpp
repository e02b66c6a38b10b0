#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace martspline {

/// Gauss–Legendre rule with g points on [-1, 1]; exact for degree <= 2g-1.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int g) {
        if (g < 1) throw std::invalid_argument("GaussLegendre: need at least one point");
        nodes.resize(g);
        weights.resize(g);
        for (int i = 0; i < (g + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (g + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                // Legendre recurrence for P_g(x) and its derivative
                double p0 = 1.0, p1 = x;
                for (int n = 2; n <= g; ++n) {
                    double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
                    p0 = p1;
                    p1 = p2;
                }
                dp = g * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            // recompute derivative at the converged node
            double p0 = 1.0, p1 = x;
            for (int n = 2; n <= g; ++n) {
                double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
                p0 = p1;
                p1 = p2;
            }
            dp = g * (x * p1 - p0) / (x * x - 1.0);
            double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[g - 1 - i] = x;
            weights[i] = w;
            weights[g - 1 - i] = w;
        }
        if (g % 2 == 1) nodes[g / 2] = 0.0;
    }

    int size() const { return static_cast<int>(nodes.size()); }

    /// Node mapped to [lo, hi].
    double node(int q, double lo, double hi) const {
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[q];
    }
    double weight(int q, double lo, double hi) const { return 0.5 * (hi - lo) * weights[q]; }
};

/// Chebyshev extrema (second kind) on [lo, hi], including both endpoints.
inline std::vector<double> chebyshev_lobatto(int count, double lo, double hi) {
    std::vector<double> pts;
    if (count <= 1) {
        pts.push_back(0.5 * (lo + hi));
        return pts;
    }
    pts.reserve(count);
    for (int j = count - 1; j >= 0; --j) {
        double c = std::cos(std::numbers::pi * j / (count - 1));
        pts.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * c);
    }
    pts.front() = lo;
    pts.back() = hi;
    return pts;
}

}  // namespace martspline

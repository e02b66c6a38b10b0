#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace martspline {

/// Symmetric positive definite band matrix with in-place Cholesky factorization.
///
/// Only the lower band is stored: row i holds columns i-p .. i.
class BandedSPD {
public:
    BandedSPD() = default;
    BandedSPD(int n, int bandwidth)
        : n_(n), p_(bandwidth), band_(static_cast<std::size_t>(n) * (bandwidth + 1), 0.0) {}

    int size() const { return n_; }
    int bandwidth() const { return p_; }
    bool factorized() const { return factorized_; }

    /// Entry (i, j) of the matrix (or of L once factorized); requires |i-j| <= p.
    double& lower(int i, int j) { return band_[index(i, j)]; }
    double lower(int i, int j) const { return band_[index(i, j)]; }

    double entry(int i, int j) const {
        if (j > i) std::swap(i, j);
        if (i - j > p_) return 0.0;
        return band_[index(i, j)];
    }

    void add_symmetric(int i, int j, double v) {
        if (j > i) std::swap(i, j);
        band_[index(i, j)] += v;
    }

    /// y = A x (only valid before factorization).
    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int j = std::max(0, i - p_); j <= i; ++j) {
                double a = band_[index(i, j)];
                y[i] += a * x[j];
                if (j != i) y[j] += a * x[i];
            }
        return y;
    }

    /// Returns 0 on success, otherwise 1 + the failing row.
    int factorize() {
        for (int i = 0; i < n_; ++i) {
            const int j0 = std::max(0, i - p_);
            for (int j = j0; j <= i; ++j) {
                double s = band_[index(i, j)];
                for (int r = std::max(j0, j - p_); r < j; ++r) s -= band_[index(i, r)] * band_[index(j, r)];
                if (j == i) {
                    if (!(s > 0.0)) return i + 1;
                    band_[index(i, i)] = std::sqrt(s);
                } else {
                    band_[index(i, j)] = s / band_[index(j, j)];
                }
            }
        }
        factorized_ = true;
        return 0;
    }

    /// Solves A x = b in place using the factorization.
    void solve(std::span<double> b) const {
        if (!factorized_) throw std::logic_error("BandedSPD::solve before factorize");
        for (int i = 0; i < n_; ++i) {
            double s = b[i];
            for (int r = std::max(0, i - p_); r < i; ++r) s -= band_[index(i, r)] * b[r];
            b[i] = s / band_[index(i, i)];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = b[i];
            for (int r = i + 1; r <= std::min(n_ - 1, i + p_); ++r) s -= band_[index(r, i)] * b[r];
            b[i] = s / band_[index(i, i)];
        }
    }

    /// Strided variant for tensor fibers.
    void solve_strided(double* b, std::size_t stride) const {
        if (!factorized_) throw std::logic_error("BandedSPD::solve before factorize");
        for (int i = 0; i < n_; ++i) {
            double s = b[i * stride];
            for (int r = std::max(0, i - p_); r < i; ++r) s -= band_[index(i, r)] * b[r * stride];
            b[i * stride] = s / band_[index(i, i)];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = b[i * stride];
            for (int r = i + 1; r <= std::min(n_ - 1, i + p_); ++r) s -= band_[index(r, i)] * b[r * stride];
            b[i * stride] = s / band_[index(i, i)];
        }
    }

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * (p_ + 1) + static_cast<std::size_t>(j - i + p_);
    }

    int n_ = 0;
    int p_ = 0;
    std::vector<double> band_;
    bool factorized_ = false;
};

}  // namespace martspline

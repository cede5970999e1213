#pragma once

#include <robustcg/types.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace robustcg {

// Orthonormal discrete Haar basis on R^d, d a power of two.
//
// Ordering: index 0 is the scaling vector 1/sqrt(d); index 2^l + k (l >= 0,
// 0 <= k < 2^l) is the k-th wavelet of level l, supported on a block of
// length L = d / 2^l starting at k*L, equal to +1/sqrt(L) on the first half
// and -1/sqrt(L) on the second.

inline bool is_power_of_two(Index d) noexcept
{
    return d >= 1 && (d & (d - 1)) == 0;
}

inline void require_haar_dim(Index d)
{
    if (d < 2 || !is_power_of_two(d)) {
        throw ParameterError("Haar basis requires a power-of-two dimension >= 2 (got " + std::to_string(d) + ")");
    }
}

struct HaarSupport {
    Index begin = 0;
    Index half = 0; // length of each signed half; scaling vector uses half == d
    double value = 0.0;
    bool scaling = false;
};

inline HaarSupport haar_support(Index d, Index j)
{
    if (j == 0) {
        return {0, d, 1.0 / std::sqrt(static_cast<double>(d)), true};
    }
    Index level = 0;
    while ((Index{2} << level) <= j) {
        ++level;
    }
    const Index k = j - (Index{1} << level);
    const Index length = d >> level;
    return {k * length, length / 2, 1.0 / std::sqrt(static_cast<double>(length)), false};
}

/// Dense Haar vector h_j.
inline Vector haar_vector(Index d, Index j)
{
    require_haar_dim(d);
    if (j < 0 || j >= d) {
        throw std::out_of_range("haar_vector: index out of range");
    }
    Vector h = Vector::Zero(d);
    const HaarSupport s = haar_support(d, j);
    if (s.scaling) {
        h.setConstant(s.value);
        return h;
    }
    h.segment(s.begin, s.half).setConstant(s.value);
    h.segment(s.begin + s.half, s.half).setConstant(-s.value);
    return h;
}

/// <h_j, g> in O(support) time.
inline double haar_inner(Index d, Index j, const double* g)
{
    const HaarSupport s = haar_support(d, j);
    double plus = 0.0;
    if (s.scaling) {
        for (Index i = 0; i < d; ++i) {
            plus += g[i];
        }
        return s.value * plus;
    }
    double minus = 0.0;
    for (Index i = 0; i < s.half; ++i) {
        plus += g[s.begin + i];
        minus += g[s.begin + s.half + i];
    }
    return s.value * (plus - minus);
}

/// Rows are h_0 .. h_{d-1}.
inline Matrix haar_basis_matrix(Index d)
{
    require_haar_dim(d);
    Matrix H(d, d);
    for (Index j = 0; j < d; ++j) {
        H.row(j) = haar_vector(d, j).transpose();
    }
    return H;
}

/// Fast analysis: coeffs[j] = <h_j, signal>, O(d). `work` is scratch of size d.
inline void haar_analysis(std::span<const double> signal, std::span<double> coeffs, std::vector<double>& work)
{
    const auto d = static_cast<Index>(signal.size());
    work.assign(signal.begin(), signal.end());
    const double r = 1.0 / std::sqrt(2.0);
    // Finest level first: level l wavelets occupy coeffs[2^l, 2^(l+1)).
    for (Index len = d; len >= 2; len /= 2) {
        const Index half = len / 2;
        for (Index k = 0; k < half; ++k) {
            const double a = work[static_cast<std::size_t>(2 * k)];
            const double b = work[static_cast<std::size_t>(2 * k + 1)];
            coeffs[static_cast<std::size_t>(half + k)] = (a - b) * r;
            work[static_cast<std::size_t>(k)] = (a + b) * r;
        }
    }
    coeffs[0] = work[0];
}

} // namespace robustcg

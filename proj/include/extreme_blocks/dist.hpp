#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/model.hpp"
#include "extreme_blocks/normal.hpp"

namespace extreme_blocks {

/// Weights over the nodes of a path-sum matrix, aligned with `param.ids`.
struct StdfQuery {
    PathSumMatrix param;
    std::vector<double> weights;
};

/// A quadrature-backed value with its error estimate.
struct Estimate {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

/// Bivariate Husler-Reiss stdf with parameter delta2 = delta^2, including
/// the limits at zero coordinates and at delta2 = 0 (max) or infinity (sum).
inline double stdf_bivariate(double delta2, double x, double y) {
    if (x == 0.0 || y == 0.0) return x + y;
    if (delta2 == 0.0) return std::max(x, y);
    if (delta2 == std::numeric_limits<double>::infinity()) return x + y;
    const double delta = std::sqrt(delta2);
    const double r = std::log(x / y) / (2.0 * delta);
    return x * std_normal_cdf(delta + r) + y * std_normal_cdf(delta - r);
}

namespace detail {

inline void check_weights(const PathSumMatrix& p, const std::vector<double>& y) {
    if (p.values.rows() != p.values.cols() || static_cast<std::size_t>(p.values.rows()) != p.ids.size() ||
        y.size() != p.ids.size()) {
        throw Error(ErrorKind::DimensionMismatch, "weights and parameter matrix disagree in size");
    }
    for (double v : y) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::NonPositiveCoordinate, "stdf weights must be finite and nonnegative");
        }
    }
}

/// Stdf on the support of y; zero when y vanishes. Coordinates are taken in
/// identifier order so that the value does not depend on the input order.
inline Estimate stdf_support(const PathSumMatrix& p, const std::vector<double>& y, const MvnOptions& opts) {
    std::vector<std::size_t> w;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0) w.push_back(i);
    }
    std::sort(w.begin(), w.end(), [&](std::size_t a, std::size_t b) { return p.ids[a] < p.ids[b]; });
    if (w.empty()) return {0.0, 0.0, true};
    if (w.size() == 1) return {y[w[0]], 0.0, true};
    const auto pv = [&](std::size_t a, std::size_t b) {
        return p.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        lo = std::max(lo, y[w[i]]);
        hi += y[w[i]];
        for (std::size_t j = i + 1; j < w.size(); ++j) {
            const double v = pv(w[i], w[j]);
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw Error(ErrorKind::NonPositiveParam, "path sum between " + p.ids[w[i]] + " and " +
                                                             p.ids[w[j]] + " must be positive and finite");
            }
        }
    }
    if (w.size() == 2) return {stdf_bivariate(pv(w[0], w[1]), y[w[0]], y[w[1]]), 0.0, true};

    const auto k = static_cast<Eigen::Index>(w.size() - 1);
    Estimate out;
    for (std::size_t si = 0; si < w.size(); ++si) {
        const std::size_t s = w[si];
        Eigen::VectorXd upper(k);
        Eigen::MatrixXd psi(k, k);
        Eigen::Index a = 0;
        for (std::size_t vi = 0; vi < w.size(); ++vi) {
            if (vi == si) continue;
            const std::size_t v = w[vi];
            upper(a) = 2.0 * pv(v, s) + std::log(y[s] / y[v]);
            Eigen::Index b = 0;
            for (std::size_t ui = 0; ui < w.size(); ++ui) {
                if (ui == si) continue;
                psi(a, b) = 2.0 * (pv(s, v) + pv(s, w[ui]) - pv(v, w[ui]));
                ++b;
            }
            ++a;
        }
        const auto term = mvn_cdf(upper, psi, opts);
        out.value += y[s] * term.value;
        out.error += y[s] * term.error;
        out.converged = out.converged && term.converged;
    }
    out.value = std::clamp(out.value, lo, hi);
    return out;
}

inline std::vector<double> reciprocals(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) {
            throw Error(ErrorKind::NonPositiveCoordinate, "coordinates must be strictly positive");
        }
        out[i] = x[i] == std::numeric_limits<double>::infinity() ? 0.0 : 1.0 / x[i];
    }
    return out;
}

}  // namespace detail

/// Husler-Reiss stable tail dependence function
///
///   l(y) = sum_s y_s Phi_{|W|-1}(2 p_vs + ln(y_s / y_v), v in W \ s; Psi_{W,s}(P))
///
/// over the support W of y. Pairs use the closed form; larger supports call
/// mvn_cdf once per s, and the result is clipped to [max y, sum y].
inline Estimate stdf_hr(const StdfQuery& q, const MvnOptions& opts = {}) {
    detail::check_weights(q.param, q.weights);
    if (std::all_of(q.weights.begin(), q.weights.end(), [](double v) { return v == 0.0; })) {
        throw Error(ErrorKind::AllZeroWeights, "stdf weights are all zero");
    }
    return detail::stdf_support(q.param, q.weights, opts);
}

/// Max-stable Husler-Reiss CDF exp(-l(1/x)). Coordinates may be +infinity.
inline Estimate hr_cdf(const PathSumMatrix& p, const std::vector<double>& x, const MvnOptions& opts = {}) {
    const auto y = detail::reciprocals(x);
    detail::check_weights(p, y);
    const auto l = detail::stdf_support(p, y, opts);
    const double value = std::exp(-l.value);
    return {value, value * l.error, l.converged};
}

/// Multivariate Pareto CDF [l(max(1/z, 1)) - l(1/z)] / l(1, ..., 1),
/// clipped to [0, 1]. Coordinates may be +infinity.
inline Estimate pareto_cdf(const PathSumMatrix& p, const std::vector<double>& z, const MvnOptions& opts = {}) {
    const auto y = detail::reciprocals(z);
    detail::check_weights(p, y);
    std::vector<double> top(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) top[i] = std::max(y[i], 1.0);
    const auto norm = detail::stdf_support(p, std::vector<double>(y.size(), 1.0), opts);
    const auto upper = detail::stdf_support(p, top, opts);
    const auto lower = detail::stdf_support(p, y, opts);
    const double value = std::clamp((upper.value - lower.value) / norm.value, 0.0, 1.0);
    const double error = (upper.error + lower.error) / norm.value + value * norm.error / norm.value;
    return {value, error, norm.converged && upper.converged && lower.converged};
}

/// Stdf at the indicator vector of `subset`, a value in [1, |subset|].
///
/// Nodes joined by a zero path sum are merged first, which yields the
/// comonotone limit; a pair with an infinite path sum gives 2.
inline Estimate extremal_coefficient(const PathSumMatrix& p, const std::vector<std::string>& subset,
                                     const MvnOptions& opts = {}) {
    if (subset.size() < 2) {
        throw Error(ErrorKind::SubsetTooSmall, "extremal coefficient needs at least two nodes");
    }
    std::vector<std::string> ids = subset;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error(ErrorKind::SubsetTooSmall, "extremal coefficient subset has repeated nodes");
    }
    const auto sub = p.restrict(ids);
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        bool merged = false;
        for (const auto& k : kept) {
            if (sub(ids[i], k) == 0.0) merged = true;
        }
        if (!merged) kept.push_back(ids[i]);
    }
    if (kept.size() == 1) return {1.0, 0.0, true};
    const auto reduced = sub.restrict(kept);
    if (kept.size() == 2) return {stdf_bivariate(reduced.values(0, 1), 1.0, 1.0), 0.0, true};
    return detail::stdf_support(reduced, std::vector<double>(kept.size(), 1.0), opts);
}

inline Estimate extremal_coefficient(const DeltaFamily& d, const std::vector<std::string>& subset,
                                     const MvnOptions& opts = {}) {
    return extremal_coefficient(path_sum_matrix(d), subset, opts);
}

/// Largest tolerated gap between central differences at steps h and h / 2.
inline constexpr double kDerivativeTolerance = 1e-6;

using StdfFunction = std::function<double(const std::vector<double>&)>;

/// nu_1([0, x]) = d/dy_1 l(1, 1/x_2, ..., 1/x_d), the limit law of the other
/// coordinates scaled by the first given that the first is large.
///
/// Central differences with h = 1e-5 max(1, |arg|_inf) and h / 2 are
/// combined by Richardson extrapolation; the result is clipped to [0, 1].
/// Coordinates x_2, ... may be +infinity. Throws DifferentiationUnstable
/// when the two quotients disagree by more than kDerivativeTolerance.
inline double nu_from_stdf(const StdfFunction& ell, const std::vector<double>& x) {
    if (x.empty()) throw Error(ErrorKind::DimensionMismatch, "empty evaluation point");
    auto arg = detail::reciprocals(x);
    arg[0] = 1.0;
    const double scale = std::max(1.0, *std::max_element(arg.begin(), arg.end()));
    const auto quotient = [&](double h) {
        auto up = arg;
        auto down = arg;
        up[0] += h;
        down[0] -= h;
        return (ell(up) - ell(down)) / (2.0 * h);
    };
    const double h = 1e-5 * scale;
    const double coarse = quotient(h);
    const double fine = quotient(h / 2.0);
    if (!std::isfinite(coarse) || !std::isfinite(fine) || std::abs(coarse - fine) > kDerivativeTolerance) {
        throw Error(ErrorKind::DifferentiationUnstable,
                    "difference quotients " + std::to_string(coarse) + " and " + std::to_string(fine) +
                        " disagree");
    }
    return std::clamp((4.0 * fine - coarse) / 3.0, 0.0, 1.0);
}

/// Evaluator of stdf_hr on a fixed parameter matrix, for use with nu_from_stdf.
inline StdfFunction hr_stdf_function(PathSumMatrix p, MvnOptions opts = {}) {
    return [p = std::move(p), opts](const std::vector<double>& y) {
        detail::check_weights(p, y);
        return detail::stdf_support(p, y, opts).value;
    };
}

}  // namespace extreme_blocks

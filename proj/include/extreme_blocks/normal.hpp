#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "extreme_blocks/error.hpp"
#include "extreme_blocks/rng.hpp"

namespace extreme_blocks {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Inverse of std_normal_cdf on (0, 1); +-infinity at the end points.
/// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
inline double std_normal_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                 4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                 2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                 1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return q < 0.0 ? -value : value;
}

struct MvnOptions {
    double rel_tol = 1e-6;
    double abs_tol = 1e-15;
    std::uint64_t seed = 0x5eedULL;
    int randomizations = 12;
    std::size_t min_points = 1 << 9;
    std::size_t max_points = 1 << 20;  // per randomization
    std::size_t max_dimension = 25;
};

struct MvnResult {
    double value = 0.0;
    double error = 0.0;      // 3 x standard error across randomizations
    bool converged = true;   // false: tolerance not met within the point budget
    std::size_t points = 0;  // lattice points per randomization actually used
};

namespace detail {

inline const std::vector<double>& lattice_generators() {
    // square roots of the first primes, the Richtmyer generating vector
    static const std::vector<double> gens = [] {
        std::vector<double> out;
        for (int c = 2; out.size() < 64; ++c) {
            bool prime = true;
            for (int d = 2; d * d <= c; ++d) {
                if (c % d == 0) {
                    prime = false;
                    break;
                }
            }
            if (prime) out.push_back(std::sqrt(static_cast<double>(c)));
        }
        return out;
    }();
    return gens;
}

/// Cholesky factor of the covariance with the variables reordered so that
/// the most restrictive upper limits are integrated first.
struct OrderedProblem {
    Eigen::MatrixXd chol;
    Eigen::VectorXd upper;
};

inline OrderedProblem reorder_and_factor(Eigen::VectorXd upper, Eigen::MatrixXd cov) {
    const Eigen::Index d = upper.size();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index best = i;
        double best_prob = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = i; j < d; ++j) {
            double var = cov(j, j);
            double shift = 0.0;
            for (Eigen::Index k = 0; k < i; ++k) {
                var -= l(j, k) * l(j, k);
                shift += l(j, k) * expected(k);
            }
            if (var <= 0.0) throw Error(ErrorKind::NotPD, "covariance is not positive definite");
            const double prob = std_normal_cdf((upper(j) - shift) / std::sqrt(var));
            if (prob < best_prob) {
                best_prob = prob;
                best = j;
            }
        }
        if (best != i) {
            std::swap(upper(i), upper(best));
            cov.row(i).swap(cov.row(best));
            cov.col(i).swap(cov.col(best));
            l.row(i).swap(l.row(best));
        }
        double var = cov(i, i);
        double shift = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) {
            var -= l(i, k) * l(i, k);
            shift += l(i, k) * expected(k);
        }
        if (var <= 1e-14 * cov(i, i)) throw Error(ErrorKind::NotPD, "covariance is not positive definite");
        l(i, i) = std::sqrt(var);
        for (Eigen::Index k = i + 1; k < d; ++k) {
            double s = cov(k, i);
            for (Eigen::Index m = 0; m < i; ++m) s -= l(k, m) * l(i, m);
            l(k, i) = s / l(i, i);
        }
        const double b = (upper(i) - shift) / l(i, i);
        const double mass = std_normal_cdf(b);
        expected(i) = mass > 0.0 ? -std_normal_pdf(b) / mass : b;
    }
    return {std::move(l), std::move(upper)};
}

/// Separation-of-variables integrand over the unit cube of dimension d - 1.
inline double genz_integrand(const OrderedProblem& prob, const double* w, std::vector<double>& y) {
    const Eigen::Index d = prob.upper.size();
    double e = std_normal_cdf(prob.upper(0) / prob.chol(0, 0));
    double f = e;
    for (Eigen::Index i = 1; i < d && f > 0.0; ++i) {
        const double arg = std::clamp(w[i - 1] * e, 1e-300, 1.0 - 1e-16);
        y[static_cast<std::size_t>(i - 1)] = std_normal_quantile(arg);
        double shift = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) shift += prob.chol(i, k) * y[static_cast<std::size_t>(k)];
        e = std_normal_cdf((prob.upper(i) - shift) / prob.chol(i, i));
        f *= e;
    }
    return f;
}

}  // namespace detail

/// P(X <= upper) for X ~ N(0, cov).
///
/// Genz's separation-of-variables transform with greedy variable
/// reordering, integrated by a randomly shifted Richtmyer lattice rule with
/// the tent periodization. The point count doubles until three standard
/// errors across randomizations fall below rel_tol * value (or abs_tol);
/// otherwise the best estimate is returned with `converged == false`.
inline MvnResult mvn_cdf(const Eigen::VectorXd& upper, const Eigen::MatrixXd& cov, const MvnOptions& opts = {}) {
    const Eigen::Index d = upper.size();
    if (d == 0 || cov.rows() != d || cov.cols() != d) {
        throw Error(ErrorKind::DimensionMismatch, "limits and covariance dimensions disagree");
    }
    if (static_cast<std::size_t>(d) > opts.max_dimension) {
        throw Error(ErrorKind::DimensionMismatch, "dimension exceeds the configured cap");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(cov(i, i) > 0.0)) throw Error(ErrorKind::NotPD, "covariance is not positive definite");
    }
    if (d == 1) return {std_normal_cdf(upper(0) / std::sqrt(cov(0, 0))), 0.0, true, 0};
    {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPD, "covariance is not positive definite");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (upper(i) == -std::numeric_limits<double>::infinity()) return {0.0, 0.0, true, 0};
    }

    const auto prob = detail::reorder_and_factor(upper, cov);
    const std::size_t dim = static_cast<std::size_t>(d - 1);
    const auto& gens = detail::lattice_generators();
    const CounterRng rng(opts.seed);
    const int reps = std::max(opts.randomizations, 2);

    std::vector<double> w(dim), y(dim);
    std::vector<double> steps(dim);
    for (std::size_t j = 0; j < dim; ++j) steps[j] = gens[j] - std::floor(gens[j]);
    std::vector<double> sums(static_cast<std::size_t>(reps), 0.0);
    // current lattice point of each randomization, advanced in place
    std::vector<double> state(static_cast<std::size_t>(reps) * dim);
    for (std::size_t r = 0; r < static_cast<std::size_t>(reps); ++r) {
        for (std::size_t j = 0; j < dim; ++j) {
            state[r * dim + j] = rng.uniform(static_cast<std::uint32_t>(j), r, 0);
        }
    }
    std::size_t done = 0;
    MvnResult result;
    for (std::size_t target = opts.min_points;; target *= 2) {
        for (int r = 0; r < reps; ++r) {
            double* x = state.data() + static_cast<std::size_t>(r) * dim;
            double acc = 0.0;
            for (std::size_t k = done; k < target; ++k) {
                for (std::size_t j = 0; j < dim; ++j) {
                    x[j] += steps[j];
                    if (x[j] >= 1.0) x[j] -= 1.0;
                    w[j] = std::abs(2.0 * x[j] - 1.0);
                }
                acc += detail::genz_integrand(prob, w.data(), y);
            }
            sums[static_cast<std::size_t>(r)] += acc;
        }
        done = target;
        double mean = 0.0;
        for (double s : sums) mean += s / static_cast<double>(done);
        mean /= reps;
        double var = 0.0;
        for (double s : sums) {
            const double dev = s / static_cast<double>(done) - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(reps * (reps - 1));
        result.value = std::clamp(mean, 0.0, 1.0);
        result.error = 3.0 * std::sqrt(var);
        result.points = done;
        const double goal = std::max(opts.rel_tol * result.value, opts.abs_tol);
        if (result.error <= goal) {
            result.converged = true;
            break;
        }
        if (target * 2 > opts.max_points) {
            result.converged = false;
            break;
        }
    }
    return result;
}

}  // namespace extreme_blocks

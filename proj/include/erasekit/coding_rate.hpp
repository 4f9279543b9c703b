#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kernel_lab.hpp"
#include "types.hpp"

namespace erasekit {

/// Distortion level for the coding-rate functions. The scale coefficient
/// c = d / (n eps^2) is derived per call from the matrix shape.
struct CodingRateParams {
    double epsilon = 0.5;

    double coefficient(Index n, Index d) const
    {
        return static_cast<double>(d) / (static_cast<double>(n) * epsilon * epsilon);
    }

    void validate() const
    {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
            throw InvalidArgument("distortion epsilon must be positive");
        }
    }
};

/// Signed components of the relaxed objective, all rates in bits.
/// `total` is the minimized value -r_zk + lambda * constraint.
struct LossBreakdown {
    double total = 0.0;
    double r_zk = 0.0;
    double r_z = 0.0;
    double constraint = 0.0;
    double target_bits = 0.0;
};

namespace detail {

/// Cholesky factor of an SPD matrix, retried with growing diagonal jitter.
struct SpdFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    /// log2 det via the factor's diagonal, summed in index order.
    double log2_det() const
    {
        const auto& l = llt.matrixLLT();
        double sum = 0.0;
        for (Index i = 0; i < l.rows(); ++i) sum += std::log2(l(i, i));
        return 2.0 * sum;
    }

    Eigen::MatrixXd inverse() const
    {
        return llt.solve(Eigen::MatrixXd::Identity(llt.rows(), llt.cols()));
    }
};

inline SpdFactor factor_spd(const Eigen::MatrixXd& m)
{
    constexpr std::array<double, 3> jitters = {0.0, 1e-10, 1e-8};
    for (double jitter : jitters) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        SpdFactor factor{Eigen::LLT<Eigen::MatrixXd>(shifted), jitter};
        if (factor.llt.info() == Eigen::Success) return factor;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "Cholesky factorization failed on a " << m.rows() << "x" << m.cols()
        << " coding-rate matrix; min eigenvalue " << eig.eigenvalues().minCoeff()
        << ", finite: " << (m.allFinite() ? "yes" : "no");
    throw NumericalError(msg.str());
}

inline void check_features(const FeatureMatrix& z)
{
    require(z.rows() >= 1 && z.cols() >= 1, "feature matrix must be non-empty");
    if (!z.allFinite()) throw InvalidArgument("feature matrix has non-finite entries");
}

inline void check_kernel(const FeatureMatrix& z, const KernelMatrix& k)
{
    if (k.size() != z.rows()) {
        throw InvalidArgument("kernel is " + std::to_string(k.size()) + "x" + std::to_string(k.size()) +
                              " but features have " + std::to_string(z.rows()) + " rows");
    }
}

/// M = I + c * (Z Z^T), optionally weighted elementwise by K.
inline Eigen::MatrixXd coding_matrix(const FeatureMatrix& z, const Eigen::MatrixXd* k, double c)
{
    Eigen::MatrixXd m(z.rows(), z.rows());
    m.noalias() = z * z.transpose();
    if (k != nullptr) m.array() *= k->array();
    m *= c;
    m.diagonal().array() += 1.0;
    return m;
}

} // namespace detail

/// R(Z) = 1/2 log2 det(I + c Z Z^T), evaluated on the n x n side.
inline double rate_distortion(const FeatureMatrix& z, const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    const double c = params.coefficient(z.rows(), z.cols());
    return 0.5 * detail::factor_spd(detail::coding_matrix(z, nullptr, c)).log2_det();
}

/// R(Z|K) = 1/2 log2 det(I + c (Z Z^T) o K).
inline double kernelized_rate_distortion(const FeatureMatrix& z, const KernelMatrix& k,
                                         const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    detail::check_kernel(z, k);
    const double c = params.coefficient(z.rows(), z.cols());
    return 0.5 * detail::factor_spd(detail::coding_matrix(z, &k.values(), c)).log2_det();
}

inline LossBreakdown kram_loss(const FeatureMatrix& z, const KernelMatrix& k, const CodingRateParams& params,
                               double lambda, double target_bits)
{
    require(lambda >= 0.0, "lambda must be non-negative");
    require(target_bits >= 0.0, "target bits must be non-negative");
    LossBreakdown out;
    out.r_zk = kernelized_rate_distortion(z, k, params);
    out.r_z = rate_distortion(z, params);
    out.target_bits = target_bits;
    out.constraint = std::abs(out.r_z - target_bits);
    out.total = -out.r_zk + lambda * out.constraint;
    return out;
}

/// dR(Z|K)/dZ = (c / ln 2) (M^-1 o K) Z with M = I + c (Z Z^T) o K.
inline Eigen::MatrixXd grad_kernelized_rate_distortion(const FeatureMatrix& z, const KernelMatrix& k,
                                                       const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    detail::check_kernel(z, k);
    const double c = params.coefficient(z.rows(), z.cols());
    Eigen::MatrixXd weights = detail::factor_spd(detail::coding_matrix(z, &k.values(), c)).inverse();
    weights.array() *= k.values().array();
    Eigen::MatrixXd g(z.rows(), z.cols());
    g.noalias() = weights * z;
    return g * (c / std::numbers::ln2);
}

/// dR(Z)/dZ = (c / ln 2) M^-1 Z with M = I + c Z Z^T.
inline Eigen::MatrixXd grad_rate_distortion(const FeatureMatrix& z, const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    const double c = params.coefficient(z.rows(), z.cols());
    const Eigen::MatrixXd inv = detail::factor_spd(detail::coding_matrix(z, nullptr, c)).inverse();
    Eigen::MatrixXd g(z.rows(), z.cols());
    g.noalias() = inv * z;
    return g * (c / std::numbers::ln2);
}

/// Gradient of kram_loss.total. The |.| term uses subgradient 0 at the kink.
inline Eigen::MatrixXd grad_kram_loss(const FeatureMatrix& z, const KernelMatrix& k, const CodingRateParams& params,
                                      double lambda, double target_bits)
{
    require(lambda >= 0.0, "lambda must be non-negative");
    Eigen::MatrixXd g = -grad_kernelized_rate_distortion(z, k, params);
    if (lambda == 0.0) return g;
    const double gap = rate_distortion(z, params) - target_bits;
    if (gap == 0.0) return g;
    const double sign = gap > 0.0 ? 1.0 : -1.0;
    g += (lambda * sign) * grad_rate_distortion(z, params);
    return g;
}

struct RateWithGradient {
    double bits = 0.0;
    Eigen::MatrixXd gradient;
};

namespace detail {

inline RateWithGradient rate_with_gradient(const FeatureMatrix& z, const Eigen::MatrixXd* k,
                                           const CodingRateParams& params)
{
    const double c = params.coefficient(z.rows(), z.cols());
    const SpdFactor factor = factor_spd(coding_matrix(z, k, c));
    Eigen::MatrixXd weights = factor.inverse();
    if (k != nullptr) weights.array() *= k->array();
    RateWithGradient out;
    out.bits = 0.5 * factor.log2_det();
    out.gradient.noalias() = weights * z;
    out.gradient *= c / std::numbers::ln2;
    return out;
}

} // namespace detail

/// R(Z|K) and its gradient from a single factorization.
inline RateWithGradient kernelized_rate_with_gradient(const FeatureMatrix& z, const KernelMatrix& k,
                                                      const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    detail::check_kernel(z, k);
    return detail::rate_with_gradient(z, &k.values(), params);
}

/// R(Z) and its gradient from a single factorization.
inline RateWithGradient rate_with_gradient(const FeatureMatrix& z, const CodingRateParams& params)
{
    params.validate();
    detail::check_features(z);
    return detail::rate_with_gradient(z, nullptr, params);
}

struct RateBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Kernel-independent bounds on R(Z|K) for unit-diagonal K:
/// lower = R(Z), upper = (n/2) log2(1 + c).
inline RateBounds kernelized_rate_bounds(const FeatureMatrix& z, const CodingRateParams& params)
{
    const double c = params.coefficient(z.rows(), z.cols());
    return {rate_distortion(z, params), 0.5 * static_cast<double>(z.rows()) * std::log2(1.0 + c)};
}

} // namespace erasekit

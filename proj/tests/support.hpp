#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include <erasekit/rng.hpp>
#include <erasekit/types.hpp>

namespace testing_support {

inline Eigen::MatrixXd random_sphere(erasekit::Rng& rng, erasekit::Index n, erasekit::Index d)
{
    return erasekit::normalize_rows(rng.normal_matrix(n, d));
}

/// Central finite-difference gradient of a scalar function of a matrix.
inline Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f, Eigen::MatrixXd at,
                                        double step = 1e-5)
{
    Eigen::MatrixXd g(at.rows(), at.cols());
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
        for (Eigen::Index j = 0; j < at.cols(); ++j) {
            const double orig = at(i, j);
            at(i, j) = orig + step;
            const double up = f(at);
            at(i, j) = orig - step;
            const double down = f(at);
            at(i, j) = orig;
            g(i, j) = (up - down) / (2.0 * step);
        }
    }
    return g;
}

/// max |a - b| / max(max |b|, floor), so tiny entries do not dominate.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-8)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

/// 0.5 * sum log2(1 + c * eig(M)) for symmetric PSD M.
inline double eigen_rate(const Eigen::MatrixXd& gram, double c)
{
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues();
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) s += std::log2(1.0 + c * std::max(ev(i), 0.0));
    return 0.5 * s;
}

} // namespace testing_support

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace erasekit {

using Index = Eigen::Index;

/// An n x d matrix of representations, one instance per row.
using FeatureMatrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or user input; the CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Precondition violations: shape mismatches, out-of-range parameters.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated input file.
class FormatError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw InvalidArgument(message);
}

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m)
{
    return m.allFinite();
}

/// True when every row has unit L2 norm within `tol`.
inline bool is_sphere_normalized(const FeatureMatrix& z, double tol = 1e-9)
{
    for (Index i = 0; i < z.rows(); ++i) {
        if (std::abs(z.row(i).norm() - 1.0) > tol) return false;
    }
    return true;
}

/// Row-wise projection onto the unit sphere. A zero row maps to the first
/// standard basis vector.
inline FeatureMatrix normalize_rows(const FeatureMatrix& x)
{
    FeatureMatrix out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double norm = x.row(i).norm();
        if (norm > 0.0) {
            out.row(i) = x.row(i) / norm;
        } else {
            out.row(i).setZero();
            out(i, 0) = 1.0;
        }
    }
    return out;
}

/// Per-instance concept annotation: class ids, scalars, or vectors.
class ConceptLabels {
public:
    enum class Kind { categorical, continuous, vector };

    static ConceptLabels categorical(std::vector<std::int64_t> ids)
    {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0) {
                throw InvalidArgument("categorical label at index " + std::to_string(i) +
                                      " is negative");
            }
        }
        return ConceptLabels(Payload(std::move(ids)));
    }

    static ConceptLabels continuous(std::vector<double> values)
    {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) {
                throw InvalidArgument("continuous label at index " + std::to_string(i) +
                                      " is not finite");
            }
        }
        return ConceptLabels(Payload(std::move(values)));
    }

    static ConceptLabels vector(Eigen::MatrixXd values)
    {
        if (values.cols() < 1) throw InvalidArgument("vector labels need at least one column");
        for (Index i = 0; i < values.rows(); ++i) {
            if (values.row(i).array().isNaN().all()) {
                throw InvalidArgument("vector label row " + std::to_string(i) + " is all NaN");
            }
        }
        return ConceptLabels(Payload(std::move(values)));
    }

    Kind kind() const { return static_cast<Kind>(payload_.index()); }

    std::size_t size() const
    {
        switch (kind()) {
        case Kind::categorical: return classes().size();
        case Kind::continuous: return scalars().size();
        case Kind::vector: return static_cast<std::size_t>(vectors().rows());
        }
        return 0;
    }

    const std::vector<std::int64_t>& classes() const
    {
        return std::get<std::vector<std::int64_t>>(payload_);
    }
    const std::vector<double>& scalars() const { return std::get<std::vector<double>>(payload_); }
    const Eigen::MatrixXd& vectors() const { return std::get<Eigen::MatrixXd>(payload_); }

    /// Labels restricted to the given instance indices, in that order.
    ConceptLabels subset(std::span<const Index> rows) const
    {
        switch (kind()) {
        case Kind::categorical: {
            std::vector<std::int64_t> out;
            out.reserve(rows.size());
            for (Index r : rows) out.push_back(classes()[static_cast<std::size_t>(r)]);
            return ConceptLabels(Payload(std::move(out)));
        }
        case Kind::continuous: {
            std::vector<double> out;
            out.reserve(rows.size());
            for (Index r : rows) out.push_back(scalars()[static_cast<std::size_t>(r)]);
            return ConceptLabels(Payload(std::move(out)));
        }
        case Kind::vector: {
            Eigen::MatrixXd out(static_cast<Index>(rows.size()), vectors().cols());
            for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = vectors().row(rows[i]);
            return ConceptLabels(Payload(std::move(out)));
        }
        }
        throw InvalidArgument("unknown label kind");
    }

    /// Labels as an n x m real matrix (m = 1 for scalar kinds).
    Eigen::MatrixXd as_matrix() const
    {
        switch (kind()) {
        case Kind::categorical: {
            Eigen::MatrixXd out(static_cast<Index>(size()), 1);
            for (std::size_t i = 0; i < size(); ++i) out(static_cast<Index>(i), 0) = static_cast<double>(classes()[i]);
            return out;
        }
        case Kind::continuous:
            return Eigen::Map<const Eigen::VectorXd>(scalars().data(), static_cast<Index>(size()));
        case Kind::vector: return vectors();
        }
        return {};
    }

    bool operator==(const ConceptLabels& other) const
    {
        if (kind() != other.kind()) return false;
        if (kind() == Kind::vector) {
            return vectors().rows() == other.vectors().rows() &&
                   vectors().cols() == other.vectors().cols() &&
                   (vectors().array() == other.vectors().array()).all();
        }
        return payload_ == other.payload_;
    }

private:
    using Payload = std::variant<std::vector<std::int64_t>, std::vector<double>, Eigen::MatrixXd>;

    explicit ConceptLabels(Payload payload) : payload_(std::move(payload)) {}

    Payload payload_;
};

inline const char* to_string(ConceptLabels::Kind kind)
{
    switch (kind) {
    case ConceptLabels::Kind::categorical: return "categorical";
    case ConceptLabels::Kind::continuous: return "continuous";
    case ConceptLabels::Kind::vector: return "vector";
    }
    return "unknown";
}

} // namespace erasekit

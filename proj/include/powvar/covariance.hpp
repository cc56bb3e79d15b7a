#pragma once

// Dense covariance matrices over grid increments and their Cholesky factors,
// with an escalating-jitter retry ladder for nearly singular inputs.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <string>

#include "powvar/errors.hpp"

namespace powvar {

struct CovarianceMatrix {
    Eigen::MatrixXd entries;
    Eigen::MatrixXd factor;  // lower triangular, valid iff has_factor
    bool has_factor = false;
    double jitter_used = 0.0;

    int dim() const { return static_cast<int>(entries.rows()); }

    void validate() const {
        if (entries.rows() != entries.cols())
            throw domain_error("CovarianceMatrix: entries must be square");
        const double scale = entries.cwiseAbs().maxCoeff();
        const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
        if (scale > 0.0 && asym > 1e-12 * scale)
            throw domain_error("CovarianceMatrix: entries not symmetric");
    }
};

namespace detail {

// First non-positive pivot of a scalar Cholesky pass, or -1 if none.
inline int first_bad_minor(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) return j;
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    return -1;
}

}  // namespace detail

// Lower-triangular factorization of `cov.entries`; on LLT failure retries
// with jitter eps * trace/dim added to the diagonal, eps in
// {1e-14, 1e-12, 1e-10}.
inline CovarianceMatrix factorize(CovarianceMatrix cov) {
    cov.validate();
    const int n = cov.dim();
    const double diag_unit = cov.entries.trace() / n;
    static constexpr double kEps[] = {0.0, 1e-14, 1e-12, 1e-10};
    for (double eps : kEps) {
        Eigen::MatrixXd work = cov.entries;
        const double jitter = eps * diag_unit;
        if (jitter > 0.0) work.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success) {
            cov.factor = llt.matrixL();
            cov.has_factor = true;
            cov.jitter_used = jitter;
            return cov;
        }
    }
    Eigen::MatrixXd work = cov.entries;
    work.diagonal().array() += kEps[3] * diag_unit;
    const int minor = detail::first_bad_minor(work);
    throw numerical_error("factorize: not positive definite at maximum jitter (leading minor " +
                          std::to_string(minor) + ")");
}

}  // namespace powvar

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace mrmc {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Jagged containers indexed [user][frame].
using MatGrid = std::vector<std::vector<Mat>>;

inline constexpr double kRegularization = 1e-10;
inline constexpr double kConditionLimit = 1e12;

template <typename Derived>
auto herm(const Eigen::MatrixBase<Derived>& m)
{
    return (0.5 * (m + m.adjoint())).eval();
}

template <typename Derived>
double hermitian_defect(const Eigen::MatrixBase<Derived>& m)
{
    return (m - m.adjoint()).norm();
}

template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b)
{
    using S = typename DA::Scalar;
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Column-major vectorization and its inverse.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vec(const Eigen::MatrixBase<Derived>& m)
{
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tmp = m;
    return Eigen::Map<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>(tmp.data(), tmp.size());
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
unvec(const Eigen::MatrixBase<Derived>& v, Eigen::Index rows, Eigen::Index cols)
{
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> tmp = v;
    return Eigen::Map<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>>(tmp.data(), rows, cols);
}

// log|M| for Hermitian positive definite M. On Cholesky failure the
// matrix is shifted by kRegularization*I and retried once.
template <typename Derived>
double logdet_hpd(const Eigen::MatrixBase<Derived>& m)
{
    using S = typename Derived::Scalar;
    using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    M h = herm(m);
    Eigen::LLT<M> llt(h);
    if (llt.info() != Eigen::Success) {
        h += kRegularization * M::Identity(h.rows(), h.cols());
        llt.compute(h);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("logdet_hpd: matrix is not positive definite");
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        s += std::log(std::real(llt.matrixLLT()(i, i)));
    return 2.0 * s;
}

// Inverse of a Hermitian positive (semi)definite matrix. Ill-conditioned
// inputs get kRegularization*I added before inversion.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
inv_hpd(const Eigen::MatrixBase<Derived>& m)
{
    using S = typename Derived::Scalar;
    using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    M h = herm(m);
    const Eigen::Index n = h.rows();
    Eigen::LLT<M> llt(h);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        double dmax = 0.0, dmin = INFINITY;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = std::real(llt.matrixLLT()(i, i));
            dmax = std::max(dmax, d);
            dmin = std::min(dmin, d);
        }
        ok = dmin > 0.0 && (dmax / dmin) * (dmax / dmin) < kConditionLimit;
    }
    if (!ok) {
        h += kRegularization * M::Identity(n, n);
        llt.compute(h);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("inv_hpd: degenerate covariance");
    }
    M out = llt.solve(M::Identity(n, n));
    return herm(out);
}

// Hermitian square root and inverse square root via eigendecomposition.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
sqrt_hpsd(const Eigen::MatrixBase<Derived>& m)
{
    using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<M> es(herm(m));
    RVec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
inv_sqrt_hpd(const Eigen::MatrixBase<Derived>& m)
{
    using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<M> es(herm(m));
    RVec d = es.eigenvalues();
    if (d.minCoeff() <= 0.0 || d.maxCoeff() / d.minCoeff() > kConditionLimit)
        d.array() += kRegularization;
    if (d.minCoeff() <= 0.0)
        throw std::runtime_error("inv_sqrt_hpd: matrix is not positive definite");
    d = d.cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

template <typename Derived>
double min_eig(const Eigen::MatrixBase<Derived>& m)
{
    using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<M> es(herm(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Real inner product used by Taylor expansions: 2 Re tr(G^H D).
template <typename DA, typename DB>
double re_inner(const Eigen::MatrixBase<DA>& g, const Eigen::MatrixBase<DB>& d)
{
    return 2.0 * std::real(g.cwiseProduct(d.conjugate()).sum());
}

} // namespace mrmc

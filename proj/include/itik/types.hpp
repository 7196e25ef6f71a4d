#ifndef ITIK_TYPES_HPP
#define ITIK_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace itik {

using cplx = std::complex<double>;
using Mat  = Eigen::MatrixXcd;
using Vec  = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid user input (bad grid size, malformed config, precondition violated).
struct ConfigError : Error {
    using Error::Error;
};

/// A dense factorization came out singular to working tolerance.
struct SingularSystem : Error {
    using Error::Error;
};

/// I - R1 R2 is numerically singular; carries the measured smallest singular value.
struct MergeSingular : Error {
    double sigma_min;
    explicit MergeSingular(const std::string& what, double smin)
        : Error(what), sigma_min(smin) {}
};

/// I - R is numerically singular when converting ItI data to a DtN map.
struct DtnNearResonant : Error {
    double sigma_min;
    explicit DtnNearResonant(const std::string& what, double smin)
        : Error(what), sigma_min(smin) {}
};

/// Root finding for the transcendental eigenvalue equation failed.
struct RootFindError : Error {
    cplx last_iterate;
    double residual;
    RootFindError(const std::string& what, cplx it, double res)
        : Error(what), last_iterate(it), residual(res) {}
};

}  // namespace itik

#endif

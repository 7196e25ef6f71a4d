#ifndef ITIK_ORACLE_HPP
#define ITIK_ORACLE_HPP

#include "itik/types.hpp"

namespace itik {
/// Closed-form solutions of the impedance problem on the unit square with
/// V == 1, used as ground truth by the tests and the validation harness.
namespace oracle {

/// One separated impedance mode: w_n(y) solves w'' = -lambda^2 w with
/// impedance ends, v_n(x) solves v'' = mu^2 v with mu^2 = lambda^2 - k^2,
/// and u_n(x, y) = v_n(x) w_n(y) solves the square problem with incoming
/// data w_n on the East side.
struct ImpedanceMode {
    int n = 0;
    double k = 0.0;
    cplx lambda{};
    cplx mu{};       // branch Re mu >= 0 (Im mu >= 0 on the Re mu = 0 line)
    cplx norm_a{};   // A_n with ||w_n||_{L2(0,1)} = 1 and w_n(0) real positive
};

/// Residual of the defining equation e^{2 i lambda} = (1 - k/lambda)^2 / (1 + k/lambda)^2.
double lambda_residual(double k, cplx lambda);

/// Root of the eigenvalue relation continued in k from lambda = n pi at k = 0.
/// Newton with adaptive homotopy steps; throws RootFindError on failure.
cplx find_lambda(double k, int n);

ImpedanceMode make_mode(double k, int n);

cplx w_n(const ImpedanceMode& m, double y);
cplx w_n_prime(const ImpedanceMode& m, double y);
cplx v_n(const ImpedanceMode& m, double x);
cplx v_n_prime(const ImpedanceMode& m, double x);
cplx v_n_second(const ImpedanceMode& m, double x);
cplx u_n(const ImpedanceMode& m, double x, double y);

/// ItI eigenvalue of the mode on the East side: r_n = v_n'(1) - i k v_n(1).
cplx r_n(const ImpedanceMode& m);

struct SharpnessPoint {
    double k;        // solves k + k^alpha = n pi
    double ratio;    // |1 + r_n| = ||(I+R) w_n|| / ||w_n||
    ImpedanceMode mode;
};

/// Point of the sharpness family for exponent alpha in (0, 1/2).
SharpnessPoint sharpness_sequence(double alpha, int n);

}  // namespace oracle
}  // namespace itik

#endif

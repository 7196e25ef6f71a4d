#include "itik/oracle.hpp"

#include <cmath>

namespace itik {
namespace oracle {

namespace {

const double kPi = std::acos(-1.0);

// (e^c - 1) / c with a series fallback near c = 0.
cplx expm1_over(cplx c) {
    if (std::abs(c) < 1e-6) return 1.0 + c / 2.0 + c * c / 6.0 + c * c * c / 24.0;
    return (std::exp(c) - 1.0) / c;
}

// Newton iteration on h(lambda) = e^{i lambda}(lambda + k) - s (lambda - k),
// s = (-1)^n; this is the square-root form of the eigenvalue relation on the
// branch containing lambda = n pi at k = 0.
bool newton_step_count(double k, int n, cplx& lam, int maxit) {
    const double s = (n % 2 == 0) ? 1.0 : -1.0;
    for (int it = 0; it < maxit; ++it) {
        const cplx e = std::exp(I * lam);
        const cplx f = e * (lam + k) - s * (lam - k);
        const cplx fp = I * e * (lam + k) + e - s;
        const cplx step = f / fp;
        lam -= step;
        if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(lam))) return true;
    }
    return false;
}

}  // namespace

double lambda_residual(double k, cplx lambda) {
    const cplx q = k / lambda;
    return std::abs(std::exp(2.0 * I * lambda) - (1.0 - q) * (1.0 - q) / ((1.0 + q) * (1.0 + q)));
}

cplx find_lambda(double k, int n) {
    if (k <= 0.0) throw ConfigError("find_lambda: k must be positive");
    if (n < 1) throw ConfigError("find_lambda: mode index must be >= 1");
    cplx lam(n * kPi, 0.0);
    double kc = 0.0;
    double step = 0.5;
    const double min_step = 1e-6;
    while (kc < k) {
        const double kn = std::min(k, kc + step);
        cplx trial = lam + cplx(0.0, 0.05);  // bias into the upper half plane
        if (newton_step_count(kn, n, trial, 60) && trial.imag() > -1e-8) {
            lam = trial;
            kc = kn;
            if (step < 0.5) step *= 2.0;
        } else {
            step *= 0.5;
            if (step < min_step)
                throw RootFindError("find_lambda: homotopy stalled at k = " + std::to_string(kc),
                                    trial, lambda_residual(kn, trial));
        }
    }
    newton_step_count(k, n, lam, 20);  // polish
    const double res = lambda_residual(k, lam);
    if (!(res <= 1e-12))
        throw RootFindError("find_lambda: residual " + std::to_string(res) + " at k = " +
                            std::to_string(k) + ", n = " + std::to_string(n), lam, res);
    return lam;
}

ImpedanceMode make_mode(double k, int n) {
    ImpedanceMode m;
    m.n = n;
    m.k = k;
    m.lambda = find_lambda(k, n);
    cplx mu = std::sqrt(m.lambda * m.lambda - k * k);
    if (mu.real() < 0.0 || (mu.real() == 0.0 && mu.imag() < 0.0)) mu = -mu;
    m.mu = mu;
    // ||w||^2 for w = a e^{i lam y} + b e^{-i lam y} via exact exponential integrals.
    const cplx a = m.lambda + k, b = m.lambda - k;
    const cplx lc = std::conj(m.lambda);
    const cplx n2 = std::norm(a) * expm1_over(I * (m.lambda - lc)) +
                    a * std::conj(b) * expm1_over(I * (m.lambda + lc)) +
                    std::conj(a) * b * expm1_over(-I * (lc + m.lambda)) +
                    std::norm(b) * expm1_over(-I * (m.lambda - lc));
    cplx A = 1.0 / std::sqrt(n2.real());
    const cplx w0 = 2.0 * m.lambda * A;  // w(0) before the phase fix
    if (std::abs(w0) > 0.0) A *= std::conj(w0) / std::abs(w0);
    m.norm_a = A;
    return m;
}

cplx w_n(const ImpedanceMode& m, double y) {
    return m.norm_a * ((m.lambda + m.k) * std::exp(I * m.lambda * y) +
                       (m.lambda - m.k) * std::exp(-I * m.lambda * y));
}

cplx w_n_prime(const ImpedanceMode& m, double y) {
    return m.norm_a * I * m.lambda *
           ((m.lambda + m.k) * std::exp(I * m.lambda * y) -
            (m.lambda - m.k) * std::exp(-I * m.lambda * y));
}

namespace {
// Everything is evaluated with the factor e^{mu} pulled out of the closed
// form: numerator terms e^{mu (x-1)} and e^{-mu (x+1)} stay bounded on [0, 1]
// for Re mu >= 0, and the denominator becomes p^2 - q^2 e^{-2 mu}, so large
// Re mu never overflows.
cplx v_denominator_scaled(const ImpedanceMode& m) {
    const cplx p = m.mu + I * m.k, q = m.mu - I * m.k;
    const cplx den = p * p - q * q * std::exp(-2.0 * m.mu);
    const double scale =
        std::max({std::norm(m.mu) + m.k * m.k, std::abs(q * q * std::exp(-2.0 * m.mu)), 1e-300});
    if (std::abs(den) < 1e-13 * scale)
        throw Error("v_n: near-resonant denominator for k = " + std::to_string(m.k) + ", n = " +
                    std::to_string(m.n));
    return den;
}
}  // namespace

cplx v_n(const ImpedanceMode& m, double x) {
    const cplx p = m.mu + I * m.k, q = m.mu - I * m.k;
    return (p * std::exp(m.mu * (x - 1.0)) + q * std::exp(-m.mu * (x + 1.0))) /
           v_denominator_scaled(m);
}

cplx v_n_prime(const ImpedanceMode& m, double x) {
    const cplx p = m.mu + I * m.k, q = m.mu - I * m.k;
    return m.mu * (p * std::exp(m.mu * (x - 1.0)) - q * std::exp(-m.mu * (x + 1.0))) /
           v_denominator_scaled(m);
}

cplx v_n_second(const ImpedanceMode& m, double x) {
    return m.mu * m.mu * v_n(m, x);
}

cplx u_n(const ImpedanceMode& m, double x, double y) { return v_n(m, x) * w_n(m, y); }

cplx r_n(const ImpedanceMode& m) { return v_n_prime(m, 1.0) - I * m.k * v_n(m, 1.0); }

SharpnessPoint sharpness_sequence(double alpha, int n) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw ConfigError("sharpness_sequence: alpha must lie in (0, 1/2)");
    const double target = n * kPi;
    // Monotone scalar Newton on k + k^alpha - n pi.
    double k = std::max(target - std::pow(target, alpha), 0.5);
    for (int it = 0; it < 200; ++it) {
        const double f = k + std::pow(k, alpha) - target;
        const double fp = 1.0 + alpha * std::pow(k, alpha - 1.0);
        const double step = f / fp;
        k -= step;
        if (k <= 0.0) k = 1e-8;
        if (std::abs(step) <= 1e-15 * target) break;
    }
    if (std::abs(k + std::pow(k, alpha) - target) > 1e-12 * target)
        throw RootFindError("sharpness_sequence: k_n root-finding failed", cplx(k, 0), 0.0);
    if (k <= 1.0)
        throw ConfigError("sharpness_sequence: n too small, k_n <= 1");
    SharpnessPoint p;
    p.k = k;
    p.mode = make_mode(k, n);
    p.ratio = std::abs(1.0 + r_n(p.mode));
    return p;
}

}  // namespace oracle
}  // namespace itik

#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace gridvb::stab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Cx = std::complex<double>;

struct Unstable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Proper rational transfer function; coefficients in descending degree.
struct RationalTF {
    VectorXd num, den;

    static RationalTF constant(double k);
    RationalTF operator*(const RationalTF& o) const;
    RationalTF operator+(const RationalTF& o) const;
    /// num/(den+num): closes unity negative feedback around this loop.
    RationalTF feedback_unity() const;

    Cx eval(Cx s) const;
    double dc_gain() const;
    std::vector<Cx> poles() const;
    int degree() const;
};

VectorXd poly_mul(const VectorXd& a, const VectorXd& b);
VectorXd poly_add(const VectorXd& a, const VectorXd& b);
/// Roots via companion-matrix eigenvalues (leading near-zeros stripped).
std::vector<Cx> poly_roots(const VectorXd& coeffs);

/// [3/3] Pade approximant of exp(-s*T); T = 0 gives unity.
RationalTF pade3(double t_delay);

/// Phase margin in degrees at the gain crossover |G(jw)| = 1, found by a
/// log-frequency scan plus bisection. No crossover reports +infinity.
double phase_margin(const RationalTF& open_loop);

/// 2% (default) settling time of the unit step response, integrated with an
/// adaptive RK45 stepper. Throws Unstable if any pole is in the closed RHP.
double settling_time(const RationalTF& closed_loop, double band = 0.02);

/// Two-VB intra-feeder plant for the gain-space stability map.
struct TwoVBPlant {
    double a1, a2;      // head-node power sensitivities
    double tau1, tau2;  // lag time constants, s
};

/// Marks each (k1, k2) grid point stable iff every root of the closed-loop
/// characteristic polynomial (Pade-3 delay blocks) has real part < -1e-9.
std::vector<std::vector<bool>> stability_region(const TwoVBPlant& plant,
                                                const std::vector<double>& k1_grid,
                                                const std::vector<double>& k2_grid,
                                                double delay1, double delay2,
                                                int n_threads = 1);

}  // namespace gridvb::stab

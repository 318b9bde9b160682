#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gridvb {

/// Lag-and-delay virtual-battery parameters. Power is in injection
/// convention (positive discharges the store into the grid); SoC is in pu*h.
struct VBParams {
    double alpha_b = 0.0;      // dissipation rate
    double tau = 1.0;          // first-order lag time constant, s
    double t_delay = 0.0;      // input delay, s
    double p_min = -1.0;       // pu
    double p_max = 1.0;        // pu
    double b_min = 0.0;        // pu*h
    double b_max = 1.0;        // pu*h
    double b_low_thresh = 0.1;   // scheduling threshold, pu*h
    double b_high_thresh = 0.9;  // scheduling threshold, pu*h
    double w_exp = 2.0;          // adjustment exponent, > 1

    /// Applies the default 10% threshold placement for given SoC bounds.
    static VBParams with_bounds(double p_min, double p_max, double b_min, double b_max) {
        VBParams p;
        p.p_min = p_min;
        p.p_max = p_max;
        p.b_min = b_min;
        p.b_max = b_max;
        p.b_low_thresh = b_min + 0.1 * (b_max - b_min);
        p.b_high_thresh = b_max - 0.1 * (b_max - b_min);
        return p;
    }

    void check() const {
        if (!(tau > 0)) throw std::invalid_argument("vb: tau must be positive");
        if (!(p_min < 0 && 0 < p_max)) throw std::invalid_argument("vb: need p_min < 0 < p_max");
        double mid = 0.5 * (b_min + b_max);
        if (!(b_min < b_low_thresh && b_low_thresh < mid && mid < b_high_thresh &&
              b_high_thresh < b_max))
            throw std::invalid_argument("vb: SoC thresholds out of order");
        if (!(w_exp > 1)) throw std::invalid_argument("vb: w_exp must exceed 1");
    }
};

/// Evolving plant state. The delay line holds past requested inputs,
/// quantized to the simulation step (fractional delays round to nearest).
struct VBState {
    double b = 0.0;    // state of charge, pu*h
    double p_b = 0.0;  // realized power output, pu
    bool saturated = false;
    std::vector<double> delay_line;  // ring buffer of past p_in
    std::size_t head = 0;

    void init_delay(double t_delay, double dt, double fill = 0.0) {
        std::size_t k = static_cast<std::size_t>(std::lround(t_delay / dt));
        delay_line.assign(k, fill);
        head = 0;
    }
};

/// One plant step: clamp p_in to power bounds, read the delayed input, apply
/// the exact zero-order-hold lag update, then the SoC Euler update
/// b+ = b - dt*(alpha_b*b + p_b)/3600 with hard SoC clamping. When clamped,
/// output in the depleting (resp. filling) direction is cut to zero.
VBState step_continuous(const VBState& state, double p_in, double dt, const VBParams& params);

/// Reduced predictive model: b - (dt_min/60)*p_b. Bounds are the caller's
/// business (they become optimization constraints).
inline double step_reduced(double b, double p_b, double dt_min) {
    return b - (dt_min / 60.0) * p_b;
}

/// SoC-aware gain taper. Follows the charge/discharge labeling in which
/// positive power fills the store: p_b > 0 tapers near b_max, p_b < 0 tapers
/// near b_min, interior region gives 1. Callers holding injection-convention
/// powers negate before calling.
double adjustment_factor(double b, double p_b, const VBParams& params);

inline double adjustment_factor(const VBState& state, const VBParams& params) {
    return adjustment_factor(state.b, state.p_b, params);
}

}  // namespace gridvb

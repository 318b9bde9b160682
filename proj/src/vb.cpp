#include "gridvb/vb.hpp"

#include <algorithm>

namespace gridvb {

VBState step_continuous(const VBState& state, double p_in, double dt, const VBParams& params) {
    if (!(dt > 0)) throw std::invalid_argument("vb: dt must be positive");
    VBState next = state;

    p_in = std::clamp(p_in, params.p_min, params.p_max);

    double delayed = p_in;
    if (!next.delay_line.empty()) {
        delayed = next.delay_line[next.head];
        next.delay_line[next.head] = p_in;
        next.head = (next.head + 1) % next.delay_line.size();
    }

    const double a = std::exp(-dt / params.tau);
    next.p_b = a * state.p_b + (1.0 - a) * delayed;

    next.b = state.b - dt * (params.alpha_b * state.b + next.p_b) / 3600.0;
    next.saturated = false;
    if (next.b <= params.b_min) {
        next.b = params.b_min;
        next.saturated = true;
        if (next.p_b > 0) next.p_b = 0.0;  // empty store cannot keep injecting
    } else if (next.b >= params.b_max) {
        next.b = params.b_max;
        next.saturated = true;
        if (next.p_b < 0) next.p_b = 0.0;  // full store cannot keep absorbing
    }
    return next;
}

double adjustment_factor(double b, double p_b, const VBParams& params) {
    if (p_b < 0) {
        if (b < params.b_low_thresh) {
            double frac = (b - params.b_min) / (params.b_low_thresh - params.b_min);
            return std::pow(std::max(frac, 0.0), params.w_exp);
        }
        return 1.0;
    }
    if (p_b > 0) {
        if (b > params.b_high_thresh) {
            double frac = (params.b_max - b) / (params.b_max - params.b_high_thresh);
            return std::pow(std::max(frac, 0.0), params.w_exp);
        }
        return 1.0;
    }
    return 1.0;
}

}  // namespace gridvb

#pragma once

#include "gridvb/network.hpp"

namespace gridvb {

struct NotConverged : std::runtime_error {
    double residual;
    NotConverged(const std::string& msg, double res) : std::runtime_error(msg), residual(res) {}
};
struct VoltageCollapse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ACSolution {
    VectorXd v;        // squared voltage per bus, pu^2
    VectorXd l;        // squared current per branch, pu^2
    CVector S;         // sending-end complex flow per branch, pu
    Complex s0;        // head-node injection, pu
    double loss_total = 0.0;  // sum of r*l, pu
    int iterations = 0;
    double residual = 0.0;    // max DistFlow equation violation
};

struct SweepOptions {
    double tol = 1e-10;
    int max_iter = 100;
};

/// Nonlinear DistFlow oracle: backward/forward sweep fixed point solving
/// Eqs. S = s + sum(S_child - z*l_child), v_i = v_parent + 2Re(conj(z)S) - |z|^2 l,
/// l = |S|^2 / v with fixed head voltage v0.
ACSolution solve_ac(const FeederGraph& graph, const CVector& injections,
                    const SweepOptions& opt = {});

/// Re(s0); positive means power flows from the substation into the feeder.
inline double head_node_power(const ACSolution& sol) { return sol.s0.real(); }

}  // namespace gridvb

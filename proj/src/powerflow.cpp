#include "gridvb/powerflow.hpp"

#include <cmath>

namespace gridvb {

ACSolution solve_ac(const FeederGraph& graph, const CVector& injections, const SweepOptions& opt) {
    if (!graph.validated()) throw NetworkError("solve_ac requires a validated graph");
    if (graph.v0 <= 0.0) throw VoltageCollapse("head-node squared voltage must be positive");

    const int n = graph.n_bus();
    const int m = graph.n_branch();

    ACSolution sol;
    sol.v = VectorXd::Constant(n, graph.v0);  // flat start
    sol.l = VectorXd::Zero(m);
    sol.S = CVector::Zero(m);

    CVector S_new = sol.S;
    VectorXd v_new = sol.v;
    CVector downward(n);

    double delta = 0.0;
    int it = 0;
    for (it = 1; it <= opt.max_iter; ++it) {
        // Backward: accumulate flows toward the root, subtracting branch losses.
        downward.setZero();
        for (int i : graph.topo_order()) {
            if (i == 0) continue;
            const int b = graph.parent_branch(i);
            const Branch& br = graph.branches[b];
            Complex S = injections[i] + downward[i];
            double l = std::norm(S) / sol.v[i];
            S_new[b] = S;
            sol.l[b] = l;
            downward[br.to] += S - br.z() * l;
        }
        // Forward: voltages from the root down.
        for (auto it2 = graph.topo_order().rbegin(); it2 != graph.topo_order().rend(); ++it2) {
            int i = *it2;
            if (i == 0) continue;
            const int b = graph.parent_branch(i);
            const Branch& br = graph.branches[b];
            double vp = (br.to == 0) ? graph.v0 : v_new[br.to];
            v_new[i] = vp + 2.0 * (br.r * S_new[b].real() + br.x * S_new[b].imag()) -
                       br.z2 * sol.l[b];
            if (v_new[i] <= 0.0)
                throw VoltageCollapse("squared voltage non-positive at bus " + std::to_string(i));
        }

        delta = (v_new - sol.v).cwiseAbs().maxCoeff();
        for (int b = 0; b < m; ++b)
            delta = std::max(delta, std::abs(S_new[b] - sol.S[b]));
        sol.S = S_new;
        sol.v = v_new;
        if (delta < opt.tol) break;
    }
    if (delta >= opt.tol)
        throw NotConverged("backward/forward sweep did not converge: last update " +
                               std::to_string(delta),
                           delta);

    sol.iterations = it;
    sol.s0 = -downward[0];

    // Residuals of the four DistFlow relations at the fixed point.
    double res = 0.0;
    for (int i = 1; i < n; ++i) {
        const int b = graph.parent_branch(i);
        const Branch& br = graph.branches[b];
        Complex acc = injections[i];
        for (int c : graph.children(i)) {
            const int cb = graph.parent_branch(c);
            acc += sol.S[cb] - graph.branches[cb].z() * sol.l[cb];
        }
        res = std::max(res, std::abs(sol.S[b] - acc));
        double vp = (br.to == 0) ? graph.v0 : sol.v[br.to];
        res = std::max(res, std::abs(sol.v[i] - vp -
                                     2.0 * (br.r * sol.S[b].real() + br.x * sol.S[b].imag()) +
                                     br.z2 * sol.l[b]));
        res = std::max(res, std::abs(sol.l[b] - std::norm(sol.S[b]) / sol.v[i]));
    }
    sol.residual = res;

    sol.loss_total = 0.0;
    for (int b = 0; b < m; ++b) sol.loss_total += graph.branches[b].r * sol.l[b];
    return sol;
}

}  // namespace gridvb

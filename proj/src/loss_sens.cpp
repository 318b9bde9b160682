#include "gridvb/network.hpp"
#include "gridvb/powerflow.hpp"

namespace gridvb {

VectorXd loss_sensitivities(const FeederGraph& graph, const CVector& operating_injections,
                            double h) {
    const int n = graph.n_bus();
    VectorXd zeta = VectorXd::Zero(n);
    CVector s = operating_injections;
    for (int i = 1; i < n; ++i) {
        try {
            s[i] = operating_injections[i] + h;
            double lp = solve_ac(graph, s).loss_total;
            s[i] = operating_injections[i] - h;
            double lm = solve_ac(graph, s).loss_total;
            zeta[i] = (lp - lm) / (2.0 * h);
        } catch (const std::runtime_error& e) {
            throw OracleDiverged("loss sensitivity at bus " + std::to_string(i) + ": " + e.what());
        }
        s[i] = operating_injections[i];
    }
    return zeta;
}

}  // namespace gridvb

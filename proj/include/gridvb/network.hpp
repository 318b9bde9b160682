#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridvb {

using Complex = std::complex<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

/// Thrown by graph validation; `what()` names the offending bus or branch.
struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CycleDetected : NetworkError {
    using NetworkError::NetworkError;
};
struct DisconnectedBus : NetworkError {
    using NetworkError::NetworkError;
};
struct MultipleParents : NetworkError {
    using NetworkError::NetworkError;
};

struct Bus {
    int id = 0;                 // 0 is the head node
    std::string name;           // optional label (e.g. "701")
    double p_load = 0.0;        // nominal active demand, pu
    double q_load = 0.0;        // nominal reactive demand, pu
    double p_solar = 0.0;       // nominal solar injection, pu
    double v_min = 0.9025;      // squared-voltage lower bound, pu^2
    double v_max = 1.1025;      // squared-voltage upper bound, pu^2
    std::optional<int> vb_index;
};

struct Branch {
    int from = 0;  // child bus (sending end)
    int to = 0;    // parent bus, closer to the root
    double r = 0.0;
    double x = 0.0;
    double z2 = 0.0;  // |z|^2 cached

    Complex z() const { return {r, x}; }
};

/// Radial feeder. Immutable after validate(); all queries are pure.
class FeederGraph {
  public:
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    double v0 = 1.0;          // head-node squared voltage, pu^2
    double s_base = 1e6;      // VA
    double v_base = 4800.0;   // V

    int n_bus() const { return static_cast<int>(buses.size()); }
    int n_branch() const { return static_cast<int>(branches.size()); }

    /// Checks that the branch set is a spanning tree rooted at bus 0 and
    /// caches parent pointers plus a leaf-to-root topological order.
    /// Branch orientation is normalized child->parent.
    void validate();

    bool validated() const { return validated_; }

    /// Branch index whose sending end is bus i (i != 0), or -1.
    int parent_branch(int bus) const { return parent_branch_[bus]; }
    int parent(int bus) const { return parent_[bus]; }
    /// Bus indices ordered leaves first, root last.
    const std::vector<int>& topo_order() const { return topo_; }
    const std::vector<int>& children(int bus) const { return children_[bus]; }
    const std::vector<int>& leaves() const { return leaves_; }
    /// Buses on the path from `bus` up to (and excluding) the root.
    std::vector<int> path_to_root(int bus) const;

    double total_load_p() const;
    double total_load_q() const;

  private:
    bool validated_ = false;
    std::vector<int> parent_, parent_branch_, topo_, leaves_;
    std::vector<std::vector<int>> children_;
};

struct LinDistFlowSolution {
    CVector S_hat;   // per branch, pu
    VectorXd v_hat;  // per bus, pu^2
};

/// Lossless linear DistFlow: S_hat sums subtree injections, v_hat accumulates
/// 2 Re(conj(z) S_hat) along the path from the root. Affine in `injections`.
LinDistFlowSolution lindistflow(const FeederGraph& graph, const CVector& injections);

struct OracleDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// d(total loss)/d(p_i) by central finite difference on the AC oracle,
/// step h in pu. Bus 0 entry is 0 by convention.
VectorXd loss_sensitivities(const FeederGraph& graph, const CVector& operating_injections,
                            double h = 1e-4);

/// Net complex injection vector at nominal load/solar (bus 0 entry unused).
CVector nominal_injections(const FeederGraph& graph);

}  // namespace gridvb

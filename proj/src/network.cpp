#include "gridvb/network.hpp"

#include <algorithm>
#include <queue>

namespace gridvb {

void FeederGraph::validate() {
    const int n = n_bus();
    if (n == 0 || buses[0].id != 0)
        throw NetworkError("graph must contain bus 0 as the head node");
    for (int i = 0; i < n; ++i)
        if (buses[i].id != i)
            throw NetworkError("bus ids must be contiguous 0..n-1; got " +
                               std::to_string(buses[i].id) + " at position " + std::to_string(i));
    if (n_branch() != n - 1)
        throw NetworkError("expected " + std::to_string(n - 1) + " branches, got " +
                           std::to_string(n_branch()));

    // Undirected adjacency; orientation is re-derived from the root.
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch idx)
    for (int b = 0; b < n_branch(); ++b) {
        const Branch& br = branches[b];
        if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n || br.from == br.to)
            throw NetworkError("branch " + std::to_string(b) + " references invalid buses");
        adj[br.from].push_back({br.to, b});
        adj[br.to].push_back({br.from, b});
    }

    parent_.assign(n, -1);
    parent_branch_.assign(n, -1);
    children_.assign(n, {});
    std::vector<int> depth(n, -1);
    std::vector<char> branch_used(n_branch(), 0);

    std::queue<int> q;
    q.push(0);
    depth[0] = 0;
    std::vector<int> bfs;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        bfs.push_back(u);
        for (auto [w, b] : adj[u]) {
            if (branch_used[b]) continue;
            branch_used[b] = 1;
            if (depth[w] >= 0) {
                // Reaching an already-visited bus over an unused branch closes a cycle.
                throw CycleDetected("cycle through branch " + std::to_string(b) + " at bus " +
                                    std::to_string(w));
            }
            if (parent_[w] >= 0)
                throw MultipleParents("bus " + std::to_string(w) + " has multiple parents");
            depth[w] = depth[u] + 1;
            parent_[w] = u;
            parent_branch_[w] = b;
            q.push(w);
        }
    }
    for (int i = 0; i < n; ++i)
        if (depth[i] < 0) throw DisconnectedBus("bus " + std::to_string(i) + " unreachable from bus 0");

    // Normalize branch orientation child -> parent.
    for (int i = 1; i < n; ++i) {
        Branch& br = branches[parent_branch_[i]];
        if (br.from != i) std::swap(br.from, br.to);
        br.z2 = br.r * br.r + br.x * br.x;
        children_[parent_[i]].push_back(i);
    }

    topo_.assign(bfs.rbegin(), bfs.rend());  // leaves first, root last
    leaves_.clear();
    for (int i = 1; i < n; ++i)
        if (children_[i].empty()) leaves_.push_back(i);

    for (const Bus& bus : buses)
        if (!(bus.v_min < bus.v_max))
            throw NetworkError("bus " + std::to_string(bus.id) + " has v_min >= v_max");
    if (buses[0].vb_index) throw NetworkError("head node cannot host a VB");

    validated_ = true;
}

std::vector<int> FeederGraph::path_to_root(int bus) const {
    std::vector<int> path;
    for (int i = bus; i != 0; i = parent_[i]) path.push_back(i);
    return path;
}

double FeederGraph::total_load_p() const {
    double s = 0;
    for (const Bus& b : buses) s += b.p_load;
    return s;
}

double FeederGraph::total_load_q() const {
    double s = 0;
    for (const Bus& b : buses) s += b.q_load;
    return s;
}

LinDistFlowSolution lindistflow(const FeederGraph& graph, const CVector& injections) {
    const int n = graph.n_bus();
    LinDistFlowSolution sol;
    sol.S_hat = CVector::Zero(graph.n_branch());
    sol.v_hat = VectorXd::Constant(n, graph.v0);

    // Leaf-to-root accumulation of subtree injections.
    CVector subtree = injections;
    subtree[0] = 0.0;
    for (int i : graph.topo_order()) {
        if (i == 0) continue;
        sol.S_hat[graph.parent_branch(i)] = subtree[i];
        subtree[graph.parent(i)] += subtree[i];
    }
    // Root-to-leaf voltage pass: v_hat_i = v_hat_parent + 2 Re(conj(z) S_hat).
    for (auto it = graph.topo_order().rbegin(); it != graph.topo_order().rend(); ++it) {
        int i = *it;
        if (i == 0) continue;
        const Branch& br = graph.branches[graph.parent_branch(i)];
        sol.v_hat[i] = sol.v_hat[br.to] + 2.0 * (br.r * sol.S_hat[graph.parent_branch(i)].real() +
                                                 br.x * sol.S_hat[graph.parent_branch(i)].imag());
    }
    return sol;
}

CVector nominal_injections(const FeederGraph& graph) {
    CVector s = CVector::Zero(graph.n_bus());
    for (int i = 1; i < graph.n_bus(); ++i) {
        const Bus& b = graph.buses[i];
        s[i] = Complex(b.p_solar - b.p_load, -b.q_load);
    }
    return s;
}

}  // namespace gridvb

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gridvb::conic {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NegativeWeight : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ConeKind { Free, NonNeg, Soc };

struct ConeBlock {
    ConeKind kind;
    int start;
    int dim;
};

/// Sparse affine expression sum(coeff * x[var]) + constant.
struct LinExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    LinExpr() = default;
    LinExpr(double c) : constant(c) {}  // NOLINT
    LinExpr& add(int var, double coeff) {
        if (coeff != 0.0) terms.push_back({var, coeff});
        return *this;
    }
    LinExpr& operator+=(const LinExpr& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    LinExpr& operator*=(double s) {
        for (auto& t : terms) t.second *= s;
        constant *= s;
        return *this;
    }
    static LinExpr var(int i, double coeff = 1.0) { return LinExpr().add(i, coeff); }
};

/// Standard-form cone program: min c'x s.t. Ax = b, x in K, with K a product
/// of free, nonnegative-orthant, and second-order-cone blocks partitioning x.
struct ConicProgram {
    struct Row {
        std::vector<std::pair<int, double>> a;
        double b = 0.0;
    };

    int n = 0;
    std::vector<ConeBlock> cones;
    VectorXd c;  // sized on finalize
    std::vector<double> c_build;
    std::vector<Row> rows;
    std::map<std::string, int> names;
    double obj_constant = 0.0;

    int n_rows() const { return static_cast<int>(rows.size()); }
    int var(const std::string& name) const {
        auto it = names.find(name);
        if (it == names.end()) throw std::out_of_range("conic: unknown variable " + name);
        return it->second;
    }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterLimit };

std::string to_string(SolveStatus s);

struct IterateInfo {
    double pres, dres, relgap, mu, pobj, dobj, step;
};

struct SolverResult {
    SolveStatus status = SolveStatus::IterLimit;
    VectorXd x, y, z;
    double pobj = 0.0, dobj = 0.0;
    double gap = 0.0;  // relative duality gap
    double pres = 0.0, dres = 0.0;
    int iterations = 0;
    std::vector<IterateInfo> trace;
    std::string message;

    double value(const ConicProgram& p, const std::string& name) const { return x[p.var(name)]; }
};

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 200;
    double step_scale = 0.99;
    bool refine = true;
};

/// Primal-dual interior-point method with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector. The KKT systems are solved with dense
/// Cholesky factorizations, one per group of equality rows that share cone
/// variables, plus a dense Schur complement over the free variables.
SolverResult solve(const ConicProgram& prog, const SolverOptions& opt = {});
inline SolverResult solve(const ConicProgram& prog, double tol) {
    SolverOptions opt;
    opt.tol = tol;
    return solve(prog, opt);
}

/// Incremental builder for ConicProgram.
class Model {
  public:
    int free_var(const std::string& name = {});
    int nonneg_var(const std::string& name = {});
    /// Allocates a SOC block x0 >= ||x1:dim||; returns the index of x0.
    int soc_block(int dim, const std::string& name = {});

    void add_eq(const LinExpr& e, double rhs);
    void add_le(const LinExpr& e, double ub);  // e <= ub via nonneg slack
    void add_ge(const LinExpr& e, double lb);  // e >= lb via nonneg slack

    /// Constrains t >= sum_j w_j * e_j^2 through one SOC block and returns
    /// the epigraph variable t. Weights must be nonnegative.
    int quadratic_to_soc(const std::vector<std::pair<double, LinExpr>>& terms,
                         const std::string& name = {});

    /// Norm constraint ||(e_1,...,e_k)|| <= bound (e.g. inverter discs).
    void add_norm_le(const std::vector<LinExpr>& es, double bound);

    void objective(int var, double coeff);
    void objective(const LinExpr& e);  // adds e to the objective

    int n_vars() const { return prog_.n; }
    ConicProgram take();

  private:
    ConicProgram prog_;
    int new_vars(ConeKind kind, int dim, const std::string& name);
};

/// Drops exact-duplicate and all-zero rows in place. A zero row with a
/// nonzero right-hand side is reported through the return value.
struct PresolveInfo {
    int removed = 0;
    bool infeasible_row = false;
};
PresolveInfo presolve(ConicProgram& prog);

/// JSON interchange dump for external cross-checks.
std::string to_json(const ConicProgram& prog);

}  // namespace gridvb::conic

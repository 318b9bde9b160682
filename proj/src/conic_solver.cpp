#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridvb/conic.hpp"

namespace gridvb::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConicBlockView {
    ConeKind kind;
    int start;
    int dim;
};

// Nesterov-Todd scaling for one block. NonNeg blocks hold per-entry w;
// SOC blocks hold eta and the square-root vector v of H(wbar) = 2*wbar*wbar' - J.
struct Scaling {
    VectorXd w;       // nonneg
    double eta = 1.0;  // soc
    VectorXd v;        // soc
};

double soc_res(const VectorXd& u) {
    return u[0] * u[0] - u.tail(u.size() - 1).squaredNorm();
}

// min margin to the cone boundary (positive = strictly interior)
double block_margin(const ConicBlockView& blk, const VectorXd& full) {
    auto u = full.segment(blk.start, blk.dim);
    if (blk.kind == ConeKind::NonNeg) return u.minCoeff();
    return u[0] - u.tail(blk.dim - 1).norm();
}

// largest alpha in [0, cap] with u + alpha*du staying in the cone
double block_max_step(const ConicBlockView& blk, const VectorXd& full, const VectorXd& dfull) {
    auto u = full.segment(blk.start, blk.dim);
    auto du = dfull.segment(blk.start, blk.dim);
    if (blk.kind == ConeKind::NonNeg) {
        double a = kInf;
        for (int i = 0; i < blk.dim; ++i)
            if (du[i] < 0) a = std::min(a, -u[i] / du[i]);
        return a;
    }
    const auto ub = u.tail(blk.dim - 1);
    const auto dub = du.tail(blk.dim - 1);
    const double c0 = u[0] * u[0] - ub.squaredNorm();
    const double b0 = u[0] * du[0] - ub.dot(dub);
    const double a0 = du[0] * du[0] - dub.squaredNorm();
    double bound = kInf;
    if (du[0] < 0) bound = -u[0] / du[0];
    // roots of a0 t^2 + 2 b0 t + c0 = 0; f(0) = c0 > 0 for interior points
    if (std::abs(a0) < 1e-300) {
        if (b0 < 0) bound = std::min(bound, -c0 / (2 * b0));
        return bound;
    }
    const double disc = b0 * b0 - a0 * c0;
    if (disc >= 0) {
        const double sq = std::sqrt(disc);
        for (double r : {(-b0 + sq) / a0, (-b0 - sq) / a0})
            if (r > 0) bound = std::min(bound, r);
    }
    return bound;
}

void jordan_prod(const ConicBlockView& blk, const VectorXd& a, const VectorXd& b, VectorXd& out) {
    auto ua = a.segment(blk.start, blk.dim);
    auto ub = b.segment(blk.start, blk.dim);
    if (blk.kind == ConeKind::NonNeg) {
        out.segment(blk.start, blk.dim) = ua.cwiseProduct(ub);
        return;
    }
    out[blk.start] = ua.dot(ub);
    out.segment(blk.start + 1, blk.dim - 1) =
        ua[0] * ub.tail(blk.dim - 1) + ub[0] * ua.tail(blk.dim - 1);
}

// solves lambda o out = d on one block (arrow-matrix inverse for SOC)
void jordan_div(const ConicBlockView& blk, const VectorXd& lam, const VectorXd& d, VectorXd& out) {
    auto ul = lam.segment(blk.start, blk.dim);
    auto ud = d.segment(blk.start, blk.dim);
    if (blk.kind == ConeKind::NonNeg) {
        out.segment(blk.start, blk.dim) = ud.cwiseQuotient(ul);
        return;
    }
    const auto lt = ul.tail(blk.dim - 1);
    const double det = ul[0] * ul[0] - lt.squaredNorm();
    const double w0 = (ul[0] * ud[0] - lt.dot(ud.tail(blk.dim - 1))) / det;
    out[blk.start] = w0;
    out.segment(blk.start + 1, blk.dim - 1) = (ud.tail(blk.dim - 1) - w0 * lt) / ul[0];
}

}  // namespace

class InteriorPointSolver {
  public:
    InteriorPointSolver(const ConicProgram& prog, const SolverOptions& opt)
        : prog_(prog), opt_(opt) {
        setup();
    }

    SolverResult run();

  private:
    const ConicProgram& prog_;
    SolverOptions opt_;

    int n_ = 0, m_ = 0, n_free_ = 0;
    std::vector<ConicBlockView> cblocks_;        // conic blocks only
    std::vector<int> free_cols_;                 // global indices of free vars
    std::vector<int> free_index_;                // global var -> free slot (-1)
    std::vector<char> var_conic_;
    double degree_ = 0;

    // one dense factorization group per set of rows sharing cone blocks
    struct Component {
        std::vector<int> rows;
        std::vector<int> cone_block_ids;  // into cblocks_
        std::vector<int> conic_cols;      // global var indices, block-contiguous
        std::vector<int> free_local;      // global free-slot ids
        MatrixXd A_cc, A_cf;
        // per-iteration
        MatrixXd M, Hi;
        Eigen::LLT<MatrixXd> llt;
        MatrixXd HinvAcf;
    };
    std::vector<Component> comps_;
    std::vector<int> f0_rows_;  // rows with no conic support
    MatrixXd A_f0_;
    std::vector<int> orphan_blocks_;
    VectorXd b_;
    double bnorm_ = 0, cnorm_ = 0;

    std::vector<Scaling> scal_;
    VectorXd lambda_;
    Eigen::PartialPivLU<MatrixXd> slu_;
    MatrixXd smat_;
    bool unbounded_free_ = false;

    void setup();
    void compute_scaling(const VectorXd& x, const VectorXd& z);
    void identity_scaling();
    void factor();
    void apply_W(const VectorXd& in, VectorXd& out) const;
    void apply_Winv(const VectorXd& in, VectorXd& out) const;
    void apply_A(const VectorXd& x, VectorXd& out) const;
    void apply_AT(const VectorXd& y, VectorXd& out) const;
    void kkt_solve(const VectorXd& rx, const VectorXd& ry, const VectorXd& d, VectorXd& dx,
                   VectorXd& dy, VectorXd& dz) const;
    void kkt_solve_once(const VectorXd& rx, const VectorXd& ry, const VectorXd& d, VectorXd& dx,
                        VectorXd& dy, VectorXd& dz) const;
    double cone_margin(const VectorXd& u) const {
        double m = kInf;
        for (const auto& blk : cblocks_) m = std::min(m, block_margin(blk, u));
        return m;
    }
    double max_step(const VectorXd& u, const VectorXd& du) const {
        double a = kInf;
        for (const auto& blk : cblocks_) a = std::min(a, block_max_step(blk, u, du));
        return a;
    }
};

void InteriorPointSolver::setup() {
    n_ = prog_.n;
    m_ = prog_.n_rows();
    var_conic_.assign(n_, 0);
    free_index_.assign(n_, -1);

    std::vector<int> blocklet(n_, -1);  // coupling id for component detection
    int next_blocklet = 0;
    for (const auto& blk : prog_.cones) {
        if (blk.kind == ConeKind::Free) {
            for (int j = 0; j < blk.dim; ++j) {
                free_index_[blk.start + j] = n_free_++;
                free_cols_.push_back(blk.start + j);
            }
            continue;
        }
        cblocks_.push_back({blk.kind, blk.start, blk.dim});
        if (blk.kind == ConeKind::NonNeg) {
            degree_ += blk.dim;
            for (int j = 0; j < blk.dim; ++j) blocklet[blk.start + j] = next_blocklet++;
        } else {
            degree_ += 1;
            for (int j = 0; j < blk.dim; ++j) blocklet[blk.start + j] = next_blocklet;
            ++next_blocklet;
        }
        for (int j = 0; j < blk.dim; ++j) var_conic_[blk.start + j] = 1;
    }

    // union-find over rows through shared cone blocklets
    std::vector<int> uf(m_);
    std::iota(uf.begin(), uf.end(), 0);
    auto find = [&](int a) {
        while (uf[a] != a) a = uf[a] = uf[uf[a]];
        return a;
    };
    std::vector<int> owner(next_blocklet, -1);
    for (int r = 0; r < m_; ++r) {
        for (const auto& [v, co] : prog_.rows[r].a) {
            (void)co;
            int bl = blocklet[v];
            if (bl < 0) continue;
            if (owner[bl] < 0)
                owner[bl] = r;
            else
                uf[find(owner[bl])] = find(r);
        }
    }

    std::vector<int> comp_of_row(m_, -1);
    std::vector<int> root_to_comp;
    for (int r = 0; r < m_; ++r) {
        bool has_conic = false;
        for (const auto& [v, co] : prog_.rows[r].a) {
            (void)co;
            if (var_conic_[v]) {
                has_conic = true;
                break;
            }
        }
        if (!has_conic) {
            f0_rows_.push_back(r);
            continue;
        }
        int root = find(r);
        int cid = -1;
        for (std::size_t k = 0; k < root_to_comp.size(); ++k)
            if (root_to_comp[k] == root) cid = static_cast<int>(k);
        if (cid < 0) {
            cid = static_cast<int>(root_to_comp.size());
            root_to_comp.push_back(root);
            comps_.push_back({});
        }
        comp_of_row[r] = cid;
        comps_[cid].rows.push_back(r);
    }

    // per-component block and column membership
    std::vector<int> blk_of_var(n_, -1);
    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi)
        for (int j = 0; j < cblocks_[bi].dim; ++j) blk_of_var[cblocks_[bi].start + j] = (int)bi;

    std::vector<char> blk_seen(cblocks_.size(), 0);
    for (auto& comp : comps_) {
        std::fill(blk_seen.begin(), blk_seen.end(), 0);
        std::vector<char> free_seen(n_free_, 0);
        for (int r : comp.rows)
            for (const auto& [v, co] : prog_.rows[r].a) {
                (void)co;
                if (var_conic_[v])
                    blk_seen[blk_of_var[v]] = 1;
                else
                    free_seen[free_index_[v]] = 1;
            }
        for (std::size_t bi = 0; bi < cblocks_.size(); ++bi)
            if (blk_seen[bi]) {
                comp.cone_block_ids.push_back((int)bi);
                for (int j = 0; j < cblocks_[bi].dim; ++j)
                    comp.conic_cols.push_back(cblocks_[bi].start + j);
            }
        for (int f = 0; f < n_free_; ++f)
            if (free_seen[f]) comp.free_local.push_back(f);

        std::vector<int> col_slot(n_, -1), free_slot(n_free_, -1);
        for (std::size_t k = 0; k < comp.conic_cols.size(); ++k) col_slot[comp.conic_cols[k]] = (int)k;
        for (std::size_t k = 0; k < comp.free_local.size(); ++k) free_slot[comp.free_local[k]] = (int)k;
        comp.A_cc = MatrixXd::Zero(comp.rows.size(), comp.conic_cols.size());
        comp.A_cf = MatrixXd::Zero(comp.rows.size(), comp.free_local.size());
        for (std::size_t ri = 0; ri < comp.rows.size(); ++ri)
            for (const auto& [v, co] : prog_.rows[comp.rows[ri]].a) {
                if (var_conic_[v])
                    comp.A_cc(ri, col_slot[v]) += co;
                else
                    comp.A_cf(ri, free_slot[free_index_[v]]) += co;
            }
    }

    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi) {
        bool used = false;
        for (const auto& comp : comps_)
            for (int id : comp.cone_block_ids)
                if (id == (int)bi) used = true;
        if (!used) orphan_blocks_.push_back((int)bi);
    }

    A_f0_ = MatrixXd::Zero(f0_rows_.size(), n_free_);
    for (std::size_t k = 0; k < f0_rows_.size(); ++k)
        for (const auto& [v, co] : prog_.rows[f0_rows_[k]].a) A_f0_(k, free_index_[v]) += co;

    b_.resize(m_);
    for (int r = 0; r < m_; ++r) b_[r] = prog_.rows[r].b;
    bnorm_ = m_ ? b_.norm() : 0.0;
    cnorm_ = prog_.c.norm();

    // a free variable in no row and with a cost coefficient is an unbounded ray
    std::vector<char> free_used(n_free_, 0);
    for (int r = 0; r < m_; ++r)
        for (const auto& [v, co] : prog_.rows[r].a) {
            (void)co;
            if (!var_conic_[v]) free_used[free_index_[v]] = 1;
        }
    for (int f = 0; f < n_free_; ++f)
        if (!free_used[f] && prog_.c[free_cols_[f]] != 0.0) unbounded_free_ = true;

    scal_.resize(cblocks_.size());
}

void InteriorPointSolver::identity_scaling() {
    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi) {
        const auto& blk = cblocks_[bi];
        if (blk.kind == ConeKind::NonNeg) {
            scal_[bi].w = VectorXd::Ones(blk.dim);
        } else {
            scal_[bi].eta = 1.0;
            scal_[bi].v = VectorXd::Zero(blk.dim);
            scal_[bi].v[0] = 1.0;
        }
    }
}

void InteriorPointSolver::compute_scaling(const VectorXd& x, const VectorXd& z) {
    lambda_.resize(n_);
    lambda_.setZero();
    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi) {
        const auto& blk = cblocks_[bi];
        auto xs = x.segment(blk.start, blk.dim);
        auto zs = z.segment(blk.start, blk.dim);
        if (blk.kind == ConeKind::NonNeg) {
            scal_[bi].w = (xs.array() / zs.array()).sqrt();
            lambda_.segment(blk.start, blk.dim) = (xs.array() * zs.array()).sqrt();
            continue;
        }
        const double a = std::sqrt(soc_res(xs));
        const double bb = std::sqrt(soc_res(zs));
        VectorXd xn = xs / a, zn = zs / bb;
        double jdot = xn[0] * zn[0] - xn.tail(blk.dim - 1).dot(zn.tail(blk.dim - 1));
        const double gamma = std::sqrt(0.5 * (1.0 + jdot));
        VectorXd wbar(blk.dim);
        wbar[0] = (xn[0] + zn[0]) / (2 * gamma);
        wbar.tail(blk.dim - 1) =
            (xn.tail(blk.dim - 1) - zn.tail(blk.dim - 1)) / (2 * gamma);
        scal_[bi].eta = std::sqrt(a / bb);
        scal_[bi].v = wbar;
        scal_[bi].v[0] += 1.0;
        scal_[bi].v /= std::sqrt(2.0 * (wbar[0] + 1.0));
        // lambda = W z per block
        const auto& v = scal_[bi].v;
        VectorXd Jz = zs;
        Jz.tail(blk.dim - 1) *= -1.0;
        lambda_.segment(blk.start, blk.dim) = scal_[bi].eta * (2.0 * v * v.dot(zs) - Jz);
    }
}

void InteriorPointSolver::apply_W(const VectorXd& in, VectorXd& out) const {
    out.resize(n_);
    out.setZero();
    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi) {
        const auto& blk = cblocks_[bi];
        auto u = in.segment(blk.start, blk.dim);
        if (blk.kind == ConeKind::NonNeg) {
            out.segment(blk.start, blk.dim) = scal_[bi].w.cwiseProduct(u);
            continue;
        }
        const auto& v = scal_[bi].v;
        VectorXd Ju = u;
        Ju.tail(blk.dim - 1) *= -1.0;
        out.segment(blk.start, blk.dim) = scal_[bi].eta * (2.0 * v * v.dot(u) - Ju);
    }
}

void InteriorPointSolver::apply_Winv(const VectorXd& in, VectorXd& out) const {
    out.resize(n_);
    out.setZero();
    for (std::size_t bi = 0; bi < cblocks_.size(); ++bi) {
        const auto& blk = cblocks_[bi];
        auto u = in.segment(blk.start, blk.dim);
        if (blk.kind == ConeKind::NonNeg) {
            out.segment(blk.start, blk.dim) = u.cwiseQuotient(scal_[bi].w);
            continue;
        }
        // W^-1 = (1/eta) J V J
        const auto& v = scal_[bi].v;
        VectorXd t = u;
        t.tail(blk.dim - 1) *= -1.0;
        VectorXd r = 2.0 * v * v.dot(t) - [&] {
            VectorXd Jt = t;
            Jt.tail(blk.dim - 1) *= -1.0;
            return Jt;
        }();
        r.tail(blk.dim - 1) *= -1.0;
        out.segment(blk.start, blk.dim) = r / scal_[bi].eta;
    }
}

void InteriorPointSolver::apply_A(const VectorXd& x, VectorXd& out) const {
    out = VectorXd::Zero(m_);
    for (const auto& comp : comps_) {
        VectorXd xc(comp.conic_cols.size()), xf(comp.free_local.size());
        for (std::size_t k = 0; k < comp.conic_cols.size(); ++k) xc[k] = x[comp.conic_cols[k]];
        for (std::size_t k = 0; k < comp.free_local.size(); ++k)
            xf[k] = x[free_cols_[comp.free_local[k]]];
        VectorXd r = comp.A_cc * xc + comp.A_cf * xf;
        for (std::size_t k = 0; k < comp.rows.size(); ++k) out[comp.rows[k]] = r[k];
    }
    if (!f0_rows_.empty()) {
        VectorXd xf(n_free_);
        for (int f = 0; f < n_free_; ++f) xf[f] = x[free_cols_[f]];
        VectorXd r = A_f0_ * xf;
        for (std::size_t k = 0; k < f0_rows_.size(); ++k) out[f0_rows_[k]] = r[k];
    }
}

void InteriorPointSolver::apply_AT(const VectorXd& y, VectorXd& out) const {
    out = VectorXd::Zero(n_);
    for (const auto& comp : comps_) {
        VectorXd yc(comp.rows.size());
        for (std::size_t k = 0; k < comp.rows.size(); ++k) yc[k] = y[comp.rows[k]];
        VectorXd rc = comp.A_cc.transpose() * yc;
        VectorXd rf = comp.A_cf.transpose() * yc;
        for (std::size_t k = 0; k < comp.conic_cols.size(); ++k) out[comp.conic_cols[k]] += rc[k];
        for (std::size_t k = 0; k < comp.free_local.size(); ++k)
            out[free_cols_[comp.free_local[k]]] += rf[k];
    }
    if (!f0_rows_.empty()) {
        VectorXd yf(f0_rows_.size());
        for (std::size_t k = 0; k < f0_rows_.size(); ++k) yf[k] = y[f0_rows_[k]];
        VectorXd rf = A_f0_.transpose() * yf;
        for (int f = 0; f < n_free_; ++f) out[free_cols_[f]] += rf[f];
    }
}

void InteriorPointSolver::factor() {
    MatrixXd G = MatrixXd::Zero(n_free_, n_free_);
    for (auto& comp : comps_) {
        const int nr = static_cast<int>(comp.rows.size());
        comp.M.resize(nr, comp.conic_cols.size());
        int col = 0;
        for (int bid : comp.cone_block_ids) {
            const auto& blk = cblocks_[bid];
            const auto& sc = scal_[bid];
            if (blk.kind == ConeKind::NonNeg) {
                for (int j = 0; j < blk.dim; ++j)
                    comp.M.col(col + j) = comp.A_cc.col(col + j) * sc.w[j];
            } else {
                // A*W = eta*(2*(A v) v' - A J)
                VectorXd g = comp.A_cc.middleCols(col, blk.dim) * sc.v;
                comp.M.middleCols(col, blk.dim) =
                    sc.eta * (2.0 * g * sc.v.transpose() - comp.A_cc.middleCols(col, blk.dim));
                comp.M.middleCols(col + 1, blk.dim - 1) +=
                    2.0 * sc.eta * comp.A_cc.middleCols(col + 1, blk.dim - 1);
                // the line above rewrites -A*J: J negates tail columns
            }
            col += blk.dim;
        }
        MatrixXd H = MatrixXd::Zero(nr, nr);
        H.selfadjointView<Eigen::Lower>().rankUpdate(comp.M);
        H = H.selfadjointView<Eigen::Lower>();
        double reg = 1e-13 * (H.trace() / nr + 1.0);
        for (int tries = 0;; ++tries) {
            MatrixXd Hr = H;
            Hr.diagonal().array() += reg;
            comp.llt.compute(Hr);
            if (comp.llt.info() == Eigen::Success) break;
            if (tries > 6) throw NumericalFailure("conic: KKT block factorization failed");
            reg *= 100.0;
        }
        if (comp.free_local.empty()) {
            comp.HinvAcf.resize(nr, 0);
        } else {
            comp.HinvAcf = comp.llt.solve(comp.A_cf);
            MatrixXd Gl = comp.A_cf.transpose() * comp.HinvAcf;
            for (std::size_t a = 0; a < comp.free_local.size(); ++a)
                for (std::size_t b2 = 0; b2 < comp.free_local.size(); ++b2)
                    G(comp.free_local[a], comp.free_local[b2]) += Gl(a, b2);
        }
    }
    const int nf0 = static_cast<int>(f0_rows_.size());
    smat_.resize(n_free_ + nf0, n_free_ + nf0);
    smat_.setZero();
    smat_.topLeftCorner(n_free_, n_free_) = G;
    // tiny regularization keeps inactive free columns solvable
    smat_.topLeftCorner(n_free_, n_free_).diagonal().array() += 1e-12 * (G.trace() / std::max(1, n_free_) + 1.0);
    if (nf0) {
        smat_.topRightCorner(n_free_, nf0) = -A_f0_.transpose();
        smat_.bottomLeftCorner(nf0, n_free_) = A_f0_;
    }
    if (smat_.rows()) slu_.compute(smat_);
}

void InteriorPointSolver::kkt_solve_once(const VectorXd& rx, const VectorXd& ry, const VectorXd& d,
                                         VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
    // q = W d - W^2 rx on conic coordinates
    VectorXd Wd, rxc = rx;
    for (int j = 0; j < n_; ++j)
        if (!var_conic_[j]) rxc[j] = 0.0;
    apply_W(d, Wd);
    VectorXd W2rx, t;
    apply_W(rxc, t);
    apply_W(t, W2rx);
    VectorXd q = Wd - W2rx;

    dx = VectorXd::Zero(n_);
    dy = VectorXd::Zero(m_);
    dz = VectorXd::Zero(n_);

    // per-component r1 and H^{-1} r1
    std::vector<VectorXd> r1(comps_.size()), hr1(comps_.size());
    VectorXd rhsF = VectorXd::Zero(n_free_);
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
        const auto& comp = comps_[ci];
        VectorXd qc(comp.conic_cols.size());
        for (std::size_t k = 0; k < comp.conic_cols.size(); ++k) qc[k] = q[comp.conic_cols[k]];
        VectorXd rr(comp.rows.size());
        for (std::size_t k = 0; k < comp.rows.size(); ++k) rr[k] = ry[comp.rows[k]];
        r1[ci] = rr - comp.A_cc * qc;
        hr1[ci] = comp.llt.solve(r1[ci]);
        if (!comp.free_local.empty()) {
            VectorXd g = comp.A_cf.transpose() * hr1[ci];
            for (std::size_t k = 0; k < comp.free_local.size(); ++k) rhsF[comp.free_local[k]] += g[k];
        }
    }
    for (int f = 0; f < n_free_; ++f) rhsF[f] -= rx[free_cols_[f]];

    VectorXd dxf = VectorXd::Zero(n_free_);
    VectorXd dyf0 = VectorXd::Zero(f0_rows_.size());
    if (smat_.rows()) {
        VectorXd rhs(smat_.rows());
        rhs.head(n_free_) = rhsF;
        for (std::size_t k = 0; k < f0_rows_.size(); ++k) rhs[n_free_ + k] = ry[f0_rows_[k]];
        VectorXd sol = slu_.solve(rhs);
        dxf = sol.head(n_free_);
        for (std::size_t k = 0; k < f0_rows_.size(); ++k) dyf0[k] = sol[n_free_ + k];
    }

    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
        const auto& comp = comps_[ci];
        VectorXd dyc;
        if (comp.free_local.empty()) {
            dyc = hr1[ci];
        } else {
            VectorXd xf(comp.free_local.size());
            for (std::size_t k = 0; k < comp.free_local.size(); ++k)
                xf[k] = dxf[comp.free_local[k]];
            dyc = hr1[ci] - comp.HinvAcf * xf;
        }
        for (std::size_t k = 0; k < comp.rows.size(); ++k) dy[comp.rows[k]] = dyc[k];
    }
    for (std::size_t k = 0; k < f0_rows_.size(); ++k) dy[f0_rows_[k]] = dyf0[k];

    // dz = rx - A' dy on conic coordinates; dx_C = W(d - W dz)
    VectorXd aty;
    apply_AT(dy, aty);
    for (int j = 0; j < n_; ++j)
        if (var_conic_[j]) dz[j] = rx[j] - aty[j];
    VectorXd Wdz, inner;
    apply_W(dz, Wdz);
    inner = d - Wdz;
    VectorXd WxC;
    apply_W(inner, WxC);
    for (int j = 0; j < n_; ++j)
        if (var_conic_[j]) dx[j] = WxC[j];
    for (int f = 0; f < n_free_; ++f) dx[free_cols_[f]] = dxf[f];
}

void InteriorPointSolver::kkt_solve(const VectorXd& rx, const VectorXd& ry, const VectorXd& d,
                                    VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
    kkt_solve_once(rx, ry, d, dx, dy, dz);
    if (!opt_.refine) return;
    // one residual-correction pass
    VectorXd Adx, ATdy;
    apply_A(dx, Adx);
    apply_AT(dy, ATdy);
    VectorXd ey = ry - Adx;
    VectorXd ex = rx - ATdy - dz;
    VectorXd dxC = dx, WinvDx, Wdz2;
    for (int j = 0; j < n_; ++j)
        if (!var_conic_[j]) dxC[j] = 0.0;
    apply_Winv(dxC, WinvDx);
    apply_W(dz, Wdz2);
    VectorXd ed = d - WinvDx - Wdz2;
    VectorXd cx, cy, cz;
    kkt_solve_once(ex, ey, ed, cx, cy, cz);
    dx += cx;
    dy += cy;
    dz += cz;
}

SolverResult InteriorPointSolver::run() {
    SolverResult res;
    res.x = VectorXd::Zero(n_);
    res.y = VectorXd::Zero(m_);
    res.z = VectorXd::Zero(n_);

    if (unbounded_free_) {
        res.status = SolveStatus::Unbounded;
        res.message = "free variable with cost and no constraints";
        return res;
    }
    if (degree_ == 0 && n_free_ == 0) {
        res.status = SolveStatus::Optimal;
        return res;
    }

    VectorXd x(n_), y(m_), z(n_);
    identity_scaling();
    factor();
    {
        VectorXd d0 = VectorXd::Zero(n_), zero_n = VectorXd::Zero(n_), dx, dy, dz;
        kkt_solve(zero_n, b_, d0, dx, dy, dz);
        x = dx;
        kkt_solve(prog_.c, VectorXd::Zero(m_), d0, dx, dy, dz);
        y = dy;
        z = dz;
        for (int j = 0; j < n_; ++j)
            if (!var_conic_[j]) z[j] = 0.0;
        if (!cblocks_.empty()) {
            double mp = cone_margin(x);
            if (mp < 1e-8 * std::max(1.0, x.norm()))
                for (const auto& blk : cblocks_) x[blk.start] += 1.0 - mp;
            double md = cone_margin(z);
            if (md < 1e-8 * std::max(1.0, z.norm()))
                for (const auto& blk : cblocks_) z[blk.start] += 1.0 - md;
        }
    }

    VectorXd rp(m_), rd(n_), aty(n_);
    VectorXd dxa(n_), dya(m_), dza(n_), dx(n_), dy(m_), dz(n_);
    VectorXd ds(n_), d(n_), tmp1(n_), tmp2(n_), tmp3(n_);

    const double tol = opt_.tol;
    for (int iter = 0; iter <= opt_.max_iter; ++iter) {
        VectorXd Ax;
        apply_A(x, Ax);
        rp = b_ - Ax;
        apply_AT(y, aty);
        rd = prog_.c - aty - z;

        double gap = 0.0;
        for (const auto& blk : cblocks_)
            gap += x.segment(blk.start, blk.dim).dot(z.segment(blk.start, blk.dim));
        const double mu = degree_ > 0 ? gap / degree_ : 0.0;
        const double pobj = prog_.c.dot(x);
        const double dobj = m_ ? b_.dot(y) : 0.0;
        const double pres = m_ ? rp.norm() / (1.0 + bnorm_) : 0.0;
        const double dres = rd.norm() / (1.0 + cnorm_);
        const double relgap = gap / std::max(1.0, std::abs(pobj));

        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap))
            throw NumericalFailure("conic: iterate diverged (non-finite residuals) at iteration " +
                                   std::to_string(iter));

        res.iterations = iter;
        res.pobj = pobj + prog_.obj_constant;
        res.dobj = dobj + prog_.obj_constant;
        res.pres = pres;
        res.dres = dres;
        res.gap = relgap;
        res.trace.push_back({pres, dres, relgap, mu, pobj, dobj, 0.0});

        if (pres <= tol && dres <= tol && relgap <= tol) {
            res.status = SolveStatus::Optimal;
            break;
        }
        // infeasibility / unboundedness certificates
        const double bty = m_ ? b_.dot(y) : 0.0;
        if (bty > 1e-8 * (1.0 + bnorm_)) {
            VectorXd cert = aty + z;  // should vanish for a Farkas certificate
            if (cert.norm() / bty <= 1e-8 * (1.0 + cnorm_)) {
                res.status = SolveStatus::Infeasible;
                res.message = "primal infeasibility certificate found";
                break;
            }
        }
        const double ctx = -prog_.c.dot(x);
        if (ctx > 1e-8 * (1.0 + cnorm_)) {
            if ((m_ ? Ax.norm() : 0.0) / ctx <= 1e-8 * (1.0 + bnorm_) &&
                cone_margin(x) > -1e-10 * x.norm()) {
                res.status = SolveStatus::Unbounded;
                res.message = "unbounded ray found";
                break;
            }
        }
        if (iter == opt_.max_iter) {
            res.status = SolveStatus::IterLimit;
            break;
        }

        compute_scaling(x, z);
        factor();

        // affine direction: d = -lambda
        d = -lambda_;
        kkt_solve(rd, rp, d, dxa, dya, dza);

        double ap = max_step(x, dxa);
        double ad = max_step(z, dza);
        double alpha_aff = std::min({1.0, ap, ad});
        double gap_aff = 0.0;
        for (const auto& blk : cblocks_)
            gap_aff += (x + alpha_aff * dxa).segment(blk.start, blk.dim)
                           .dot((z + alpha_aff * dza).segment(blk.start, blk.dim));
        double sigma = mu > 0 ? std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3.0) : 0.0;

        // combined direction with Mehrotra correction in the scaled space
        VectorXd WinvDxa, Wdza;
        {
            VectorXd dxac = dxa;
            for (int j = 0; j < n_; ++j)
                if (!var_conic_[j]) dxac[j] = 0.0;
            apply_Winv(dxac, WinvDxa);
            apply_W(dza, Wdza);
        }
        ds.setZero();
        for (const auto& blk : cblocks_) {
            VectorXd corr = VectorXd::Zero(n_);
            jordan_prod(blk, WinvDxa, Wdza, corr);
            VectorXd target = VectorXd::Zero(n_);
            jordan_prod(blk, lambda_, lambda_, target);
            target.segment(blk.start, blk.dim) =
                -target.segment(blk.start, blk.dim) - corr.segment(blk.start, blk.dim);
            target[blk.start] += sigma * mu * (blk.kind == ConeKind::NonNeg ? 0.0 : 1.0);
            if (blk.kind == ConeKind::NonNeg)
                target.segment(blk.start, blk.dim).array() += sigma * mu;
            jordan_div(blk, lambda_, target, ds);
        }
        kkt_solve(rd, rp, ds, dx, dy, dz);

        ap = max_step(x, dx);
        ad = max_step(z, dz);
        double alpha = std::min(1.0, opt_.step_scale * std::min(ap, ad));
        if (!std::isfinite(alpha) || alpha <= 0)
            throw NumericalFailure("conic: no progress possible (step " + std::to_string(alpha) +
                                   ")");
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        res.trace.back().step = alpha;
    }

    res.x = x;
    res.y = y;
    res.z = z;
    return res;
}

SolverResult solve(const ConicProgram& prog, const SolverOptions& opt) {
    ConicProgram work = prog;
    PresolveInfo pi = presolve(work);
    if (pi.infeasible_row) {
        SolverResult r;
        r.status = SolveStatus::Infeasible;
        r.message = "presolve: zero row with nonzero right-hand side";
        r.x = VectorXd::Zero(prog.n);
        r.z = VectorXd::Zero(prog.n);
        return r;
    }
    InteriorPointSolver ipm(work, opt);
    return ipm.run();
}

}  // namespace gridvb::conic

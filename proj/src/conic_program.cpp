#include "gridvb/conic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridvb::conic {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterLimit: return "iteration_limit";
    }
    return "?";
}

int Model::new_vars(ConeKind kind, int dim, const std::string& name) {
    int start = prog_.n;
    prog_.cones.push_back({kind, start, dim});
    prog_.n += dim;
    prog_.c_build.resize(prog_.n, 0.0);
    if (!name.empty()) prog_.names[name] = start;
    return start;
}

int Model::free_var(const std::string& name) { return new_vars(ConeKind::Free, 1, name); }
int Model::nonneg_var(const std::string& name) { return new_vars(ConeKind::NonNeg, 1, name); }

int Model::soc_block(int dim, const std::string& name) {
    if (dim < 2) throw std::invalid_argument("conic: SOC block needs dim >= 2");
    return new_vars(ConeKind::Soc, dim, name);
}

void Model::add_eq(const LinExpr& e, double rhs) {
    ConicProgram::Row row;
    row.b = rhs - e.constant;
    // Merge repeated variables so rows are canonical.
    std::vector<std::pair<int, double>> terms = e.terms;
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [v, co] : terms) {
        if (!row.a.empty() && row.a.back().first == v)
            row.a.back().second += co;
        else
            row.a.push_back({v, co});
    }
    std::erase_if(row.a, [](const auto& t) { return t.second == 0.0; });
    prog_.rows.push_back(std::move(row));
}

void Model::add_le(const LinExpr& e, double ub) {
    int s = nonneg_var();
    LinExpr row = e;
    row.add(s, 1.0);
    add_eq(row, ub);
}

void Model::add_ge(const LinExpr& e, double lb) {
    int s = nonneg_var();
    LinExpr row = e;
    row.add(s, -1.0);
    add_eq(row, lb);
}

int Model::quadratic_to_soc(const std::vector<std::pair<double, LinExpr>>& terms,
                            const std::string& name) {
    for (const auto& [w, e] : terms)
        if (w < 0.0) throw NegativeWeight("quadratic_to_soc: negative weight " + std::to_string(w));
    int t = free_var(name);
    // (t+1, t-1, 2*sqrt(w_j)*e_j) in a second-order cone gives t >= sum w_j e_j^2.
    int u = soc_block(2 + static_cast<int>(terms.size()));
    add_eq(LinExpr::var(u).add(t, -1.0), 1.0);
    add_eq(LinExpr::var(u + 1).add(t, -1.0), -1.0);
    for (std::size_t j = 0; j < terms.size(); ++j) {
        LinExpr e = terms[j].second;
        e *= -2.0 * std::sqrt(terms[j].first);
        e.add(u + 2 + static_cast<int>(j), 1.0);
        add_eq(e, 0.0);
    }
    return t;
}

void Model::add_norm_le(const std::vector<LinExpr>& es, double bound) {
    int u = soc_block(1 + static_cast<int>(es.size()));
    add_eq(LinExpr::var(u), bound);
    for (std::size_t j = 0; j < es.size(); ++j) {
        LinExpr e = es[j];
        e *= -1.0;
        e.add(u + 1 + static_cast<int>(j), 1.0);
        add_eq(e, 0.0);
    }
}

void Model::objective(int var, double coeff) { prog_.c_build[var] += coeff; }

void Model::objective(const LinExpr& e) {
    for (const auto& [v, co] : e.terms) prog_.c_build[v] += co;
    prog_.obj_constant += e.constant;
}

ConicProgram Model::take() {
    prog_.c = Eigen::Map<const VectorXd>(prog_.c_build.data(), prog_.n);
    return std::move(prog_);
}

PresolveInfo presolve(ConicProgram& prog) {
    PresolveInfo info;
    std::vector<ConicProgram::Row> kept;
    kept.reserve(prog.rows.size());
    // Exact-duplicate detection via a sorted key of the row contents.
    std::vector<std::string> keys;
    for (const auto& row : prog.rows) {
        if (row.a.empty()) {
            if (std::abs(row.b) > 1e-300) info.infeasible_row = true;
            ++info.removed;
            continue;
        }
        std::ostringstream key;
        for (const auto& [v, co] : row.a) key << v << ':' << co << ';';
        key << '=' << row.b;
        if (std::find(keys.begin(), keys.end(), key.str()) != keys.end()) {
            ++info.removed;
            continue;
        }
        keys.push_back(key.str());
        kept.push_back(row);
    }
    prog.rows = std::move(kept);
    return info;
}

std::string to_json(const ConicProgram& prog) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"n\":" << prog.n << ",\"cones\":[";
    for (std::size_t i = 0; i < prog.cones.size(); ++i) {
        const auto& blk = prog.cones[i];
        const char* kind = blk.kind == ConeKind::Free    ? "free"
                           : blk.kind == ConeKind::NonNeg ? "nonneg"
                                                          : "soc";
        os << (i ? "," : "") << "{\"kind\":\"" << kind << "\",\"dim\":" << blk.dim << "}";
    }
    os << "],\"c\":[";
    for (int i = 0; i < prog.n; ++i) os << (i ? "," : "") << prog.c[i];
    os << "],\"rows\":[";
    for (std::size_t r = 0; r < prog.rows.size(); ++r) {
        os << (r ? "," : "") << "{\"a\":[";
        for (std::size_t k = 0; k < prog.rows[r].a.size(); ++k)
            os << (k ? "," : "") << "[" << prog.rows[r].a[k].first << ","
               << prog.rows[r].a[k].second << "]";
        os << "],\"b\":" << prog.rows[r].b << "}";
    }
    os << "]}";
    return os.str();
}

}  // namespace gridvb::conic

#include "gridvb/stability.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace gridvb::stab {

namespace {

VectorXd strip_leading(const VectorXd& p) {
    double scale = p.cwiseAbs().maxCoeff();
    int i = 0;
    while (i < p.size() - 1 && std::abs(p[i]) <= 1e-14 * scale) ++i;
    return p.tail(p.size() - i);
}

}  // namespace

VectorXd poly_mul(const VectorXd& a, const VectorXd& b) {
    VectorXd out = VectorXd::Zero(a.size() + b.size() - 1);
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

VectorXd poly_add(const VectorXd& a, const VectorXd& b) {
    int n = static_cast<int>(std::max(a.size(), b.size()));
    VectorXd out = VectorXd::Zero(n);
    out.tail(a.size()) = a;
    out.tail(b.size()) += b;
    return out;
}

std::vector<Cx> poly_roots(const VectorXd& coeffs) {
    VectorXd p = strip_leading(coeffs);
    const int deg = static_cast<int>(p.size()) - 1;
    if (deg < 1) return {};
    MatrixXd comp = MatrixXd::Zero(deg, deg);
    for (int i = 0; i < deg; ++i) comp(0, i) = -p[i + 1] / p[0];
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<MatrixXd> es(comp, false);
    std::vector<Cx> roots(deg);
    for (int i = 0; i < deg; ++i) roots[i] = es.eigenvalues()[i];
    return roots;
}

RationalTF RationalTF::constant(double k) {
    RationalTF tf;
    tf.num = VectorXd::Constant(1, k);
    tf.den = VectorXd::Constant(1, 1.0);
    return tf;
}

RationalTF RationalTF::operator*(const RationalTF& o) const {
    return {poly_mul(num, o.num), poly_mul(den, o.den)};
}

RationalTF RationalTF::operator+(const RationalTF& o) const {
    return {poly_add(poly_mul(num, o.den), poly_mul(o.num, den)), poly_mul(den, o.den)};
}

RationalTF RationalTF::feedback_unity() const { return {num, poly_add(den, num)}; }

Cx RationalTF::eval(Cx s) const {
    auto horner = [&](const VectorXd& p) {
        Cx acc = 0.0;
        for (int i = 0; i < p.size(); ++i) acc = acc * s + p[i];
        return acc;
    };
    return horner(num) / horner(den);
}

double RationalTF::dc_gain() const { return num[num.size() - 1] / den[den.size() - 1]; }

std::vector<Cx> RationalTF::poles() const { return poly_roots(den); }

int RationalTF::degree() const { return static_cast<int>(strip_leading(den).size()) - 1; }

RationalTF pade3(double t_delay) {
    if (t_delay < 0) throw std::invalid_argument("pade3: negative delay");
    if (t_delay == 0.0) return RationalTF::constant(1.0);
    const double T = t_delay;
    RationalTF tf;
    tf.num = VectorXd(4);
    tf.den = VectorXd(4);
    tf.num << -T * T * T, 12 * T * T, -60 * T, 120;
    tf.den << T * T * T, 12 * T * T, 60 * T, 120;
    return tf;
}

double phase_margin(const RationalTF& open_loop) {
    // log scan for |G| crossing 1, with unwrapped phase along the way
    const int N = 4000;
    const double w_lo = 1e-5, w_hi = 1e4;
    double prev_mag = std::abs(open_loop.eval(Cx(0, w_lo)));
    double prev_phase = std::arg(open_loop.eval(Cx(0, w_lo)));
    double phase_acc = prev_phase;
    double prev_w = w_lo;
    for (int i = 1; i <= N; ++i) {
        double w = w_lo * std::pow(w_hi / w_lo, double(i) / N);
        Cx g = open_loop.eval(Cx(0, w));
        double mag = std::abs(g);
        double ph = std::arg(g);
        double d = ph - prev_phase;
        while (d > M_PI) d -= 2 * M_PI;
        while (d < -M_PI) d += 2 * M_PI;
        phase_acc += d;
        prev_phase = ph;
        if (prev_mag > 1.0 && mag <= 1.0) {
            // bisection on log|G| in [prev_w, w]
            double a = prev_w, b = w;
            for (int it = 0; it < 80; ++it) {
                double mid = std::sqrt(a * b);
                if (std::abs(open_loop.eval(Cx(0, mid))) > 1.0)
                    a = mid;
                else
                    b = mid;
            }
            double wc = std::sqrt(a * b);
            // unwrapped phase at wc: continue accumulation from w back to wc
            double d2 = std::arg(open_loop.eval(Cx(0, wc))) - prev_phase;
            while (d2 > M_PI) d2 -= 2 * M_PI;
            while (d2 < -M_PI) d2 += 2 * M_PI;
            return (phase_acc + d2) * 180.0 / M_PI + 180.0;
        }
        prev_mag = mag;
        prev_w = w;
    }
    return std::numeric_limits<double>::infinity();  // no crossover
}

double settling_time(const RationalTF& closed_loop, double band) {
    VectorXd den = strip_leading(closed_loop.den);
    VectorXd num = strip_leading(closed_loop.num);
    const int n = static_cast<int>(den.size()) - 1;
    if (static_cast<int>(num.size()) - 1 > n)
        throw std::invalid_argument("settling_time: improper transfer function");

    auto ps = poly_roots(den);
    double slowest = std::numeric_limits<double>::infinity();
    for (auto p : ps) {
        if (p.real() >= -1e-12) throw Unstable("settling_time: pole at Re >= 0");
        slowest = std::min(slowest, -p.real());
    }
    if (n == 0) return 0.0;

    // controllable canonical form, denominator made monic
    VectorXd numpad = VectorXd::Zero(n + 1);
    numpad.tail(num.size()) = num / den[0];
    den /= den[0];

    const double d_feed = numpad[0];
    MatrixXd A = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) A(0, i) = -den[i + 1];
    for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
    VectorXd B = VectorXd::Zero(n);
    B[0] = 1.0;
    Eigen::RowVectorXd C(n);
    for (int i = 0; i < n; ++i) C[i] = numpad[i + 1] - d_feed * den[i + 1];

    const double y_inf = closed_loop.dc_gain();
    const double t_end = std::max(20.0 / slowest, 1.0);
    const double tol_abs = 1e-9 * std::max(1.0, std::abs(y_inf));
    const double h_max = t_end / 2000.0;

    // adaptive RK45 (Cash-Karp pair), tracking the last band excursion
    VectorXd x = VectorXd::Zero(n);
    double t = 0.0, h = h_max / 8.0;
    double last_outside = 0.0;
    const double thr = band * std::max(std::abs(y_inf), 1e-12);
    auto f = [&](const VectorXd& xx) -> VectorXd { return A * xx + B; };  // unit step input
    auto y_of = [&](const VectorXd& xx) { return (C * xx)(0) + d_feed; };
    if (std::abs(y_of(x) - y_inf) > thr) last_outside = 0.0;
    while (t < t_end) {
        h = std::min({h, h_max, t_end - t});
        VectorXd k1 = f(x);
        VectorXd k2 = f(x + h * 0.2 * k1);
        VectorXd k3 = f(x + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
        VectorXd k4 = f(x + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
        VectorXd k5 = f(x + h * (-11.0 / 54 * k1 + 2.5 * k2 - 70.0 / 27 * k3 + 35.0 / 27 * k4));
        VectorXd k6 = f(x + h * (1631.0 / 55296 * k1 + 175.0 / 512 * k2 + 575.0 / 13824 * k3 +
                                 44275.0 / 110592 * k4 + 253.0 / 4096 * k5));
        VectorXd x5 = x + h * (37.0 / 378 * k1 + 250.0 / 621 * k3 + 125.0 / 594 * k4 +
                               512.0 / 1771 * k6);
        VectorXd x4 = x + h * (2825.0 / 27648 * k1 + 18575.0 / 48384 * k3 + 13525.0 / 55296 * k4 +
                               277.0 / 14336 * k5 + 0.25 * k6);
        double err = (x5 - x4).norm();
        if (err > tol_abs && h > 1e-12 * t_end) {
            h *= std::max(0.2, 0.9 * std::pow(tol_abs / err, 0.25));
            continue;
        }
        x = x5;
        t += h;
        if (err > 0) h *= std::min(5.0, 0.9 * std::pow(tol_abs / err, 0.2));
        if (std::abs(y_of(x) - y_inf) > thr) last_outside = t;
    }
    return last_outside;
}

std::vector<std::vector<bool>> stability_region(const TwoVBPlant& plant,
                                                const std::vector<double>& k1_grid,
                                                const std::vector<double>& k2_grid,
                                                double delay1, double delay2, int n_threads) {
    // characteristic polynomial 1 + a1 k1 h1 D1 + a2 k2 h2 D2 = 0 over a
    // common denominator; the k-independent pieces are precomputed.
    RationalTF lag1{VectorXd::Constant(1, 1.0), (VectorXd(2) << plant.tau1, 1.0).finished()};
    RationalTF lag2{VectorXd::Constant(1, 1.0), (VectorXd(2) << plant.tau2, 1.0).finished()};
    RationalTF g1 = lag1 * pade3(delay1);
    RationalTF g2 = lag2 * pade3(delay2);

    VectorXd p0 = poly_mul(g1.den, g2.den);
    VectorXd q1 = poly_mul(g1.num, g2.den) * plant.a1;
    VectorXd q2 = poly_mul(g2.num, g1.den) * plant.a2;

    std::vector<std::vector<bool>> grid(k1_grid.size(), std::vector<bool>(k2_grid.size(), false));
    auto work = [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            for (std::size_t j = 0; j < k2_grid.size(); ++j) {
                VectorXd ch = poly_add(p0, poly_add(q1 * k1_grid[i], q2 * k2_grid[j]));
                bool stable = true;
                for (auto r : poly_roots(ch))
                    if (r.real() >= -1e-9) stable = false;
                grid[i][j] = stable;
            }
    };
    n_threads = std::max(1, n_threads);
    if (n_threads == 1 || k1_grid.size() < 8) {
        work(0, k1_grid.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (k1_grid.size() + n_threads - 1) / n_threads;
        for (int th = 0; th < n_threads; ++th) {
            std::size_t a = th * chunk, b = std::min(k1_grid.size(), (th + 1) * chunk);
            if (a < b) pool.emplace_back(work, a, b);
        }
        for (auto& th : pool) th.join();
    }
    return grid;
}

}  // namespace gridvb::stab

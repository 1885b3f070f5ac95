#include "admp/lpbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "admp/errors.hpp"

namespace admp {

namespace {

constexpr double kBisectTol = 1e-10;
constexpr int kBisectMaxIters = 200;

double clip01(double x) { return std::min(1.0, std::max(0.0, x)); }

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains non-finite values");
}

}  // namespace

std::vector<double> project_box_simplex(const std::vector<double>& v, int t) {
    const int n = static_cast<int>(v.size());
    if (t < 0 || t > n)
        throw InfeasibleError("cardinality " + std::to_string(t) + " infeasible for length " +
                              std::to_string(n));
    check_finite(v, "projection input");
    if (t == 0) return std::vector<double>(v.size(), 0.0);
    if (t == n) return std::vector<double>(v.size(), 1.0);

    const auto mass = [&v](double lambda) {
        double s = 0.0;
        for (double x : v) s += clip01(x - lambda);
        return s;
    };
    double lo = *std::min_element(v.begin(), v.end()) - 1.0;
    double hi = *std::max_element(v.begin(), v.end());
    for (int it = 0; it < kBisectMaxIters && hi - lo > kBisectTol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass(mid) > static_cast<double>(t))
            lo = mid;
        else
            hi = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    std::vector<double> z(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) z[i] = clip01(v[i] - lambda);
    return z;
}

std::vector<double> project_sphere(const std::vector<double>& v) {
    check_finite(v, "projection input");
    const std::size_t n = v.size();
    const double radius = 0.5 * std::sqrt(static_cast<double>(n));
    double norm = 0.0;
    for (double x : v) norm += (x - 0.5) * (x - 0.5);
    norm = std::sqrt(norm);
    std::vector<double> z(n, 0.5);
    if (norm == 0.0) {
        // center is equidistant from the whole sphere; pick the first axis
        z[0] += radius;
        return z;
    }
    const double scale = radius / norm;
    for (std::size_t i = 0; i < n; ++i) z[i] = 0.5 + scale * (v[i] - 0.5);
    return z;
}

AdmmState init_admm_state(int n, int t, double rho, const std::vector<double>& m0) {
    if (n <= 0) throw ConfigError("mask length must be positive");
    if (t <= 0 || t > n)
        throw InfeasibleError("cardinality target must lie in (0, n]");
    if (rho <= 0.0) throw ConfigError("penalty rho must be positive");
    if (static_cast<int>(m0.size()) != n) throw DimensionError("mask length mismatch");
    AdmmState s;
    s.n = n;
    s.t = t;
    s.rho = rho;
    s.z1 = project_box_simplex(m0, t);
    s.z2 = project_sphere(m0);
    s.u1.assign(m0.size(), 0.0);
    s.u2.assign(m0.size(), 0.0);
    return s;
}

AdmmState admm_refresh(const AdmmState& state, const std::vector<double>& m_s) {
    if (static_cast<int>(m_s.size()) != state.n)
        throw DimensionError("admm_refresh: mask length mismatch");
    check_finite(m_s, "mask");
    AdmmState next = state;
    std::vector<double> shifted(m_s.size());
    for (std::size_t i = 0; i < m_s.size(); ++i)
        shifted[i] = m_s[i] + (state.rho > 0.0 ? state.u1[i] / state.rho : 0.0);
    next.z1 = project_box_simplex(shifted, state.t);
    for (std::size_t i = 0; i < m_s.size(); ++i)
        shifted[i] = m_s[i] + (state.rho > 0.0 ? state.u2[i] / state.rho : 0.0);
    next.z2 = project_sphere(shifted);
    for (std::size_t i = 0; i < m_s.size(); ++i) {
        next.u1[i] = state.u1[i] + (m_s[i] - next.z1[i]);
        next.u2[i] = state.u2[i] + (m_s[i] - next.z2[i]);
    }
    return next;
}

std::vector<double> admm_penalty_gradient(const AdmmState& state,
                                          const std::vector<double>& m_s) {
    if (static_cast<int>(m_s.size()) != state.n)
        throw DimensionError("admm_penalty_gradient: mask length mismatch");
    std::vector<double> g(m_s.size());
    for (std::size_t i = 0; i < m_s.size(); ++i)
        g[i] = state.u1[i] + state.u2[i] + state.rho * (m_s[i] - state.z1[i]) +
               state.rho * (m_s[i] - state.z2[i]);
    return g;
}

BinaryProgramResult solve_binary_program(const std::vector<double>& v, int t,
                                         const BinaryProgramConfig& config) {
    const int n = static_cast<int>(v.size());
    if (n == 0 || n > 20) throw ConfigError("solve_binary_program supports 1 <= n <= 20");
    if (t <= 0 || t > n) throw InfeasibleError("cardinality target must lie in (0, n]");
    check_finite(v, "objective target");

    std::vector<double> m = project_box_simplex(v, t);
    AdmmState state = init_admm_state(n, t, config.rho_init, m);

    BinaryProgramResult result;
    for (int it = 1; it <= config.max_iters; ++it) {
        result.iterations = it;
        const std::vector<double> penalty = admm_penalty_gradient(state, m);
        for (int i = 0; i < n; ++i) m[i] -= config.lr * (2.0 * (m[i] - v[i]) + penalty[i]);
        state = admm_refresh(state, m);
        if (it % config.rho_every == 0)
            state.rho = std::min(state.rho * config.rho_growth, config.rho_max);

        double residual = 0.0;
        for (int i = 0; i < n; ++i)
            residual += std::abs(m[i] - state.z1[i]) + std::abs(m[i] - state.z2[i]);
        if (residual < config.tol) {
            result.converged = true;
            break;
        }
    }

    // round to the top-t coordinates, ties to the lowest index
    std::vector<int> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&m](int a, int b) {
        if (m[a] != m[b]) return m[a] > m[b];
        return a < b;
    });
    result.solution.assign(m.size(), 0.0);
    for (int i = 0; i < t; ++i) result.solution[static_cast<std::size_t>(order[i])] = 1.0;
    return result;
}

}  // namespace admp

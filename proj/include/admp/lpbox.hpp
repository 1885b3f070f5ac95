#pragma once

#include <vector>

namespace admp {

// Splitting state for one mask vector under the binary-constraint
// reformulation {0,1}^n = [0,1]^n ∩ {z : ||z - 1/2||^2 = n/4} with a
// cardinality-t hyperplane on the box side.
struct AdmmState {
    int n = 0;
    int t = 0;           // cardinality target, 0 < t <= n
    double rho = 1.0;    // penalty
    std::vector<double> z1, z2;  // auxiliary variables
    std::vector<double> u1, u2;  // scaled duals
};

AdmmState init_admm_state(int n, int t, double rho, const std::vector<double>& m0);

// Euclidean projection onto [0,1]^n ∩ {sum z = t}, by bisection on the shift
// multiplier with z_i = clip(v_i - lambda, 0, 1).
std::vector<double> project_box_simplex(const std::vector<double>& v, int t);

// Projection onto the sphere ||z - 1/2||^2 = n/4. The center itself maps to
// center + (sqrt(n)/2) * e1.
std::vector<double> project_sphere(const std::vector<double>& v);

// One (z1, z2, u1, u2) refresh around the current mask value:
//   z1 = P_box_simplex(m + u1/rho), z2 = P_sphere(m + u2/rho), u += m - z.
AdmmState admm_refresh(const AdmmState& state, const std::vector<double>& m_s);

// Gradient of the augmented penalty terms with respect to the mask:
//   u1 + u2 + rho (m - z1) + rho (m - z2).
std::vector<double> admm_penalty_gradient(const AdmmState& state, const std::vector<double>& m_s);

struct BinaryProgramConfig {
    int max_iters = 500;
    double lr = 0.1;
    double rho_init = 1.0;
    double rho_growth = 1.05;
    int rho_every = 25;
    double rho_max = 50.0;
    double tol = 1e-6;
};

struct BinaryProgramResult {
    std::vector<double> solution;  // binary, exactly t ones
    bool converged = false;
    int iterations = 0;
};

// Standalone solver for min ||m - v||^2 over binary vectors with exactly t
// ones. Exercises the full refresh/gradient machinery end to end; feasible
// output regardless of convergence (rounded to the top-t coordinates).
BinaryProgramResult solve_binary_program(const std::vector<double>& v, int t,
                                         const BinaryProgramConfig& config = {});

}  // namespace admp

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace admp {

// Reference implementations kept deliberately independent of the production
// code paths they check. Used by the test suites and the CLI selftest.
namespace oracles {

// Exact projection onto [0,1]^n ∩ {sum = t} by enumerating every clip
// pattern (lower bound / free / upper bound per coordinate). n <= 8.
std::vector<double> enum_project_box_simplex(const std::vector<double>& v, int t);

// Exhaustive minimizer of ||m - v||^2 over binary vectors with exactly t ones.
std::vector<double> exhaustive_binary_minimize(const std::vector<double>& v, int t);

// Central finite differences of a scalar function.
std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x, double h = 1e-5);

// Relative error with a small floor so that near-zero gradients compare on
// an absolute scale.
double gradient_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct SuiteResult {
    std::string name;
    int checked = 0;
    int failed = 0;
    double worst = 0.0;  // suite-specific error measure
    bool passed() const { return failed == 0; }
};

// Projection oracle suite: box-simplex projections against the enumeration
// oracle plus sphere-projection invariants.
SuiteResult run_projection_suite(int instances, std::uint64_t seed);

// Gradient oracle suite: finite differences against analytic gradients for
// every layer kind and every objective.
SuiteResult run_gradient_suite(int trials, std::uint64_t seed);

// Binary-program suite: solver answers against exhaustive search. Passes when
// at least `min_match_fraction` of instances hit the exact optimum.
SuiteResult run_binary_program_suite(int instances, std::uint64_t seed,
                                     double min_match_fraction = 0.95);

}  // namespace oracles
}  // namespace admp

#ifndef PPOB_BARRIER_HPP_
#define PPOB_BARRIER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "ppob/common.hpp"

namespace ppob {

// 1-D inequality-constrained problem: minimize f(x) subject to c_i(x) >= 0,
// handled through the combined objective P(x; mu) = f(x) - mu * sum ln c_i(x).
struct BarrierProblem {
  std::function<double(double)> objective;
  std::vector<std::function<double(double)>> constraints;
  double mu = 1.0;
};

// min x  s.t.  x - 1 >= 0,  2 - x >= 0, the shipped demonstration fixture.
BarrierProblem default_barrier_problem(double mu);

struct BarrierCurve {
  double mu = 0.0;
  std::vector<double> xs;
  std::vector<double> values;   // P(x; mu) per grid point
  double minimizer = 0.0;       // x(mu)
  double min_value = 0.0;       // P(x(mu); mu)
  int search_iterations = 0;    // golden-section shrink count
};

// f(x) - mu * sum ln c_i(x). Infeasible x raises DomainError naming the
// violated constraint. mu = 0 is allowed here (P degenerates to f).
double eval_P(const BarrierProblem& problem, double x);

// Golden-section search on [lo, hi] down to a bracket of 1e-10; requires a
// strictly feasible bracket and unimodal P (true for the shipped fixture).
double minimize_P(const BarrierProblem& problem, double lo, double hi,
                  int* iterations = nullptr);

// Samples P on a uniform grid strictly inside (lo, hi) for each mu and
// locates the per-mu minimizer. Grid endpoints keep a margin of 1e-6.
std::vector<BarrierCurve> emit_curves(const std::function<double(double)>& objective,
                                      const std::vector<std::function<double(double)>>& constraints,
                                      const std::vector<double>& mus, int grid_size, double lo,
                                      double hi);

// Figure-style CSV: x, P(x;mu_1), P(x;mu_2), ...
void write_curves_csv(const std::vector<BarrierCurve>& curves, const std::string& path);

}  // namespace ppob

#endif  // PPOB_BARRIER_HPP_

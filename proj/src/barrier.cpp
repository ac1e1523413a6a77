#include "ppob/barrier.hpp"

#include <cmath>
#include <cstdio>

namespace ppob {

BarrierProblem default_barrier_problem(double mu) {
  BarrierProblem p;
  p.objective = [](double x) { return x; };
  p.constraints.push_back([](double x) { return x - 1.0; });
  p.constraints.push_back([](double x) { return 2.0 - x; });
  p.mu = mu;
  return p;
}

double eval_P(const BarrierProblem& problem, double x) {
  if (!problem.objective) throw UsageError("eval_P: missing objective");
  double value = problem.objective(x);
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const double ci = problem.constraints[i](x);
    if (ci <= 0.0)
      throw DomainError("eval_P: constraint " + std::to_string(i) + " violated at x = " +
                        fmt_double(x));
    value -= problem.mu * std::log(ci);
  }
  check_finite(value, "P(x; mu)");
  return value;
}

double minimize_P(const BarrierProblem& problem, double lo, double hi, int* iterations) {
  if (!(lo < hi)) throw UsageError("minimize_P: empty bracket");
  if (problem.mu <= 0.0) throw ConfigError("minimize_P: mu must be > 0");
  // Endpoints must already be strictly feasible.
  eval_P(problem, lo);
  eval_P(problem, hi);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = eval_P(problem, x1);
  double f2 = eval_P(problem, x2);
  int iters = 0;
  while (b - a > 1e-10) {
    ++iters;
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval_P(problem, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval_P(problem, x2);
    }
  }
  if (iterations) *iterations = iters;
  const double x = 0.5 * (a + b);
  eval_P(problem, x);  // returned point is strictly feasible
  return x;
}

std::vector<BarrierCurve> emit_curves(const std::function<double(double)>& objective,
                                      const std::vector<std::function<double(double)>>& constraints,
                                      const std::vector<double>& mus, int grid_size, double lo,
                                      double hi) {
  if (grid_size < 1) throw ConfigError("emit_curves: grid size must be >= 1");
  if (mus.empty()) throw ConfigError("emit_curves: need at least one mu");
  // Interior nodes of grid_size + 1 subdivisions: a 3-point grid on (1, 2)
  // samples 1.25, 1.5, 1.75. Endpoints themselves are never sampled.
  constexpr double kMargin = 1e-6;
  const double spacing = (hi - lo) / (grid_size + 1);
  if (!(spacing >= kMargin))
    throw ConfigError("emit_curves: grid too dense for the 1e-6 endpoint margin");

  std::vector<BarrierCurve> curves;
  curves.reserve(mus.size());
  for (double mu : mus) {
    if (mu <= 0.0) throw ConfigError("emit_curves: mu must be > 0");
    BarrierProblem problem{objective, constraints, mu};
    BarrierCurve curve;
    curve.mu = mu;
    curve.xs.resize(grid_size);
    curve.values.resize(grid_size);
    for (int i = 0; i < grid_size; ++i) {
      curve.xs[i] = lo + (i + 1) * spacing;
      curve.values[i] = eval_P(problem, curve.xs[i]);
    }
    curve.minimizer = minimize_P(problem, lo + kMargin, hi - kMargin, &curve.search_iterations);
    curve.min_value = eval_P(problem, curve.minimizer);
    curves.push_back(std::move(curve));
  }
  return curves;
}

void write_curves_csv(const std::vector<BarrierCurve>& curves, const std::string& path) {
  if (curves.empty()) throw UsageError("write_curves_csv: no curves");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw UsageError("write_curves_csv: cannot open " + path);
  std::fprintf(f, "x");
  for (const auto& c : curves) std::fprintf(f, ",P(x;mu=%g)", c.mu);
  std::fprintf(f, "\n");
  const std::size_t rows = curves.front().xs.size();
  for (std::size_t r = 0; r < rows; ++r) {
    std::fprintf(f, "%s", fmt_double(curves.front().xs[r]).c_str());
    for (const auto& c : curves) std::fprintf(f, ",%s", fmt_double(c.values[r]).c_str());
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace ppob

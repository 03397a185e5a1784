// Recovers a 5-sparse vector from 40 random Gaussian measurements with OMP
// and with basis pursuit, and prints the error of each.

#include <cstdio>

#include "csrecon/csrecon.hpp"

int main() {
  using namespace csrecon;
  constexpr Index m = 40, n = 120, k = 5;
  Rng rng(7);

  Eigen::MatrixXd a(m, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) a(i, j) = rng.normal();
    a.col(j).normalize();
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (std::int64_t j : sample_without_replacement(n, k, rng)) x(j) = rng.sign() * (1.0 + rng.uniform());
  const Eigen::VectorXd y = a * x;

  const SparseSolution<double> greedy = omp(y, a, StopRule{k, 1e-10});
  std::printf("OMP: %d iterations, max error %.2e\n", greedy.iterations, (greedy.coefficients - x).cwiseAbs().maxCoeff());

  const BpResult l1 = basis_pursuit(a, y);
  std::printf("BP:  %s, max error %.2e\n", l1.converged ? "converged" : "not converged", (l1.x - x).cwiseAbs().maxCoeff());
  return 0;
}

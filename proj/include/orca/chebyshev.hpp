#pragma once

// Chebyshev-Gauss-Lobatto collocation on [0, 1]: node set, spectral
// differentiation matrix, Clenshaw-Curtis quadrature weights, and a dense
// linear BVP solver for first-order propagation equations
//
//   dE/dz = M(z) E + b(z),  E(0) given,
//
// built by stacking the differentiation matrix minus the per-node operator
// and replacing the inlet row with the boundary condition. The factorization
// is kept so the same operator can be reapplied to many right-hand sides.

#include <Eigen/Dense>

#include <complex>

namespace orca {

struct ChebyshevGrid {
    Eigen::VectorXd z;       // ascending nodes in [0, 1], z(0) = 0, z(n-1) = 1
    Eigen::MatrixXd D;       // d/dz at the nodes
    Eigen::VectorXd w;       // Clenshaw-Curtis weights, sum to 1
    int n() const { return static_cast<int>(z.size()); }
};

// n >= 2 collocation points
ChebyshevGrid chebyshev_grid(int n);

// integral over [0, 1] of a nodal vector
double chebyshev_integrate(const ChebyshevGrid& g, const Eigen::VectorXd& f);
std::complex<double> chebyshev_integrate(const ChebyshevGrid& g,
                                         const Eigen::VectorXcd& f);

// Solves dE/dz = diag(m) E + b with E(0) = e0 for scalar-per-node operators.
// The operator columns couple only through D, so the system matrix is
// (D - diag(m)) with the first row replaced by the inlet condition.
class FieldPropagator {
  public:
    FieldPropagator(const ChebyshevGrid& grid, const Eigen::VectorXcd& m);

    // refactor with a new diagonal operator on the same grid
    void set_operator(const Eigen::VectorXcd& m);

    Eigen::VectorXcd solve(std::complex<double> e0,
                           const Eigen::VectorXcd& b) const;

    const ChebyshevGrid& grid() const { return grid_; }

  private:
    ChebyshevGrid grid_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

} // namespace orca

#include "orca/chebyshev.hpp"

#include "orca/errors.hpp"

#include <cmath>

namespace orca {

// Trefethen, "Spectral Methods in MATLAB", chap. 6, mapped from [-1, 1] to
// [0, 1] and reordered ascending.
ChebyshevGrid chebyshev_grid(int n) {
    if (n < 2)
        throw validation_error("chebyshev grid needs at least 2 points");
    const int N = n - 1;
    ChebyshevGrid g;
    g.z.resize(n);
    for (int j = 0; j <= N; ++j) {
        // x_j = cos(pi j / N) descending; flip so z ascends
        const double x = std::cos(M_PI * (N - j) / N);
        g.z(j) = 0.5 * (x + 1.0);
    }
    g.z(0) = 0.0;
    g.z(N) = 1.0;

    // differentiation matrix in the ascending ordering
    Eigen::VectorXd c(n);
    for (int j = 0; j <= N; ++j)
        c(j) = (j == 0 || j == N) ? 2.0 : 1.0;
    g.D.resize(n, n);
    for (int i = 0; i <= N; ++i) {
        for (int j = 0; j <= N; ++j) {
            if (i == j) continue;
            // sign pattern follows the original descending index N - i
            const double sgn = (((N - i) + (N - j)) % 2 == 0) ? 1.0 : -1.0;
            g.D(i, j) = (c(i) / c(j)) * sgn / (g.z(i) - g.z(j));
        }
    }
    // negative-sum trick for the diagonal keeps the exact derivative of
    // constants at zero
    for (int i = 0; i <= N; ++i) {
        double s = 0;
        for (int j = 0; j <= N; ++j)
            if (j != i) s += g.D(i, j);
        g.D(i, i) = -s;
    }

    // Clenshaw-Curtis weights via the cosine-moment sum; on [0, 1] they are
    // half the [-1, 1] weights
    g.w.resize(n);
    for (int j = 0; j <= N; ++j) {
        const int k = N - j; // descending index
        double s = 1.0;
        for (int m = 1; m <= N / 2; ++m) {
            const double bm = (2 * m == N) ? 1.0 : 2.0;
            s -= bm * std::cos(2.0 * M_PI * m * k / N) / (4.0 * m * m - 1.0);
        }
        double wj = 2.0 * s / N;
        if (k == 0 || k == N) wj *= 0.5;
        g.w(j) = 0.5 * wj;
    }
    return g;
}

double chebyshev_integrate(const ChebyshevGrid& g, const Eigen::VectorXd& f) {
    return g.w.dot(f);
}

std::complex<double> chebyshev_integrate(const ChebyshevGrid& g,
                                         const Eigen::VectorXcd& f) {
    return g.w.cast<std::complex<double>>().dot(f);
}

FieldPropagator::FieldPropagator(const ChebyshevGrid& grid,
                                 const Eigen::VectorXcd& m)
    : grid_(grid) {
    set_operator(m);
}

void FieldPropagator::set_operator(const Eigen::VectorXcd& m) {
    const int n = grid_.n();
    if (m.size() != n)
        throw validation_error("operator size does not match grid");
    Eigen::MatrixXcd A = grid_.D.cast<std::complex<double>>();
    A.diagonal() -= m;
    A.row(0).setZero();
    A(0, 0) = 1.0;
    lu_.compute(A);
}

Eigen::VectorXcd FieldPropagator::solve(std::complex<double> e0,
                                        const Eigen::VectorXcd& b) const {
    Eigen::VectorXcd rhs = b;
    rhs(0) = e0;
    return lu_.solve(rhs);
}

} // namespace orca

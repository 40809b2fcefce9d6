#pragma once

// Measurement and fitting layer: windowed efficiency extraction from solver
// records, damped least-squares fits (Rabi cos^2, Gaussian/exponential
// lifetime) with parametric-bootstrap uncertainties, the hyperfine-constant
// grid search, and multimode weight ratios.
//
// All fitting is deterministic for a fixed (data, seed) pair: bootstrap
// replicas draw from per-replica generators derived from (seed, index), so
// neither threading nor evaluation order can change a result.

#include "orca/atomics.hpp"
#include "orca/protocol.hpp"
#include "orca/solver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace orca {

// |E_out|^2 integrated over [t0, t1], all polarization components summed.
// Sample intervals crossing the window edge contribute their overlap with
// |E|^2 interpolated linearly, which makes the integral exactly additive
// over a partition of the span.
double window_energy(const SimulationRecord& rec, double t0, double t1);

// window_energy normalized by a caller-supplied input energy
// (typically the record's own quadrature total or an envelope energy).
// reference must be positive; an empty overlap warns and returns 0.
double window_efficiency(const SimulationRecord& rec, double t0, double t1,
                         double reference);

// windowed energies normalized to the first window
std::vector<double> mode_weights(
    const SimulationRecord& rec,
    const std::vector<std::pair<double, double>>& spans);

struct TracePoint {
    double t_ns = 0;
    double efficiency = 0;
    double sigma = 0; // 0 for deterministic solver output
};

struct EfficiencyTrace {
    std::vector<TracePoint> points;
    std::string protocol;
    std::uint64_t fingerprint = 0;

    // strictly increasing times, efficiencies within [0, 1 + slack]
    void require_valid() const;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> sigmas;   // bootstrap standard deviations
    double residual_norm = 0;     // sqrt(sum of squared weighted residuals)
    int n_boot = 0;
    std::uint64_t seed = 0;

    // Rabi-fit extras: pulse energy of the first transfer maximum and the
    // fitted oscillation contrast (the per-pulse transfer ceiling)
    double pi_energy_nj = 0;
    double pi_fidelity = 0;
    double pi_energy_sigma = 0;
    double pi_fidelity_sigma = 0;

    double param(const std::string& name) const;
    double sigma(const std::string& name) const;
};

struct RabiPoint {
    double energy_nj = 0;
    double efficiency = 0;
    double sigma = 0;
};

// eta(E) = eta0 * (1 - V cos^2(a sqrt(E) + phi)), parameters
// (eta0, V, a, phi). Multi-start over phi; canonicalized to V >= 0,
// a > 0, phi in [0, pi). Requires >= 4 points.
FitResult fit_rabi(const std::vector<RabiPoint>& points, std::uint64_t seed,
                   int n_boot = 1000);

enum class LifetimeModel { gaussian, exponential };

// eta(t) = eta0 exp(-(t/t_c)^2) or eta0 exp(-t/t_c), parameters
// (eta0, t_c). Requires >= 3 points.
FitResult fit_lifetime(const EfficiencyTrace& trace, LifetimeModel model,
                       std::uint64_t seed, int n_boot = 1000);

struct ResidualGrid {
    std::vector<double> A_MHz;
    std::vector<double> B_MHz;
    Eigen::MatrixXd residual;  // A index x B index; NaN = failed node

    double A_min = 0, B_min = 0; // interpolated minimum, inside the hull
    double value_min = 0;
    double A_sigma = 0, B_sigma = 0;

    int n_resample = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> polarizations; // recorded; fits depend on them
    std::vector<std::string> notes;         // failed nodes, flat surface
};

// Everything the grid search needs to regenerate a simulated trace at one
// (A, B) node: the species data (scheme rebuilt per node), the solver
// configuration, a sequence factory per storage time, and how to read the
// efficiency off the finished record.
struct GridSearchSetup {
    SpeciesData species;
    SolverConfig cfg;
    Level target = Level::d; // fine level whose A/B are scanned
    std::function<PulseSequence(double storage_ns)> sequence_for;
    std::function<double(const SimulationRecord&)> efficiency_of;
};

// Residual surface S(A,B) = sum_t (sim - data)^2 over the trace's storage
// times, one run_hyperfine per node and time. The minimum is located by
// bicubic interpolation refined with a damped Newton polish; with
// n_resample > 0 the data are redrawn from their stated uncertainties and
// the minimum relocated per replica, giving the spread on (A*, B*).
ResidualGrid hyperfine_grid_search(const EfficiencyTrace& data,
                                   const std::vector<double>& A_MHz,
                                   const std::vector<double>& B_MHz,
                                   const GridSearchSetup& setup,
                                   std::uint64_t seed, int n_resample = 0);

} // namespace orca

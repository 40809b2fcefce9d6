#pragma once

// Reference implementations for the verification suite. Everything here is
// deliberately independent of the production solver: closed forms where they
// exist, and a brute-force fine-step integrator (plain complex arrays,
// uniform z marching, explicit stepping) for small four-level instances.
// Slow by design; large instances are refused rather than approximated.

#include "orca/solver.hpp"

#include <string>

namespace orca {

// scalar oracle value tagged with the algorithm that produced it
struct OracleResult {
    double value = 0;
    std::string method;
    double step_ps = 0; // resolution parameter; 0 for closed forms
};

// Two-level transfer probability after a square pulse of the given area.
// On resonance this is sin^2(area/2); off resonance the pulse length is
// area / peak_rabi and the generalized-Rabi closed form applies.
double analytic_rabi(double area_rad, double detuning_rad_s,
                     double peak_rabi_rad_s);

// magnitude of the thermal average <exp(i k v t)> over a Maxwell-Boltzmann
// velocity spread: exp(-(k sigma_v t)^2 / 2)
double analytic_doppler_decay(double k_rad_m, double sigma_v_m_s, double t_s);

// Brute-force integration of the four-level equations: Heun (explicit
// trapezoidal) time stepping at dtau_ps with the slaved field marched over a
// dense uniform z grid. Accepts at most 9 velocity classes, n_z <= 8 and the
// four_level tier; anything bigger is refused with validation_error.
// Injected initial coherences are not supported by this path.
SimulationRecord reference_integrate(const SolverConfig& cfg,
                                     const PulseSequence& seq,
                                     double dtau_ps = 0.05);

// retrieved energy of one window from the reference path, tagged for logs
OracleResult reference_window_energy(const SolverConfig& cfg,
                                     const PulseSequence& seq,
                                     std::size_t window, double dtau_ps = 0.05);

} // namespace orca

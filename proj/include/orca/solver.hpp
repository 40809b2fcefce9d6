#pragma once

// Maxwell-Bloch integration of the ladder memory in the frame co-moving with
// the signal (tau = t - z/c). Two model tiers share one configuration:
//
//  * four_level: one coherence pair (S_gs, S_gd) per velocity class, with the
//    intermediate manifold adiabatically eliminated into the complex
//    denominator L_v = gamma_e + i(Delta_e + k_ge v). The signal field obeys
//    dE/dz = sum_v [i sqrt(d w_v) Omega_c S_gs - chi d w_v E] / L_v,
//    integrated spectrally in z at every stage, so E is always slaved to the
//    instantaneous coherences (the equations have no dE/dtau term).
//
//  * hyperfine: the same structure expanded over hyperfine and Zeeman
//    sublevels of all four manifolds. S_gs becomes a (storage-sublevel x
//    ground-sublevel) block per (z, v), the signal field carries a spherical
//    polarization index, and every drive term is a sublevel matrix built
//    from the LevelScheme coupling tables.
//
// Drive envelopes everywhere are physical Rabi frequencies; the coherence
// equations couple through half of them, so a pi-area transfer pulse swaps
// S_gs and S_gd completely. propagate_field_slice applies the same
// convention to its control argument.
//
// Time stepping is classical RK4 on the coherences; between drive pulses the
// evolution is diagonal per class and is applied as an exact phase/decay
// jump, so long storage intervals cost nothing.

#include "orca/atomics.hpp"
#include "orca/chebyshev.hpp"
#include "orca/fields.hpp"
#include "orca/protocol.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace orca {

enum class ModelTier { four_level, hyperfine };

struct SolverConfig {
    LevelScheme scheme;
    VelocityGrid vgrid;
    WavevectorSet k;            // signed, rad/m

    double optical_depth = -1;  // < 0: take the LevelScheme value
    double delta_single_hz = 6e9; // detuning of the drive on the g-e leg
    double delta_two_hz = 0;    // two-photon offset from the g-s resonance
    double delta_three_hz = 0;  // three-photon offset from the g-d resonance

    // coherence decay rates, rad/ns; < 0 derives gamma = 1/(2*lifetime)
    // from the LevelScheme
    double gamma_e_rad_ns = -1;
    double gamma_s_rad_ns = -1;
    double gamma_d_rad_ns = -1;

    int n_z = 16;               // Chebyshev collocation points, >= 4
    double cell_length_m = 0.075; // bookkeeping only; z is scaled to [0, 1]
    double dtau_ps = 2.0;
    double tau_start_ns = NAN;  // NaN: taken from the sequence
    double tau_end_ns = NAN;

    ModelTier tier = ModelTier::four_level;
    bool populated_term = false; // signal couples the occupied g-e leg
    bool signal_on_ge = false;   // which leg carries the weak field
    int workers = 1;

    std::vector<double> snapshot_times_ns;

    // optional injected initial coherences (defaults to vacuum). Shapes must
    // match the tier: (n_z x n_classes) for four_level, or
    // (storage sublevels x ground*n_z*n_classes) for hyperfine
    Eigen::MatrixXcd initial_gs, initial_gd;
};

// z-averaged coherence tensors per velocity class at one instant.
// Rows flatten the (upper, ground) sublevel pair for the hyperfine tier and
// collapse to a single channel for four_level; columns are velocity classes.
struct CoherenceSnapshot {
    double tau_ns = 0;
    Eigen::MatrixXcd gs;
    Eigen::MatrixXcd gd;
};

struct WindowResult {
    double center_ns = 0;
    double width_ns = 0;
    int source_bin = 0;
    double energy_out = 0;  // |E|^2 quadrature over the window at cell exit
    double energy_in = 0;   // source bin envelope energy
    double efficiency = 0;  // energy_out / energy_in (NaN for an empty bin)
};

struct SimulationRecord {
    std::vector<double> tau_ns;      // sample times; inter-pulse gaps skipped
    Eigen::MatrixXcd field_out;      // samples x n_q, at z = 1
    Eigen::MatrixXcd field_in;       // samples x n_q, boundary drive
    int n_q = 1;

    std::vector<WindowResult> windows;
    std::vector<CoherenceSnapshot> snapshots;

    // running excitation ledger for conservation checks
    std::vector<double> excitation;      // sum_v integral dz |S|^2
    std::vector<double> energy_in_cum;   // integral |E_in|^2 dtau so far
    std::vector<double> energy_out_cum;
    double total_energy_in = 0;
    double total_energy_out = 0;

    Eigen::VectorXd velocity_weights;    // copied from the run's grid
    std::vector<std::string> events_applied;
    std::uint64_t fingerprint = 0;

    // index of the recorded sample at tau (1 ps tolerance); throws
    // lookup_error when the time falls in a skipped gap
    std::size_t sample_index(double tau) const;
};

// velocity-weighted sums sum_v sqrt(w_v) S(channel, v) of a snapshot's
// z-averaged tensors; the observable whose magnitude peaks at rephasing
struct CollectiveAmplitudes {
    Eigen::VectorXcd gs;
    Eigen::VectorXcd gd;
};
CollectiveAmplitudes collective_coherence(const SimulationRecord& rec,
                                          double tau_ns);

SimulationRecord run_four_level(const SolverConfig& cfg,
                                const PulseSequence& seq);
SimulationRecord run_hyperfine(const SolverConfig& cfg,
                               const PulseSequence& seq);

// dispatch on cfg.tier
SimulationRecord run_simulation(const SolverConfig& cfg,
                                const PulseSequence& seq);

// One spatial solve at fixed tau: the signal field over the cell given the
// current coherences, the inlet field (one entry per polarization component)
// and the instantaneous control envelope. Uses the same operator assembly as
// the full runs; exposed for propagation tests.
Eigen::MatrixXcd propagate_field_slice(const SolverConfig& cfg,
                                       const Eigen::MatrixXcd& s_gs,
                                       const Eigen::VectorXcd& e_in,
                                       std::complex<double> control_env);

} // namespace orca

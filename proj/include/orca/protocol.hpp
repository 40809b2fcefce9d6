#pragma once

// Pulse-sequence builders for the storage protocols. Timing is fixed by the
// Doppler phase budget: a coherence created at t_in accumulates phase
// k_gs*v per unit time while in the storage state and -|k_gd|*v while
// shelved, so it returns to its initial phase when
//
//   (total time in storage) = r * (total time shelved),   r = |k_gd|/|k_gs|.
//
// Every builder places the shelved intervals as (matched storage time)/r so
// the closure is exact for all velocity classes at the retrieval center.
//
// A sequence keeps the weak signal inputs separate from the drive events:
// events are the classical control/transfer pulses, inputs are the stored
// time bins. Builders throw on errors; validate() itself only reports.

#include "orca/fields.hpp"

#include <string>
#include <vector>

namespace orca {

// characteristic Doppler dephasing time of the stored coherence
double dephasing_time_ns(double k_gs, double sigma_v);

struct PulseEvent {
    PulseEnvelope pulse;
    std::string role; // write | read | transfer | mix
};

// weak signal time bin; envelope parameters come from the sequence template
struct InputBin {
    double center_ns = 0;
    double amplitude = 1.0; // relative field amplitude
    double phase_rad = 0;
};

struct RetrievalWindow {
    double center_ns = 0;
    double width_ns = 0;
    int source_bin = 0;
};

struct ProtocolParams {
    double signal_peak = 1e-3;       // weak-probe Rabi, rad/ns
    double signal_fwhm_ps = 330;
    double control_peak = 0;         // rad/ns; 0 means derive from control_area
    double control_area = M_PI;
    double control_fwhm_ps = 330;
    double transfer_area = M_PI;
    double transfer_fwhm_ps = 330;
    double transfer_chirp_mhz_ns = 0;
    double window_width_ns = 0;      // 0 means 3 * signal FWHM
    double r = 1.0;                  // shelving wavevector ratio
    double t_deph_ns = 1.1;
    Polarization signal_pol = Polarization::sigma_plus();
    Polarization control_pol = Polarization::sigma_plus();
    Polarization transfer_pol = Polarization::sigma_plus();
};

// how multimode bins share the transfer pulses: consecutive groups of bins
// are shelved together, one group per rung of the transfer ladder
struct SegmentPlan {
    std::vector<int> counts; // bins per group; empty = split at largest gap
    double storage_ns = 0;   // stored time per bin; 0 = derive from bin times
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
    std::string summary() const;
};

struct PulseSequence {
    std::string name;
    std::vector<PulseEvent> events;        // drives, ordered by center time
    std::vector<InputBin> inputs;          // signal bins, ordered by time
    std::vector<RetrievalWindow> windows;  // ordered by center time
    PulseEnvelope signal_template;         // envelope shared by all inputs
    double t_start_ns = 0;                 // leading envelope tails may be < 0
    double t_end_ns = 0;
    double r = 1.0;
    double t_deph_ns = 1.1;

    std::vector<const PulseEvent*> on_channel(Channel c) const;
    std::vector<PulseEnvelope> input_envelopes() const;
    int n_bins() const { return static_cast<int>(inputs.size()); }

    // Reported errors: unsorted or out-of-span events, bins closer than
    // t_deph, overlapping windows, a transfer inside a window or outside the
    // write/read bracket, a window overlapping a foreign input bin, and a
    // source bin still shelved at its window (odd transfer count, unless a
    // mix pulse splits the amplitude). Bins closer than 3 t_deph and a
    // window touching its own input's tail only warn: the latter is the
    // transmitted-leakage regime of short-storage sweeps, not a cross-talk
    // ambiguity.
    ValidationReport validate() const;
    void require_valid() const; // throws validation_error listing the errors
};

// write and read control only; retrieval decays with the Doppler phase spread
PulseSequence build_standard_orca(const ProtocolParams& p, double storage_ns);

// two shelving pulses; echo retrieval at 2T + 2T/r. storage_ns must exceed
// the dephasing time, otherwise the plain protocol already suffices
PulseSequence build_rephased(const ProtocolParams& p, double storage_ns);

// several bins share one transfer ladder: group k is shelved from the k-th
// rung to the next, so every bin is stored for tau and shelved for tau/r,
// and retrieval is first-in first-out at t_in + tau + tau/r. Later groups
// must arrive while the earlier ones are shelved; the default plan splits
// the bins at the largest gap (single group when that is not needed)
PulseSequence build_multimode(const ProtocolParams& p,
                              const std::vector<double>& bin_times_ns,
                              const SegmentPlan& plan = {},
                              const std::vector<double>& amplitudes = {},
                              const std::vector<double>& phases = {});

// two bins retrieved last-in first-out via a second shelving round
PulseSequence build_reorder_pair(const ProtocolParams& p, double t1_ns,
                                 double t2_ns);

// both bins brought to simultaneous rephasing (one stored, one shelved) and
// mixed with a partial transfer pulse; the two output ports are read out in
// turn. relative_phase is applied to the second input
PulseSequence build_interference_pair(const ProtocolParams& p, double t1_ns,
                                      double t2_ns, double mix_area = M_PI_2,
                                      double relative_phase = 0);

} // namespace orca

#pragma once

// Shared plumbing for the two solver tiers: unit resolution, step planning
// with free-flight gaps, drive sampling and the trace recorder. Everything
// here is deliberately tier-agnostic; the tier files own the physics.

#include "orca/errors.hpp"
#include "orca/solver.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

namespace orca::detail {

inline double hz_to_rad_ns(double hz) { return 2.0 * M_PI * hz * 1e-9; }

// all rates in rad/ns, wavevector Doppler shifts folded per class
struct Rates {
    double od = 0;
    double gamma_e = 0, gamma_s = 0, gamma_d = 0;
    double delta_e = 0, delta_two = 0, delta_three = 0;
    Eigen::ArrayXd kv_ge;  // Doppler shift on the populated-leg denominator
    Eigen::ArrayXd kv_gs;  // two-photon shift per class
    Eigen::ArrayXd kv_gd;  // shelved-coherence shift per class
    Eigen::ArrayXd dv;     // optical depth share, od * w_v
    Eigen::ArrayXd cv;     // coupling amplitude, sqrt(od * w_v)
};

Rates resolve_rates(const SolverConfig& cfg);

// tier-independent sanity checks; max_offset_rad_ns widens the step-size
// bound by the largest internal level offset of the tier
void check_config(const SolverConfig& cfg, const PulseSequence& seq,
                  const Rates& r, double max_offset_rad_ns);

struct Segment {
    double t0 = 0, t1 = 0;
    int steps = 0;  // 0 marks a bare sample point (snapshot in a gap)
};

struct StepPlan {
    std::vector<Segment> segments;  // ascending, disjoint
    double t_begin = 0, t_end = 0;
};

// Active intervals are the union of pulse/input supports and retrieval
// windows; outside them every term with a field or drive vanishes and the
// coherences just rotate and decay, which the tiers apply analytically.
// Snapshot times become segment boundaries so the state is sampled exactly
// there.
StepPlan plan_steps(const SolverConfig& cfg, const PulseSequence& seq);

struct Drives {
    std::vector<PulseEnvelope> control;   // write/read events
    std::vector<PulseEnvelope> transfer;  // transfer/mix events
    std::vector<PulseEnvelope> inputs;    // signal bins

    std::complex<double> control_at(double t) const { return sum_at(control, t); }
    std::complex<double> transfer_at(double t) const { return sum_at(transfer, t); }
    std::complex<double> input_at(double t) const { return sum_at(inputs, t); }

    bool control_in(double a, double b) const { return overlaps(control, a, b); }
    bool transfer_in(double a, double b) const { return overlaps(transfer, a, b); }
    bool input_in(double a, double b) const { return overlaps(inputs, a, b); }

  private:
    static std::complex<double> sum_at(const std::vector<PulseEnvelope>& v,
                                       double t);
    static bool overlaps(const std::vector<PulseEnvelope>& v, double a,
                         double b);
};

Drives gather_drives(const PulseSequence& seq);

// Accumulates the boundary-field trace and the energy/excitation ledgers,
// then finalizes window integrals. Samples arrive in time order; gaps are
// closed explicitly so the trapezoid never spans a skipped interval.
class Recorder {
  public:
    Recorder(const SolverConfig& cfg, const PulseSequence& seq, int n_q);

    void begin_segment();
    void sample(double tau, const Eigen::VectorXcd& e_in,
                const Eigen::VectorXcd& e_out, double excitation);
    void end_segment();

    // window integrals, totals, fingerprint; moves the record out
    SimulationRecord finish(const PulseSequence& seq);

    SimulationRecord rec;

  private:
    int n_q_ = 1;
    bool open_ = false;
    std::size_t seg_first_ = 0;  // first sample index of the open segment
    std::vector<std::pair<std::size_t, std::size_t>> runs_;  // [first, last]
    std::vector<Eigen::VectorXcd> in_rows_, out_rows_;
    double in_cum_ = 0, out_cum_ = 0;
};

// contiguous column-range dispatch; byte-identical results for any worker
// count because every range writes disjoint columns with identical math
void parallel_ranges(int n, int workers,
                     const std::function<void(int, int)>& fn);

// sum of non-negative per-class contributions in value order, so the ledger
// stays bit-identical when the class ordering is permuted
double class_sum(Eigen::ArrayXd contributions);

// tier backends for the public propagate_field_slice
Eigen::MatrixXcd propagate_slice_four_level(const SolverConfig& cfg,
                                            const Eigen::MatrixXcd& s_gs,
                                            const Eigen::VectorXcd& e_in,
                                            std::complex<double> control_env);
Eigen::MatrixXcd propagate_slice_hyperfine(const SolverConfig& cfg,
                                           const Eigen::MatrixXcd& s_gs,
                                           const Eigen::VectorXcd& e_in,
                                           std::complex<double> control_env);

} // namespace orca::detail

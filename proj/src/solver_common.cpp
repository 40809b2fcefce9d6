#include "solver_internal.hpp"

#include "orca/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

namespace orca {
namespace detail {

Rates resolve_rates(const SolverConfig& cfg) {
    Rates r;
    r.od = cfg.optical_depth < 0 ? cfg.scheme.optical_depth
                                 : cfg.optical_depth;
    if (!(r.od >= 0))
        throw validation_error("optical depth must be non-negative");

    auto pick = [&](double override_rad_ns, Level lv) {
        if (override_rad_ns >= 0) return override_rad_ns;
        return cfg.scheme.level(lv).gamma();
    };
    r.gamma_e = pick(cfg.gamma_e_rad_ns, Level::e);
    r.gamma_s = pick(cfg.gamma_s_rad_ns, Level::s);
    r.gamma_d = pick(cfg.gamma_d_rad_ns, Level::d);

    r.delta_e = hz_to_rad_ns(cfg.delta_single_hz);
    r.delta_two = hz_to_rad_ns(cfg.delta_two_hz);
    r.delta_three = hz_to_rad_ns(cfg.delta_three_hz);

    // Doppler shifts per class, rad/ns. The populated-leg denominator sees
    // whichever carrier drives g-e in this configuration.
    const double k_ge = cfg.signal_on_ge ? cfg.k.k_signal : cfg.k.k_control;
    const Eigen::ArrayXd v = cfg.vgrid.v.array();
    r.kv_ge = v * (k_ge * 1e-9);
    r.kv_gs = v * (cfg.k.k_gs() * 1e-9);
    r.kv_gd = v * (cfg.k.k_gd() * 1e-9);

    r.dv = r.od * cfg.vgrid.w.array();
    r.cv = r.dv.sqrt();
    return r;
}

void check_config(const SolverConfig& cfg, const PulseSequence&,
                  const Rates& r, double max_offset_rad_ns) {
    if (cfg.n_z < 4)
        throw validation_error("need at least 4 collocation points in z");
    if (!(cfg.dtau_ps > 0))
        throw validation_error("time step must be positive");
    if (cfg.workers < 1)
        throw validation_error("worker count must be positive");
    if (cfg.vgrid.n() < 1)
        throw validation_error("velocity grid is empty");
    if (std::abs(cfg.vgrid.w.sum() - 1.0) > 1e-6)
        throw validation_error("velocity weights must sum to one");
    if (r.gamma_e < 0 || r.gamma_s < 0 || r.gamma_d < 0)
        throw validation_error("decay rates must be non-negative");

    // RK4 resolves the fastest free rotation only while the step keeps the
    // phase advance small; the shelved coherence carries the largest shift
    const double worst =
        std::abs(r.delta_three) + r.kv_gd.abs().maxCoeff() + max_offset_rad_ns;
    const double advance = cfg.dtau_ps * 1e-3 * worst;
    if (advance >= 0.1) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "time step too coarse: dtau * max detuning = %.3f rad "
                      "(need < 0.1); reduce dtau_ps below %.3f",
                      advance, 0.1 / worst * 1e3);
        throw validation_error(buf);
    }
}

namespace {

struct Interval {
    double lo, hi;
};

void merge_into(std::vector<Interval>& set, double lo, double hi) {
    set.push_back({lo, hi});
}

std::vector<Interval> merged(std::vector<Interval> set, double glue) {
    std::sort(set.begin(), set.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& iv : set) {
        if (!out.empty() && iv.lo <= out.back().hi + glue)
            out.back().hi = std::max(out.back().hi, iv.hi);
        else
            out.push_back(iv);
    }
    return out;
}

} // namespace

StepPlan plan_steps(const SolverConfig& cfg, const PulseSequence& seq) {
    const double dt = cfg.dtau_ps * 1e-3;

    // activity support uses a deep floor so that the free-flight jump only
    // skips truly negligible drive amplitude
    constexpr double kFloor = 1e-8;
    std::vector<Interval> act;
    double req_lo = std::numeric_limits<double>::infinity();
    double req_hi = -req_lo;
    auto note = [&](double lo, double hi) {
        merge_into(act, lo, hi);
        req_lo = std::min(req_lo, lo);
        req_hi = std::max(req_hi, hi);
    };
    for (const auto& ev : seq.events) {
        const double s = envelope_support_ns(ev.pulse, kFloor);
        note(ev.pulse.center_ns - s, ev.pulse.center_ns + s);
    }
    for (const auto& env : seq.input_envelopes()) {
        const double s = envelope_support_ns(env, kFloor);
        note(env.center_ns - s, env.center_ns + s);
    }
    for (const auto& w : seq.windows)
        note(w.center_ns - 0.5 * w.width_ns - dt,
             w.center_ns + 0.5 * w.width_ns + dt);

    StepPlan plan;
    plan.t_begin = std::isnan(cfg.tau_start_ns)
                       ? (act.empty() ? 0.0 : std::min(req_lo, seq.t_start_ns))
                       : cfg.tau_start_ns;
    double snap_max = -std::numeric_limits<double>::infinity();
    for (double s : cfg.snapshot_times_ns) snap_max = std::max(snap_max, s);
    plan.t_end = std::isnan(cfg.tau_end_ns)
                     ? std::max({act.empty() ? plan.t_begin : req_hi,
                                 seq.t_end_ns, snap_max})
                     : cfg.tau_end_ns;

    if (!act.empty() &&
        (plan.t_begin > req_lo + 1e-9 || plan.t_end < req_hi - 1e-9))
        throw validation_error("integration span does not cover the sequence");
    for (double s : cfg.snapshot_times_ns)
        if (s < plan.t_begin - 1e-9 || s > plan.t_end + 1e-9)
            throw validation_error("snapshot time outside the integration span");

    auto segs = merged(std::move(act), 2 * dt);

    // snapshot times become exact boundaries: split a containing segment, or
    // add a bare sample point out in a gap
    std::vector<double> snaps = cfg.snapshot_times_ns;
    std::sort(snaps.begin(), snaps.end());
    for (double s : snaps) {
        bool placed = false;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            if (s >= segs[i].lo - 1e-9 && s <= segs[i].hi + 1e-9) {
                if (s > segs[i].lo + 1e-9 && s < segs[i].hi - 1e-9) {
                    Interval tail{s, segs[i].hi};
                    segs[i].hi = s;
                    segs.insert(segs.begin() + i + 1, tail);
                }
                placed = true;
                break;
            }
        }
        if (!placed) segs.push_back({s, s});
    }
    std::sort(segs.begin(), segs.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });

    for (const auto& iv : segs) {
        Segment sg;
        sg.t0 = std::max(iv.lo, plan.t_begin);
        sg.t1 = std::min(iv.hi, plan.t_end);
        if (sg.t1 < sg.t0) continue;
        sg.steps = sg.t1 > sg.t0
                       ? static_cast<int>(std::ceil((sg.t1 - sg.t0) / dt - 1e-9))
                       : 0;
        plan.segments.push_back(sg);
    }
    return plan;
}

std::complex<double> Drives::sum_at(const std::vector<PulseEnvelope>& v,
                                    double t) {
    std::complex<double> s = 0;
    for (const auto& p : v) s += rabi_at(p, t);
    return s;
}

bool Drives::overlaps(const std::vector<PulseEnvelope>& v, double a,
                      double b) {
    for (const auto& p : v) {
        const double h = envelope_support_ns(p, 1e-8);
        if (p.center_ns + h >= a && p.center_ns - h <= b) return true;
    }
    return false;
}

Drives gather_drives(const PulseSequence& seq) {
    Drives d;
    for (const auto& ev : seq.events) {
        switch (ev.pulse.channel) {
        case Channel::control: d.control.push_back(ev.pulse); break;
        case Channel::transfer: d.transfer.push_back(ev.pulse); break;
        default:
            throw validation_error("sequence event on the signal channel; "
                               "weak-field inputs belong in input bins");
        }
    }
    d.inputs = seq.input_envelopes();
    return d;
}

Recorder::Recorder(const SolverConfig& cfg, const PulseSequence& seq,
                   int n_q)
    : n_q_(n_q) {
    rec.n_q = n_q;
    rec.velocity_weights = cfg.vgrid.w;
    rec.fingerprint = config_fingerprint(cfg, seq);
    for (const auto& w : seq.windows) {
        WindowResult r;
        r.center_ns = w.center_ns;
        r.width_ns = w.width_ns;
        r.source_bin = w.source_bin;
        rec.windows.push_back(r);
    }
    char buf[96];
    for (const auto& ev : seq.events) {
        std::snprintf(buf, sizeof buf, "%s @ %.4f ns", ev.role.c_str(),
                      ev.pulse.center_ns);
        rec.events_applied.push_back(buf);
    }
    for (std::size_t i = 0; i < seq.inputs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "input bin %zu @ %.4f ns", i,
                      seq.inputs[i].center_ns);
        rec.events_applied.push_back(buf);
    }
}

void Recorder::begin_segment() {
    open_ = true;
    seg_first_ = rec.tau_ns.size();
}

void Recorder::sample(double tau, const Eigen::VectorXcd& e_in,
                      const Eigen::VectorXcd& e_out,
                      double excitation) {
    if (!rec.tau_ns.empty() && open_ && rec.tau_ns.size() > seg_first_) {
        // trapezoid within the segment only
        const double h = tau - rec.tau_ns.back();
        in_cum_ += 0.5 * h *
                   (in_rows_.back().squaredNorm() + e_in.squaredNorm());
        out_cum_ += 0.5 * h *
                    (out_rows_.back().squaredNorm() + e_out.squaredNorm());
    }
    rec.tau_ns.push_back(tau);
    in_rows_.push_back(e_in);
    out_rows_.push_back(e_out);
    rec.excitation.push_back(excitation);
    rec.energy_in_cum.push_back(in_cum_);
    rec.energy_out_cum.push_back(out_cum_);
}

void Recorder::end_segment() {
    if (open_ && rec.tau_ns.size() > seg_first_)
        runs_.push_back({seg_first_, rec.tau_ns.size() - 1});
    open_ = false;
}

SimulationRecord Recorder::finish(const PulseSequence& seq) {
    const auto n = static_cast<Eigen::Index>(rec.tau_ns.size());
    rec.field_in.resize(n, n_q_);
    rec.field_out.resize(n, n_q_);
    for (Eigen::Index i = 0; i < n; ++i) {
        rec.field_in.row(i) = in_rows_[i].transpose();
        rec.field_out.row(i) = out_rows_[i].transpose();
    }
    rec.total_energy_in = in_cum_;
    rec.total_energy_out = out_cum_;

    auto envs = seq.input_envelopes();
    for (auto& w : rec.windows) {
        const double lo = w.center_ns - 0.5 * w.width_ns;
        const double hi = w.center_ns + 0.5 * w.width_ns;
        double acc = 0;
        for (const auto& run : runs_) {
            for (std::size_t i = run.first; i < run.second; ++i) {
                const double a = rec.tau_ns[i], b = rec.tau_ns[i + 1];
                if (a < lo - 1e-12 || b > hi + 1e-12) continue;
                acc += 0.5 * (b - a) *
                       (rec.field_out.row(static_cast<Eigen::Index>(i))
                            .squaredNorm() +
                        rec.field_out.row(static_cast<Eigen::Index>(i + 1))
                            .squaredNorm());
            }
        }
        w.energy_out = acc;
        w.energy_in =
            w.source_bin >= 0 &&
                    w.source_bin < static_cast<int>(envs.size())
                ? envelope_energy(envs[static_cast<std::size_t>(w.source_bin)])
                : 0.0;
        w.efficiency = w.energy_in > 0
                           ? w.energy_out / w.energy_in
                           : std::numeric_limits<double>::quiet_NaN();
    }
    return std::move(rec);
}

double class_sum(Eigen::ArrayXd contributions) {
    std::sort(contributions.begin(), contributions.end());
    double s = 0;
    for (double c : contributions) s += c;
    return s;
}

void parallel_ranges(int n, int workers,
                     const std::function<void(int, int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        fn(0, n);
        return;
    }
    const int chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        const int b = w * chunk;
        const int e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    for (auto& t : pool) t.join();
}

} // namespace detail

std::size_t SimulationRecord::sample_index(double tau) const {
    auto it = std::lower_bound(tau_ns.begin(), tau_ns.end(), tau);
    std::size_t best = tau_ns.size();
    double err = 1e-3 + 1e-12;
    auto consider = [&](std::size_t i) {
        if (i < tau_ns.size() && std::abs(tau_ns[i] - tau) < err) {
            err = std::abs(tau_ns[i] - tau);
            best = i;
        }
    };
    if (it != tau_ns.begin()) consider(static_cast<std::size_t>(it - tau_ns.begin()) - 1);
    consider(static_cast<std::size_t>(it - tau_ns.begin()));
    if (best == tau_ns.size())
        throw lookup_error("no recorded sample within 1 ps of requested time");
    return best;
}

CollectiveAmplitudes collective_coherence(const SimulationRecord& rec,
                                          double tau_ns) {
    const CoherenceSnapshot* hit = nullptr;
    double err = 1e-3 + 1e-12;
    for (const auto& s : rec.snapshots) {
        if (std::abs(s.tau_ns - tau_ns) < err) {
            err = std::abs(s.tau_ns - tau_ns);
            hit = &s;
        }
    }
    if (!hit)
        throw lookup_error("no coherence snapshot within 1 ps of requested "
                           "time");
    const Eigen::VectorXcd sw =
        rec.velocity_weights.cwiseSqrt().cast<std::complex<double>>();
    CollectiveAmplitudes out;
    out.gs = hit->gs * sw;
    out.gd = hit->gd * sw;
    return out;
}

SimulationRecord run_simulation(const SolverConfig& cfg,
                                const PulseSequence& seq) {
    return cfg.tier == ModelTier::four_level ? run_four_level(cfg, seq)
                                             : run_hyperfine(cfg, seq);
}

Eigen::MatrixXcd propagate_field_slice(const SolverConfig& cfg,
                                       const Eigen::MatrixXcd& s_gs,
                                       const Eigen::VectorXcd& e_in,
                                       std::complex<double> control_env) {
    return cfg.tier == ModelTier::four_level
               ? detail::propagate_slice_four_level(cfg, s_gs, e_in,
                                                    control_env)
               : detail::propagate_slice_hyperfine(cfg, s_gs, e_in,
                                                   control_env);
}

} // namespace orca

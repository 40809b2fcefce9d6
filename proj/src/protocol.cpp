#include "orca/protocol.hpp"

#include "orca/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace orca {

double dephasing_time_ns(double k_gs, double sigma_v) {
    const double rate = std::abs(k_gs) * sigma_v * 1e-9; // rad/ns
    if (rate <= 0)
        throw validation_error("dephasing time undefined for k_gs * sigma_v = 0");
    return 1.0 / rate;
}

namespace {

double window_width(const ProtocolParams& p) {
    return p.window_width_ns > 0 ? p.window_width_ns : 3.0 * p.signal_fwhm_ps * 1e-3;
}

double control_peak(const ProtocolParams& p) {
    return p.control_peak > 0 ? p.control_peak
                              : area_to_peak(p.control_area, p.control_fwhm_ps);
}

PulseEnvelope signal_template(const ProtocolParams& p) {
    PulseEnvelope env;
    env.channel = Channel::signal;
    env.center_ns = 0;
    env.fwhm_ps = p.signal_fwhm_ps;
    env.peak_rabi = p.signal_peak;
    env.pol = p.signal_pol;
    return env;
}

PulseEvent make_control(const ProtocolParams& p, double t, const char* role) {
    PulseEvent ev;
    ev.pulse.channel = Channel::control;
    ev.pulse.center_ns = t;
    ev.pulse.fwhm_ps = p.control_fwhm_ps;
    ev.pulse.peak_rabi = control_peak(p);
    ev.pulse.pol = p.control_pol;
    ev.role = role;
    return ev;
}

PulseEvent make_transfer(const ProtocolParams& p, double t, double area,
                         const char* role = "transfer") {
    PulseEvent ev;
    ev.pulse.channel = Channel::transfer;
    ev.pulse.center_ns = t;
    ev.pulse.fwhm_ps = p.transfer_fwhm_ps;
    ev.pulse.peak_rabi = area_to_peak(area, p.transfer_fwhm_ps);
    ev.pulse.chirp_mhz_per_ns = p.transfer_chirp_mhz_ns;
    ev.pulse.pol = p.transfer_pol;
    ev.role = role;
    return ev;
}

void finish(PulseSequence& seq, const ProtocolParams& p) {
    seq.r = p.r;
    seq.t_deph_ns = p.t_deph_ns;
    seq.signal_template = signal_template(p);
    std::stable_sort(seq.events.begin(), seq.events.end(),
                     [](const PulseEvent& a, const PulseEvent& b) {
                         return a.pulse.center_ns < b.pulse.center_ns;
                     });
    std::stable_sort(seq.inputs.begin(), seq.inputs.end(),
                     [](const InputBin& a, const InputBin& b) {
                         return a.center_ns < b.center_ns;
                     });
    double start = 0, end = 0;
    for (const auto& ev : seq.events) {
        const double s = envelope_support_ns(ev.pulse);
        start = std::min(start, ev.pulse.center_ns - s);
        end = std::max(end, ev.pulse.center_ns + s);
    }
    const double in_support = envelope_support_ns(seq.signal_template);
    for (const auto& in : seq.inputs) {
        start = std::min(start, in.center_ns - in_support);
        end = std::max(end, in.center_ns + in_support);
    }
    for (const auto& w : seq.windows)
        end = std::max(end, w.center_ns + 0.5 * w.width_ns);
    seq.t_start_ns = start;
    seq.t_end_ns = end + 0.5;
    seq.require_valid();
}

} // namespace

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& e : errors) os << "error: " << e << "\n";
    for (const auto& w : warnings) os << "warning: " << w << "\n";
    return os.str();
}

std::vector<const PulseEvent*> PulseSequence::on_channel(Channel c) const {
    std::vector<const PulseEvent*> out;
    for (const auto& ev : events)
        if (ev.pulse.channel == c) out.push_back(&ev);
    return out;
}

std::vector<PulseEnvelope> PulseSequence::input_envelopes() const {
    std::vector<PulseEnvelope> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        PulseEnvelope env = signal_template;
        env.center_ns = in.center_ns;
        env.peak_rabi *= in.amplitude;
        env.phase_rad += in.phase_rad;
        out.push_back(env);
    }
    return out;
}

ValidationReport PulseSequence::validate() const {
    ValidationReport rep;
    auto err = [&rep](const std::string& m) { rep.errors.push_back(m); };
    auto warn = [&rep](const std::string& m) { rep.warnings.push_back(m); };

    for (size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        if (ev.pulse.center_ns < 0)
            err("event '" + ev.role + "' has negative center time");
        if (ev.pulse.center_ns > t_end_ns)
            err("event '" + ev.role + "' at " + std::to_string(ev.pulse.center_ns) +
                " ns lies outside the simulated span");
        if (i > 0 && ev.pulse.center_ns < events[i - 1].pulse.center_ns)
            err("events are not sorted by center time");
    }

    for (size_t i = 1; i < inputs.size(); ++i) {
        const double sep = inputs[i].center_ns - inputs[i - 1].center_ns;
        if (sep < t_deph_ns)
            err("input bins " + std::to_string(i - 1) + " and " + std::to_string(i) +
                " are closer than the dephasing time");
        else if (sep < 3.0 * t_deph_ns)
            warn("input bins " + std::to_string(i - 1) + " and " + std::to_string(i) +
                 " are closer than three dephasing times; cross-talk is not negligible");
    }

    // shelving outside the write/read bracket acts on an empty medium
    double first_write = INFINITY, last_read = -INFINITY;
    for (const auto& ev : events) {
        if (ev.role == "write") first_write = std::min(first_write, ev.pulse.center_ns);
        if (ev.role == "read") last_read = std::max(last_read, ev.pulse.center_ns);
    }
    for (const auto& in : inputs) first_write = std::min(first_write, in.center_ns);
    for (const auto& ev : events)
        if (ev.pulse.channel == Channel::transfer &&
            (ev.pulse.center_ns < first_write || ev.pulse.center_ns > last_read))
            err("transfer at " + std::to_string(ev.pulse.center_ns) +
                " ns lies outside the storage/retrieval bracket");

    std::vector<RetrievalWindow> ws = windows;
    std::sort(ws.begin(), ws.end(), [](const auto& a, const auto& b) {
        return a.center_ns < b.center_ns;
    });
    const double in_support = envelope_support_ns(signal_template);
    for (size_t i = 0; i < ws.size(); ++i) {
        const double lo = ws[i].center_ns - 0.5 * ws[i].width_ns;
        const double hi = ws[i].center_ns + 0.5 * ws[i].width_ns;
        if (ws[i].width_ns <= 0)
            err("retrieval window has non-positive width");
        if (hi > t_end_ns)
            err("retrieval window extends outside the simulated span");
        if (i > 0 && lo < ws[i - 1].center_ns + 0.5 * ws[i - 1].width_ns)
            err("retrieval windows overlap");
        // a shelving pulse inside a window would interrupt the readout
        for (const auto& ev : events)
            if (ev.pulse.channel == Channel::transfer &&
                ev.pulse.center_ns > lo && ev.pulse.center_ns < hi)
                err("transfer pulse falls inside a retrieval window");
        // window touching a foreign bin cannot attribute its counts; its own
        // bin's tail only contaminates the estimate with transmitted light
        for (size_t b = 0; b < inputs.size(); ++b) {
            const double blo = inputs[b].center_ns - in_support;
            const double bhi = inputs[b].center_ns + in_support;
            if (hi <= blo || lo >= bhi) continue;
            if (static_cast<int>(b) == ws[i].source_bin)
                warn("retrieval window overlaps the tail of its own input bin " +
                     std::to_string(b) + "; transmitted light leaks into the estimate");
            else
                err("retrieval window for bin " + std::to_string(ws[i].source_bin) +
                    " overlaps input bin " + std::to_string(b));
        }
    }

    // each window's bin must be back in the storage state at the window
    // center: an even number of full transfer toggles since its input. A mix
    // pulse splits amplitude between both states, so its windows are exempt.
    for (const auto& w : windows) {
        if (w.source_bin < 0 || w.source_bin >= n_bins()) {
            err("retrieval window references missing input bin " +
                std::to_string(w.source_bin));
            continue;
        }
        const double t_in = inputs[static_cast<size_t>(w.source_bin)].center_ns;
        int toggles = 0;
        bool mixed = false;
        for (const auto& ev : events) {
            if (ev.pulse.center_ns <= t_in || ev.pulse.center_ns >= w.center_ns)
                continue;
            if (ev.role == "transfer") ++toggles;
            if (ev.role == "mix") mixed = true;
        }
        if (!mixed && toggles % 2 != 0)
            err("bin " + std::to_string(w.source_bin) +
                " is still shelved at its retrieval window");
    }
    return rep;
}

void PulseSequence::require_valid() const {
    const ValidationReport rep = validate();
    if (!rep.ok())
        throw validation_error("invalid '" + name + "' sequence:\n" + rep.summary());
}

PulseSequence build_standard_orca(const ProtocolParams& p, double storage_ns) {
    if (storage_ns < 0)
        throw validation_error("storage time must be non-negative");
    PulseSequence seq;
    seq.name = "standard";
    seq.inputs.push_back({0.0, 1.0, 0.0});
    seq.events.push_back(make_control(p, 0.0, "write"));
    seq.events.push_back(make_control(p, storage_ns, "read"));
    seq.windows.push_back({storage_ns, window_width(p), 0});
    finish(seq, p);
    return seq;
}

PulseSequence build_rephased(const ProtocolParams& p, double storage_ns) {
    if (storage_ns <= p.t_deph_ns)
        throw validation_error(
            "rephased storage needs storage_ns > dephasing time; use the "
            "standard protocol for shorter delays");
    const double T = storage_ns;
    const double shelved = 2.0 * T / p.r;
    PulseSequence seq;
    seq.name = "rephased";
    seq.inputs.push_back({0.0, 1.0, 0.0});
    seq.events.push_back(make_control(p, 0.0, "write"));
    seq.events.push_back(make_transfer(p, T, p.transfer_area));
    seq.events.push_back(make_transfer(p, T + shelved, p.transfer_area));
    seq.events.push_back(make_control(p, 2.0 * T + shelved, "read"));
    seq.windows.push_back({2.0 * T + shelved, window_width(p), 0});
    finish(seq, p);
    return seq;
}

PulseSequence build_multimode(const ProtocolParams& p,
                              const std::vector<double>& bin_times_ns,
                              const SegmentPlan& plan,
                              const std::vector<double>& amplitudes,
                              const std::vector<double>& phases) {
    const size_t n = bin_times_ns.size();
    if (n == 0)
        throw validation_error("multimode protocol needs at least one bin");
    if (!amplitudes.empty() && amplitudes.size() != n)
        throw validation_error("multimode amplitudes need one entry per bin");
    if (!phases.empty() && phases.size() != n)
        throw validation_error("multimode phases need one entry per bin");
    for (double a : amplitudes)
        if (a < 0) throw validation_error("bin amplitudes must be non-negative");
    std::vector<double> t_in = bin_times_ns;
    if (!std::is_sorted(t_in.begin(), t_in.end()))
        throw validation_error("multimode bin times must be ascending");

    // clearance a drive pulse needs from the nearest input envelope
    const double clear =
        envelope_support_ns(signal_template(p)) +
        envelope_support_ns(make_transfer(p, 0, std::max(p.transfer_area, 0.1)).pulse);

    std::vector<int> counts = plan.counts;
    double tau = plan.storage_ns;
    if (counts.empty()) {
        // one shared group when the first rung clears the last bin; otherwise
        // split at the largest gap so the second group arrives while the
        // first is shelved
        const double probe_tau = tau > 0 ? tau : 12.5;
        if (t_in.front() + 0.5 * probe_tau > t_in.back() + clear || n == 1) {
            counts = {static_cast<int>(n)};
        } else {
            size_t cut = 1;
            double best = -1;
            for (size_t i = 1; i < n; ++i) {
                const double gap = t_in[i] - t_in[i - 1];
                if (gap > best) { best = gap; cut = i; }
            }
            counts = {static_cast<int>(cut), static_cast<int>(n - cut)};
        }
    }
    int total = 0;
    for (int c : counts) {
        if (c <= 0) throw validation_error("segment plan has an empty group");
        total += c;
    }
    if (total != static_cast<int>(n))
        throw validation_error("segment plan does not cover every bin exactly once");

    std::vector<size_t> group_first{0};
    for (size_t g = 0; g + 1 < counts.size(); ++g)
        group_first.push_back(group_first.back() + static_cast<size_t>(counts[g]));
    if (tau <= 0)
        tau = counts.size() > 1 ? t_in[group_first[1]] - t_in[0] : 12.5;

    // rung j at R0 + j*tau/r; group k is shelved between rungs k and k+1,
    // so every bin stores for tau, shelves for tau/r, and reads in order
    const double r = p.r;
    const double R0 = t_in.front() + 0.5 * tau;
    auto rung = [&](size_t j) { return R0 + static_cast<double>(j) * tau / r; };
    for (size_t g = 0; g < counts.size(); ++g) {
        const size_t lo = group_first[g];
        const size_t hi = lo + static_cast<size_t>(counts[g]) - 1;
        const double after = g == 0 ? -INFINITY : rung(g - 1);
        if (t_in[lo] < after + clear || t_in[hi] > rung(g) - clear)
            throw validation_error(
                "multimode group " + std::to_string(g) +
                " does not fit between its transfer rungs; adjust the segment "
                "plan or storage time");
    }

    PulseSequence seq;
    seq.name = "multimode";
    for (size_t i = 0; i < n; ++i) {
        seq.inputs.push_back({t_in[i], amplitudes.empty() ? 1.0 : amplitudes[i],
                              phases.empty() ? 0.0 : phases[i]});
        seq.events.push_back(make_control(p, t_in[i], "write"));
    }
    for (size_t j = 0; j <= counts.size(); ++j)
        seq.events.push_back(make_transfer(p, rung(j), p.transfer_area));
    for (size_t i = 0; i < n; ++i) {
        const double t_out = t_in[i] + tau + tau / r;
        seq.events.push_back(make_control(p, t_out, "read"));
        seq.windows.push_back({t_out, window_width(p), static_cast<int>(i)});
    }
    finish(seq, p);
    return seq;
}

PulseSequence build_reorder_pair(const ProtocolParams& p, double t1_ns,
                                 double t2_ns) {
    if (t2_ns <= t1_ns)
        throw validation_error("reorder pair needs t1 < t2");
    const double dt = t2_ns - t1_ns;
    if (dt < 3.0 * p.t_deph_ns)
        throw validation_error(
            "reorder pair needs bins separated by at least three dephasing "
            "times; closer bins cannot be addressed independently");

    const double g = 3.0 * p.t_deph_ns;
    const double r = p.r;
    // first round rephases the later bin; the earlier bin is re-shelved for
    // (its excess storage time)/r and comes out second
    const double T1 = t2_ns + g;
    const double T2 = T1 + 2.0 * g / r;
    const double t3 = T2 + g;
    const double T3 = t3 + g;
    const double T4 = T3 + (dt + 2.0 * g) / r;
    const double t4 = T4 + g;

    PulseSequence seq;
    seq.name = "reorder";
    seq.inputs.push_back({t1_ns, 1.0, 0.0});
    seq.inputs.push_back({t2_ns, 1.0, 0.0});
    seq.events.push_back(make_control(p, t1_ns, "write"));
    seq.events.push_back(make_control(p, t2_ns, "write"));
    seq.events.push_back(make_transfer(p, T1, p.transfer_area));
    seq.events.push_back(make_transfer(p, T2, p.transfer_area));
    seq.events.push_back(make_control(p, t3, "read"));
    seq.events.push_back(make_transfer(p, T3, p.transfer_area));
    seq.events.push_back(make_transfer(p, T4, p.transfer_area));
    seq.events.push_back(make_control(p, t4, "read"));
    seq.windows.push_back({t3, window_width(p), 1});
    seq.windows.push_back({t4, window_width(p), 0});
    finish(seq, p);
    return seq;
}

PulseSequence build_interference_pair(const ProtocolParams& p, double t1_ns,
                                      double t2_ns, double mix_area,
                                      double relative_phase) {
    if (t2_ns <= t1_ns)
        throw validation_error("interference pair needs t1 < t2");
    if (t2_ns - t1_ns < 3.0 * p.t_deph_ns)
        throw validation_error(
            "interference pair needs bins separated by at least three "
            "dephasing times; closer bins cannot be addressed independently");
    const double g = 3.0 * p.t_deph_ns;
    const double r = p.r;
    // shelve the first bin midway so both bins rephase together at tau_star,
    // one stored and one shelved, then mix the two states
    const double Tb = t2_ns + g;
    const double Ta = (t1_ns + r * Tb - g / r) / (1.0 + r);
    if (Ta <= t1_ns || Ta >= t2_ns)
        throw validation_error("interference pair spacing too tight to shelve "
                               "the first bin between the inputs");
    const double tau_star = Tb + g / r;
    const double Tc = tau_star + g;
    const double t3 = Tc + r * g;
    const double Td = t3 + g;
    const double t4 = Td + r * (Td - Tc) - g;

    PulseSequence seq;
    seq.name = "interference";
    seq.inputs.push_back({t1_ns, 1.0, 0.0});
    seq.inputs.push_back({t2_ns, 1.0, relative_phase});
    seq.events.push_back(make_control(p, t1_ns, "write"));
    seq.events.push_back(make_control(p, t2_ns, "write"));
    seq.events.push_back(make_transfer(p, Ta, p.transfer_area));
    seq.events.push_back(make_transfer(p, Tb, p.transfer_area));
    seq.events.push_back(make_transfer(p, tau_star, mix_area, "mix"));
    seq.events.push_back(make_transfer(p, Tc, p.transfer_area));
    seq.events.push_back(make_control(p, t3, "read"));
    seq.events.push_back(make_transfer(p, Td, p.transfer_area));
    seq.events.push_back(make_control(p, t4, "read"));
    seq.windows.push_back({t3, window_width(p), 0});
    seq.windows.push_back({t4, window_width(p), 1});
    finish(seq, p);
    return seq;
}

} // namespace orca

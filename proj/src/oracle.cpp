#include "orca/oracle.hpp"

#include "orca/errors.hpp"
#include "orca/serialize.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

// The reference path re-derives every quantity it needs from the public
// configuration with plain loops over std::complex arrays. It shares no
// evaluation code with the production solver on purpose: envelopes, unit
// conversions and quadratures are all written out again here, so agreement
// between the two paths actually checks something.

namespace orca {

double analytic_rabi(double area_rad, double detuning_rad_s,
                     double peak_rabi_rad_s) {
    if (area_rad < 0)
        throw validation_error("pulse area must be non-negative");
    const double s = std::sin(area_rad / 2.0);
    if (detuning_rad_s == 0.0) return s * s;
    if (peak_rabi_rad_s <= 0)
        throw validation_error(
            "off-resonant transfer needs a positive peak Rabi frequency");
    // square pulse of length T = area / peak; rotation at the generalized
    // Rabi frequency, amplitude reduced by (peak/W)^2
    const double w = std::hypot(peak_rabi_rad_s, detuning_rad_s);
    const double t_pulse = area_rad / peak_rabi_rad_s;
    const double sg = std::sin(w * t_pulse / 2.0);
    const double frac = (peak_rabi_rad_s / w) * (peak_rabi_rad_s / w);
    return frac * sg * sg;
}

double analytic_doppler_decay(double k_rad_m, double sigma_v_m_s, double t_s) {
    if (sigma_v_m_s <= 0)
        throw validation_error("velocity spread must be positive");
    const double x = k_rad_m * sigma_v_m_s * t_s;
    return std::exp(-0.5 * x * x);
}

namespace {

using cx = std::complex<double>;
constexpr cx kI{0.0, 1.0};
constexpr int kDenseZ = 129; // uniform z points including both boundaries

// local copy of the Gaussian drive pulse; evaluation mirrors the documented
// envelope definition (phases counted from the pulse center)
struct RefPulse {
    double t0 = 0, fwhm = 0, peak = 0;
    double det_hz = 0, chirp = 0, phase = 0;
};

RefPulse ref_pulse(const PulseEnvelope& p) {
    return {p.center_ns, p.fwhm_ns(), p.peak_rabi,
            p.detuning_hz, p.chirp_mhz_per_ns, p.phase_rad};
}

cx ref_amp(const std::vector<RefPulse>& ps, double tau) {
    cx out = 0;
    for (const auto& p : ps) {
        const double t = tau - p.t0;
        const double u = t / p.fwhm;
        const double env = p.peak * std::exp(-4.0 * M_LN2 * u * u);
        double ph = p.phase - 2.0 * M_PI * p.det_hz * 1e-9 * t +
                    M_PI * p.chirp * 1e-3 * t * t;
        out += env * std::exp(cx(0.0, ph));
    }
    return out;
}

struct RefSystem {
    int nv = 0;
    std::vector<double> wv;             // velocity weights
    std::vector<cx> inv_l;              // 1 / (gamma_e + i(Delta_e + k_ge v))
    std::vector<cx> a_gs, a_gd;         // free decay/rotation rates
    std::vector<double> cv, dv;         // coupling sqrt(d w_v) and d w_v
    cx m0 = 0;                          // linear absorption operator
    std::vector<RefPulse> control, transfer, inputs;
};

double level_gamma(const SolverConfig& cfg, Level l, double override_rad_ns) {
    if (override_rad_ns >= 0) return override_rad_ns;
    return 0.5 / cfg.scheme.level(l).lifetime_ns;
}

RefSystem build_system(const SolverConfig& cfg, const PulseSequence& seq) {
    RefSystem s;
    s.nv = cfg.vgrid.n();
    const double od =
        cfg.optical_depth >= 0 ? cfg.optical_depth : cfg.scheme.optical_depth;
    const double g_e = level_gamma(cfg, Level::e, cfg.gamma_e_rad_ns);
    const double g_s = level_gamma(cfg, Level::s, cfg.gamma_s_rad_ns);
    const double g_d = level_gamma(cfg, Level::d, cfg.gamma_d_rad_ns);
    const double d_e = 2.0 * M_PI * cfg.delta_single_hz * 1e-9;
    const double d_2 = 2.0 * M_PI * cfg.delta_two_hz * 1e-9;
    const double d_3 = 2.0 * M_PI * cfg.delta_three_hz * 1e-9;
    const double k_ge = cfg.signal_on_ge ? cfg.k.k_signal : cfg.k.k_control;

    for (int v = 0; v < s.nv; ++v) {
        const double vel = cfg.vgrid.v(v);
        const double w = cfg.vgrid.w(v);
        s.wv.push_back(w);
        s.inv_l.push_back(1.0 / cx(g_e, d_e + k_ge * vel * 1e-9));
        s.a_gs.push_back(cx(-g_s, -(d_2 + cfg.k.k_gs() * vel * 1e-9)));
        s.a_gd.push_back(cx(-g_d, -(d_3 + cfg.k.k_gd() * vel * 1e-9)));
        s.dv.push_back(od * w);
        s.cv.push_back(std::sqrt(od * w));
        if (cfg.populated_term && cfg.signal_on_ge)
            s.m0 -= s.dv.back() * s.inv_l.back();
    }
    for (const auto& ev : seq.events) {
        if (ev.pulse.channel == Channel::signal)
            throw validation_error(
                "weak-field inputs belong in input bins, not drive events");
        (ev.pulse.channel == Channel::control ? s.control : s.transfer)
            .push_back(ref_pulse(ev.pulse));
    }
    for (const auto& p : seq.input_envelopes()) s.inputs.push_back(ref_pulse(p));
    return s;
}

// march dE/dz = m0 E + src by the trapezoid rule on the uniform grid
void march_field(const RefSystem& s, const std::vector<cx>& gs, cx c_half,
                 cx e_in, std::vector<cx>& e) {
    const double h = 1.0 / (kDenseZ - 1);
    std::vector<cx> src(kDenseZ, cx(0.0));
    if (c_half != 0.0) {
        for (int v = 0; v < s.nv; ++v) {
            const cx f = kI * s.cv[v] * s.inv_l[v] * c_half;
            const cx* col = gs.data() + static_cast<std::size_t>(v) * kDenseZ;
            for (int i = 0; i < kDenseZ; ++i) src[i] += f * col[i];
        }
    }
    const cx ap = 1.0 + 0.5 * h * s.m0;
    const cx am = 1.0 - 0.5 * h * s.m0;
    e[0] = e_in;
    for (int i = 0; i + 1 < kDenseZ; ++i)
        e[i + 1] = (e[i] * ap + 0.5 * h * (src[i] + src[i + 1])) / am;
}

void derivative(const RefSystem& s, const std::vector<cx>& gs,
                const std::vector<cx>& gd, const std::vector<cx>& e, cx c_half,
                cx t_half, std::vector<cx>& dgs, std::vector<cx>& dgd) {
    const double c2 = std::norm(c_half);
    for (int v = 0; v < s.nv; ++v) {
        const cx ags = s.a_gs[v] - c2 * s.inv_l[v];
        const cx agd = s.a_gd[v];
        const cx drive = -kI * std::conj(c_half) * s.cv[v] * s.inv_l[v];
        const std::size_t off = static_cast<std::size_t>(v) * kDenseZ;
        for (int i = 0; i < kDenseZ; ++i) {
            const cx S = gs[off + i], D = gd[off + i];
            dgs[off + i] = ags * S + drive * e[i] - kI * t_half * D;
            dgd[off + i] = agd * D - kI * std::conj(t_half) * S;
        }
    }
}

double z_excitation(const RefSystem& s, const std::vector<cx>& gs,
                    const std::vector<cx>& gd) {
    const double h = 1.0 / (kDenseZ - 1);
    double total = 0;
    for (int v = 0; v < s.nv; ++v) {
        const std::size_t off = static_cast<std::size_t>(v) * kDenseZ;
        double acc = 0;
        for (int i = 0; i < kDenseZ; ++i) {
            const double val = std::norm(gs[off + i]) + std::norm(gd[off + i]);
            acc += (i == 0 || i == kDenseZ - 1) ? 0.5 * val : val;
        }
        total += s.wv[v] * acc * h;
    }
    return total;
}

} // namespace

SimulationRecord reference_integrate(const SolverConfig& cfg,
                                     const PulseSequence& seq,
                                     double dtau_ps) {
    if (cfg.tier != ModelTier::four_level)
        throw validation_error("reference integrator only covers the "
                               "four-level tier");
    if (cfg.vgrid.n() > 9 || cfg.n_z > 8)
        throw validation_error("reference integrator refuses more than 9 "
                               "velocity classes or 8 z points; it is slow by "
                               "design");
    if (cfg.initial_gs.size() != 0 || cfg.initial_gd.size() != 0)
        throw validation_error("injected initial coherences are not supported "
                               "by the reference path");
    if (!(dtau_ps > 0)) throw validation_error("oracle step must be positive");

    RefSystem sys = build_system(cfg, seq);

    double t0 = std::isfinite(cfg.tau_start_ns) ? cfg.tau_start_ns : seq.t_start_ns;
    double t1 = std::isfinite(cfg.tau_end_ns) ? cfg.tau_end_ns : seq.t_end_ns;
    for (const auto& w : seq.windows)
        t1 = std::max(t1, w.center_ns + 0.5 * w.width_ns);
    if (!(t1 > t0))
        throw validation_error("empty integration span for the reference path");

    const double dt = dtau_ps * 1e-3;
    const long n_steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
    const long stride = std::max(1L, std::lround(1.0 / dtau_ps));

    const std::size_t n = static_cast<std::size_t>(sys.nv) * kDenseZ;
    std::vector<cx> gs(n, cx(0.0)), gd(n, cx(0.0));
    std::vector<cx> k1s(n), k1d(n), k2s(n), k2d(n), pred_s(n), pred_d(n);
    std::vector<cx> e(kDenseZ), e_pred(kDenseZ);

    SimulationRecord rec;
    rec.n_q = 1;
    rec.velocity_weights = cfg.vgrid.w;
    rec.fingerprint = config_fingerprint(cfg, seq);
    for (const auto& w : seq.windows) {
        WindowResult wr;
        wr.center_ns = w.center_ns;
        wr.width_ns = w.width_ns;
        wr.source_bin = w.source_bin;
        rec.windows.push_back(wr);
    }

    std::vector<double> taus;
    std::vector<cx> eins, eouts;
    std::vector<double> excs, cins, couts;
    double cum_in = 0, cum_out = 0;
    double prev_in2 = 0, prev_out2 = 0;

    auto record = [&](double tau, cx ein, cx eout) {
        taus.push_back(tau);
        eins.push_back(ein);
        eouts.push_back(eout);
        const double exc = z_excitation(sys, gs, gd);
        if (!std::isfinite(exc)) throw divergence_error("excitation is no longer finite", tau);
        excs.push_back(exc);
        cins.push_back(cum_in);
        couts.push_back(cum_out);
    };

    cx ein = ref_amp(sys.inputs, t0);
    march_field(sys, gs, 0.5 * ref_amp(sys.control, t0), ein, e);
    prev_in2 = std::norm(ein);
    prev_out2 = std::norm(e[kDenseZ - 1]);
    record(t0, ein, e[kDenseZ - 1]);

    double t_prev = t0;
    for (long step = 1; step <= n_steps; ++step) {
        const double t_next = t0 + static_cast<double>(step) * dt;
        const double h = t_next - t_prev;
        const cx c_now = 0.5 * ref_amp(sys.control, t_prev);
        const cx t_now = 0.5 * ref_amp(sys.transfer, t_prev);
        const cx c_nxt = 0.5 * ref_amp(sys.control, t_next);
        const cx t_nxt = 0.5 * ref_amp(sys.transfer, t_next);

        derivative(sys, gs, gd, e, c_now, t_now, k1s, k1d);
        for (std::size_t i = 0; i < n; ++i) {
            pred_s[i] = gs[i] + h * k1s[i];
            pred_d[i] = gd[i] + h * k1d[i];
        }
        const cx ein_nxt = ref_amp(sys.inputs, t_next);
        march_field(sys, pred_s, c_nxt, ein_nxt, e_pred);
        derivative(sys, pred_s, pred_d, e_pred, c_nxt, t_nxt, k2s, k2d);
        for (std::size_t i = 0; i < n; ++i) {
            gs[i] += 0.5 * h * (k1s[i] + k2s[i]);
            gd[i] += 0.5 * h * (k1d[i] + k2d[i]);
        }
        march_field(sys, gs, c_nxt, ein_nxt, e);

        const double in2 = std::norm(ein_nxt);
        const double out2 = std::norm(e[kDenseZ - 1]);
        cum_in += 0.5 * h * (prev_in2 + in2);
        cum_out += 0.5 * h * (prev_out2 + out2);
        for (auto& w : rec.windows) {
            const double lo = w.center_ns - 0.5 * w.width_ns;
            const double hi = w.center_ns + 0.5 * w.width_ns;
            if (t_prev >= lo - 1e-12 && t_next <= hi + 1e-12)
                w.energy_out += 0.5 * h * (prev_out2 + out2);
        }
        prev_in2 = in2;
        prev_out2 = out2;
        if (step % stride == 0 || step == n_steps)
            record(t_next, ein_nxt, e[kDenseZ - 1]);
        t_prev = t_next;
    }

    const std::size_t m = taus.size();
    rec.tau_ns = taus;
    rec.field_in.resize(static_cast<Eigen::Index>(m), 1);
    rec.field_out.resize(static_cast<Eigen::Index>(m), 1);
    for (std::size_t i = 0; i < m; ++i) {
        rec.field_in(static_cast<Eigen::Index>(i), 0) = eins[i];
        rec.field_out(static_cast<Eigen::Index>(i), 0) = eouts[i];
    }
    rec.excitation = excs;
    rec.energy_in_cum = cins;
    rec.energy_out_cum = couts;
    rec.total_energy_in = cum_in;
    rec.total_energy_out = cum_out;

    const auto envs = seq.input_envelopes();
    for (auto& w : rec.windows) {
        double e_in_bin = 0;
        if (w.source_bin >= 0 && w.source_bin < static_cast<int>(envs.size())) {
            const auto& p = envs[static_cast<std::size_t>(w.source_bin)];
            e_in_bin = p.peak_rabi * p.peak_rabi * p.fwhm_ns() *
                       std::sqrt(M_PI / (8.0 * M_LN2));
        }
        w.energy_in = e_in_bin;
        w.efficiency = e_in_bin > 0 ? w.energy_out / e_in_bin : NAN;
    }
    return rec;
}

OracleResult reference_window_energy(const SolverConfig& cfg,
                                     const PulseSequence& seq,
                                     std::size_t window, double dtau_ps) {
    const SimulationRecord rec = reference_integrate(cfg, seq, dtau_ps);
    if (window >= rec.windows.size())
        throw lookup_error("window index out of range for this sequence");
    return {rec.windows[window].energy_out, "heun fine-step reference",
            dtau_ps};
}

} // namespace orca

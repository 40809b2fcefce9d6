#include "orca/serialize.hpp"

#include "orca/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

namespace orca {

namespace {

void add_pulse(Fingerprint& f, const PulseEnvelope& p) {
    f.add(static_cast<int>(p.channel));
    f.add(p.center_ns);
    f.add(p.fwhm_ps);
    f.add(p.peak_rabi);
    f.add(p.detuning_hz);
    f.add(p.chirp_mhz_per_ns);
    f.add(p.phase_rad);
    f.add(p.pol.label);
    for (int q = 0; q < 3; ++q) {
        f.add(p.pol.q[q].real());
        f.add(p.pol.q[q].imag());
    }
}

void add_matrix(Fingerprint& f, const Eigen::MatrixXcd& m) {
    f.add(static_cast<int>(m.rows()));
    f.add(static_cast<int>(m.cols()));
    if (m.size())
        f.add_bytes(m.data(),
                    static_cast<std::size_t>(m.size()) * sizeof(*m.data()));
}

} // namespace

std::uint64_t config_fingerprint(const SolverConfig& cfg,
                                 const PulseSequence& seq) {
    Fingerprint f;

    // atom and medium
    f.add(cfg.scheme.I);
    f.add(cfg.scheme.mass_kg);
    f.add(cfg.scheme.optical_depth);
    for (int i = 0; i < 3; ++i) f.add(cfg.scheme.wavelength_nm[i]);
    for (const auto& lv : cfg.scheme.fine) {
        f.add(lv.label);
        f.add(lv.J);
        f.add(lv.lifetime_ns);
        f.add(lv.A_MHz);
        f.add(lv.B_MHz);
    }
    const auto& rho = cfg.scheme.ground_population();
    f.add(static_cast<int>(rho.size()));
    for (Eigen::Index i = 0; i < rho.size(); ++i) f.add(rho[i]);

    f.add(static_cast<int>(cfg.vgrid.n()));
    f.add(cfg.vgrid.sigma_v);
    for (Eigen::Index i = 0; i < cfg.vgrid.v.size(); ++i) {
        f.add(cfg.vgrid.v[i]);
        f.add(cfg.vgrid.w[i]);
    }

    f.add(cfg.k.k_signal);
    f.add(cfg.k.k_control);
    f.add(cfg.k.k_transfer);

    // solver knobs (worker count deliberately excluded)
    f.add(cfg.optical_depth);
    f.add(cfg.delta_single_hz);
    f.add(cfg.delta_two_hz);
    f.add(cfg.delta_three_hz);
    f.add(cfg.gamma_e_rad_ns);
    f.add(cfg.gamma_s_rad_ns);
    f.add(cfg.gamma_d_rad_ns);
    f.add(cfg.n_z);
    f.add(cfg.cell_length_m);
    f.add(cfg.dtau_ps);
    f.add(std::isnan(cfg.tau_start_ns));
    f.add(std::isnan(cfg.tau_start_ns) ? 0.0 : cfg.tau_start_ns);
    f.add(std::isnan(cfg.tau_end_ns));
    f.add(std::isnan(cfg.tau_end_ns) ? 0.0 : cfg.tau_end_ns);
    f.add(static_cast<int>(cfg.tier));
    f.add(cfg.populated_term);
    f.add(cfg.signal_on_ge);
    // snapshot times matter (they force sample points), their order does not
    std::vector<double> snaps = cfg.snapshot_times_ns;
    std::sort(snaps.begin(), snaps.end());
    f.add(static_cast<int>(snaps.size()));
    for (double t : snaps) f.add(t);
    add_matrix(f, cfg.initial_gs);
    add_matrix(f, cfg.initial_gd);

    // sequence
    f.add(seq.name);
    f.add(seq.r);
    f.add(seq.t_deph_ns);
    f.add(static_cast<int>(seq.events.size()));
    for (const auto& ev : seq.events) {
        f.add(ev.role);
        add_pulse(f, ev.pulse);
    }
    add_pulse(f, seq.signal_template);
    f.add(static_cast<int>(seq.inputs.size()));
    for (const auto& b : seq.inputs) {
        f.add(b.center_ns);
        f.add(b.amplitude);
        f.add(b.phase_rad);
    }
    f.add(static_cast<int>(seq.windows.size()));
    for (const auto& w : seq.windows) {
        f.add(w.center_ns);
        f.add(w.width_ns);
        f.add(w.source_bin);
    }
    return f.value();
}

std::string record_manifest_json(const SimulationRecord& rec) {
    nlohmann::ordered_json j;
    char fp[19];
    std::snprintf(fp, sizeof fp, "%016llx",
                  static_cast<unsigned long long>(rec.fingerprint));
    j["fingerprint"] = fp;
    j["samples"] = rec.tau_ns.size();
    j["components"] = rec.n_q;
    j["total_energy_in"] = rec.total_energy_in;
    j["total_energy_out"] = rec.total_energy_out;
    j["events"] = rec.events_applied;

    auto& jw = j["windows"] = nlohmann::ordered_json::array();
    for (const auto& w : rec.windows) {
        nlohmann::ordered_json e;
        e["center_ns"] = w.center_ns;
        e["width_ns"] = w.width_ns;
        e["source_bin"] = w.source_bin;
        e["energy_in"] = w.energy_in;
        e["energy_out"] = w.energy_out;
        if (std::isnan(w.efficiency))
            e["efficiency"] = nullptr;
        else
            e["efficiency"] = w.efficiency;
        jw.push_back(std::move(e));
    }
    auto& js = j["snapshots"] = nlohmann::ordered_json::array();
    for (const auto& s : rec.snapshots) js.push_back(s.tau_ns);
    return j.dump(2) + "\n";
}

std::string field_trace_csv(const SimulationRecord& rec) {
    std::string out = "tau_ps, reE, imE, Q\n";
    char line[128];
    for (std::size_t i = 0; i < rec.tau_ns.size(); ++i) {
        for (int q = 0; q < rec.n_q; ++q) {
            const auto e = rec.field_out(static_cast<Eigen::Index>(i), q);
            std::snprintf(line, sizeof line, "%.6f, %.9e, %.9e, %d\n",
                          rec.tau_ns[i] * 1e3, e.real(), e.imag(), q);
            out += line;
        }
    }
    return out;
}

std::string efficiency_trace_csv(const std::vector<double>& t_ns,
                                 const std::vector<double>& eta,
                                 const std::vector<double>& sigma) {
    if (eta.size() != t_ns.size())
        throw validation_error("efficiency trace needs one value per time");
    if (!sigma.empty() && sigma.size() != t_ns.size())
        throw validation_error(
            "sigma column must be empty or match the times");
    std::string out = "t_storage_ns, efficiency, sigma\n";
    char line[128];
    for (std::size_t i = 0; i < t_ns.size(); ++i) {
        const double s = i < sigma.size() ? sigma[i] : 0.0;
        std::snprintf(line, sizeof line, "%.6f, %.9e, %.9e\n", t_ns[i],
                      eta[i], s);
        out += line;
    }
    return out;
}

} // namespace orca

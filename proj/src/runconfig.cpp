#include "orca/runconfig.hpp"

#include "orca/errors.hpp"
#include "orca/serialize.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

namespace orca {
namespace {

// ---------------------------------------------------------------------------
// shipped presets

// Main cell: telecom-wavelength signal stored through the populated leg's
// partner, signal and transfer counter-propagating to the control so the
// shelved coherence rephases. Window and pulse widths follow the run labels
// used throughout the result tables.
const char* kPresetMain = R"(schema_version = 1
species = rb87.species

solver.tier = four_level
solver.temperature_K = 393.15
solver.classes = 33
solver.n_z = 12
solver.dtau_ps = 2
solver.cell_length_m = 0.075
solver.delta_single_ghz = 6
solver.signal_on_ge = false
solver.populated_term = false

beams.signal_dir = -1
beams.control_dir = 1
beams.transfer_dir = -1

protocol.name = rephased
protocol.storage_ns = 25
protocol.signal_fwhm_ps = 330
protocol.control_fwhm_ps = 330
protocol.transfer_fwhm_ps = 330
protocol.control_area_pi = 2
protocol.transfer_area_pi = 1
protocol.window_ns = 0.984

run.label = paper-main
)";

// Low-temperature long cell driven on the populated leg; the weak field sees
// linear absorption, and the sublevel structure matters, so this one runs the
// hyperfine tier with the linearly polarized beam set.
const char* kPresetAppB = R"(schema_version = 1
species = rb87.species

solver.tier = hyperfine
solver.temperature_K = 343.15
solver.classes = 65
solver.n_z = 8
solver.dtau_ps = 2
solver.cell_length_m = 0.14
solver.delta_single_ghz = 6
solver.signal_on_ge = true
solver.populated_term = true

beams.signal_dir = 1
beams.control_dir = -1
beams.transfer_dir = -1

protocol.name = rephased
protocol.storage_ns = 25
protocol.signal_fwhm_ps = 500
protocol.control_fwhm_ps = 500
protocol.transfer_fwhm_ps = 330
protocol.control_area_pi = 2
protocol.transfer_area_pi = 1
protocol.window_ns = 1.2
protocol.signal_pol = H
protocol.control_pol = V
protocol.transfer_pol = V

run.label = paper-appB
)";

// Spin-polarized variant of the low-temperature cell: optical pumping into
// the stretched ground sublevel plus an all-sigma+ beam set confines the
// dynamics to the single stretched chain, and chirped transfer pulses keep
// the shelving step uniform across the Doppler profile.
const char* kPresetStretched = R"(schema_version = 1
species = rb87.species
species.ground_population = stretched

solver.tier = hyperfine
solver.temperature_K = 343.15
solver.classes = 33
solver.n_z = 8
solver.dtau_ps = 2
solver.cell_length_m = 0.14
solver.delta_single_ghz = 6
solver.signal_on_ge = true
solver.populated_term = true

beams.signal_dir = 1
beams.control_dir = -1
beams.transfer_dir = -1

protocol.name = rephased
protocol.storage_ns = 25
protocol.signal_fwhm_ps = 500
protocol.control_fwhm_ps = 500
protocol.transfer_fwhm_ps = 500
protocol.control_area_pi = 2
protocol.transfer_area_pi = 3
protocol.transfer_chirp_mhz_ns = 1500
protocol.window_ns = 1.2
protocol.signal_pol = sigma+
protocol.control_pol = sigma+
protocol.transfer_pol = sigma+

run.label = stretched
)";

const std::map<std::string, const char*>& preset_table() {
    static const std::map<std::string, const char*> t = {
        {"paper-main", kPresetMain},
        {"paper-appB", kPresetAppB},
        {"stretched", kPresetStretched},
    };
    return t;
}

// ---------------------------------------------------------------------------

std::string resolve_species_path(const std::string& given,
                                 const std::string& base_dir) {
    namespace fs = std::filesystem;
    if (fs::exists(given)) return given;
    fs::path rel = fs::path(base_dir) / given;
    if (fs::exists(rel)) return rel.string();
    fs::path data = fs::path(ORCA_DATA_DIR) / given;
    if (fs::exists(data)) return data.string();
    throw config_error("species file '" + given + "' not found (tried '" +
                       rel.string() + "' and '" + data.string() + "')");
}

ModelTier parse_tier(const std::string& name) {
    if (name == "four_level") return ModelTier::four_level;
    if (name == "hyperfine") return ModelTier::hyperfine;
    throw config_error("unknown solver tier '" + name +
                       "' (expected four_level or hyperfine)");
}

int beam_dir(KeyValueFile& kv, const std::string& key, int fallback) {
    long d = kv.get_int(key, fallback);
    if (d != 1 && d != -1)
        throw config_error(key + " must be +1 or -1");
    return static_cast<int>(d);
}

long env_workers() {
    const char* s = std::getenv("ORCAMEM_WORKERS");
    if (!s) return 1;
    char* end = nullptr;
    long n = std::strtol(s, &end, 10);
    if (end == s || *end != '\0' || n < 1)
        throw config_error(std::string("ORCAMEM_WORKERS='") + s +
                           "' is not a positive integer");
    return n;
}

std::vector<SweepAxis> parse_axes(KeyValueFile& kv) {
    // group sweep.axis.N.* by N, numerically ordered
    std::map<long, std::string> indices;
    for (const auto& key : kv.keys_with_prefix("sweep.axis.")) {
        std::string rest = key.substr(std::string("sweep.axis.").size());
        auto dot = rest.find('.');
        std::string idx = dot == std::string::npos ? rest : rest.substr(0, dot);
        char* end = nullptr;
        long n = std::strtol(idx.c_str(), &end, 10);
        if (end == idx.c_str() || *end != '\0')
            throw config_error("bad sweep axis key '" + key + "'");
        indices.emplace(n, idx);
    }
    std::vector<SweepAxis> axes;
    for (const auto& [n, idx] : indices) {
        const std::string stem = "sweep.axis." + idx + ".";
        SweepAxis ax;
        ax.path = kv.get_string(stem + "path");
        if (kv.has(stem + "values")) {
            ax.values = kv.get_list(stem + "values");
        } else {
            double from = kv.get_number(stem + "from");
            double to = kv.get_number(stem + "to");
            long count = kv.get_int(stem + "count");
            if (count < 1)
                throw config_error(stem + "count must be at least 1");
            for (long i = 0; i < count; ++i)
                ax.values.push_back(
                    count == 1 ? from
                               : from + (to - from) * static_cast<double>(i) /
                                            static_cast<double>(count - 1));
        }
        if (ax.values.empty())
            throw config_error("sweep axis '" + ax.path + "' has no values");
        axes.push_back(std::move(ax));
    }
    return axes;
}

RunConfig compile(KeyValueFile kv, const std::string& base_dir) {
    RunConfig rc;
    rc.base_dir = base_dir;

    long schema = kv.get_int("schema_version");
    if (schema != 1)
        throw config_error("unsupported schema_version " +
                           std::to_string(schema));
    if (kv.has("preset")) kv.mark_consumed("preset"); // provenance only

    // --- species ---------------------------------------------------------
    rc.species_path =
        resolve_species_path(kv.get_string("species", "rb87.species"), base_dir);
    rc.species = parse_species_file(rc.species_path);
    if (kv.has("species.ground_population"))
        rc.species.ground_population = kv.get_string("species.ground_population");

    SolverConfig& cfg = rc.solver;
    cfg.scheme = build_level_scheme(rc.species);

    // --- solver ----------------------------------------------------------
    cfg.tier = parse_tier(kv.get_string("solver.tier", "four_level"));
    double temperature = kv.get_number("solver.temperature_K", 393.15);
    long classes = kv.get_int("solver.classes", 33);
    double span = kv.get_number("solver.velocity_span", 4.0);
    cfg.vgrid = velocity_grid(temperature, rc.species.mass_kg,
                              static_cast<int>(classes), span);

    cfg.optical_depth = kv.get_number("solver.optical_depth", -1);
    cfg.delta_single_hz = kv.get_number("solver.delta_single_ghz", 6) * 1e9;
    cfg.delta_two_hz = kv.get_number("solver.delta_two_mhz", 0) * 1e6;
    cfg.delta_three_hz = kv.get_number("solver.delta_three_mhz", 0) * 1e6;
    cfg.gamma_e_rad_ns = kv.get_number("solver.gamma_e_rad_ns", -1);
    cfg.gamma_s_rad_ns = kv.get_number("solver.gamma_s_rad_ns", -1);
    cfg.gamma_d_rad_ns = kv.get_number("solver.gamma_d_rad_ns", -1);
    cfg.n_z = static_cast<int>(kv.get_int("solver.n_z", 16));
    cfg.cell_length_m = kv.get_number("solver.cell_length_m", 0.075);
    cfg.dtau_ps = kv.get_number("solver.dtau_ps", 2.0);
    cfg.signal_on_ge = kv.get_bool("solver.signal_on_ge", false);
    cfg.populated_term = kv.get_bool("solver.populated_term", false);
    cfg.workers = static_cast<int>(kv.get_int("solver.workers", env_workers()));
    if (kv.has("solver.tau_start_ns"))
        cfg.tau_start_ns = kv.get_number("solver.tau_start_ns");
    if (kv.has("solver.tau_end_ns"))
        cfg.tau_end_ns = kv.get_number("solver.tau_end_ns");
    cfg.snapshot_times_ns = kv.get_list("solver.snapshots_ns", {});

    // --- beam geometry ---------------------------------------------------
    // the weak field rides whichever leg solver.signal_on_ge selects; the
    // classical control takes the other one
    int dir_s = beam_dir(kv, "beams.signal_dir", -1);
    int dir_c = beam_dir(kv, "beams.control_dir", 1);
    int dir_t = beam_dir(kv, "beams.transfer_dir", -1);
    double wl_ge = cfg.scheme.wavelength_nm[static_cast<int>(Leg::ge)];
    double wl_es = cfg.scheme.wavelength_nm[static_cast<int>(Leg::es)];
    double wl_sd = cfg.scheme.wavelength_nm[static_cast<int>(Leg::sd)];
    double wl_signal = cfg.signal_on_ge ? wl_ge : wl_es;
    double wl_control = cfg.signal_on_ge ? wl_es : wl_ge;
    cfg.k = wavevectors(wl_signal, dir_s, wl_control, dir_c, wl_sd, dir_t);

    // --- protocol --------------------------------------------------------
    rc.protocol = kv.get_string("protocol.name", "rephased");
    rc.storage_ns = kv.get_number("protocol.storage_ns", 25);

    ProtocolParams& p = rc.params;
    p.signal_peak = kv.get_number("protocol.signal_peak_rad_ns", 1e-3);
    p.signal_fwhm_ps = kv.get_number("protocol.signal_fwhm_ps", 330);
    p.control_fwhm_ps = kv.get_number("protocol.control_fwhm_ps", 330);
    p.control_peak = kv.get_number("protocol.control_peak_rad_ns", 0);
    p.control_area = kv.get_number("protocol.control_area_pi", 1) * M_PI;
    p.transfer_fwhm_ps = kv.get_number("protocol.transfer_fwhm_ps", 330);
    p.transfer_area = kv.get_number("protocol.transfer_area_pi", 1) * M_PI;
    p.transfer_chirp_mhz_ns = kv.get_number("protocol.transfer_chirp_mhz_ns", 0);
    p.window_width_ns = kv.get_number("protocol.window_ns", 0);
    p.signal_pol = Polarization::parse(kv.get_string("protocol.signal_pol", "sigma+"));
    p.control_pol = Polarization::parse(kv.get_string("protocol.control_pol", "sigma+"));
    p.transfer_pol = Polarization::parse(kv.get_string("protocol.transfer_pol", "sigma+"));
    p.r = cfg.k.ratio();
    p.t_deph_ns = dephasing_time_ns(cfg.k.k_gs(), cfg.vgrid.sigma_v);

    rc.bins_ns = kv.get_list("protocol.bins_ns", {});
    rc.bin_amplitudes = kv.get_list("protocol.bin_amplitudes", {});
    rc.bin_phases = kv.get_list("protocol.bin_phases", {});
    for (double c : kv.get_list("protocol.segment_counts", {})) {
        if (c < 1 || c != std::floor(c))
            throw config_error("protocol.segment_counts must be positive integers");
        rc.plan.counts.push_back(static_cast<int>(c));
    }
    rc.plan.storage_ns = kv.get_number("protocol.segment_storage_ns", 0);
    rc.mix_area = kv.get_number("protocol.mix_area_pi", 0.5) * M_PI;
    rc.relative_phase = kv.get_number("protocol.relative_phase_rad", 0);

    // --- run bookkeeping -------------------------------------------------
    rc.output_dir = kv.get_string("run.output_dir", "out");
    rc.label = kv.get_string("run.label", "run");
    rc.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", 0));
    rc.axes = parse_axes(kv);

    kv.require_all_consumed();
    rc.source = std::move(kv);

    // fail on impossible protocols now, not at run time
    rc.sequence();
    return rc;
}

} // namespace

PulseSequence RunConfig::sequence() const {
    if (protocol == "standard") return build_standard_orca(params, storage_ns);
    if (protocol == "rephased") return build_rephased(params, storage_ns);
    if (protocol == "multimode") {
        if (bins_ns.empty())
            throw config_error("protocol.bins_ns is required for multimode runs");
        SegmentPlan pl = plan;
        if (pl.storage_ns <= 0) pl.storage_ns = storage_ns;
        return build_multimode(params, bins_ns, pl, bin_amplitudes, bin_phases);
    }
    if (protocol == "reorder" || protocol == "interference") {
        if (bins_ns.size() != 2)
            throw config_error("protocol.bins_ns must hold exactly two times for '" +
                               protocol + "'");
        if (protocol == "reorder")
            return build_reorder_pair(params, bins_ns[0], bins_ns[1]);
        return build_interference_pair(params, bins_ns[0], bins_ns[1], mix_area,
                                       relative_phase);
    }
    throw config_error("unknown protocol '" + protocol + "'");
}

std::uint64_t RunConfig::fingerprint() const {
    return config_fingerprint(solver, sequence());
}

RunConfig load_run_config(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    std::string dir = std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    if (kv.has("preset")) {
        KeyValueFile merged = KeyValueFile::parse_string(
            preset_text(kv.get_string("preset")), path + ":preset");
        for (const auto& key : kv.keys_with_prefix(""))
            merged.set(key, kv.get_string(key));
        return compile(std::move(merged), dir);
    }
    return compile(std::move(kv), dir);
}

RunConfig run_config_from_string(const std::string& text,
                                 const std::string& base_dir) {
    KeyValueFile kv = KeyValueFile::parse_string(text);
    if (kv.has("preset")) {
        KeyValueFile merged = KeyValueFile::parse_string(
            preset_text(kv.get_string("preset")), "<string>:preset");
        for (const auto& key : kv.keys_with_prefix(""))
            merged.set(key, kv.get_string(key));
        return compile(std::move(merged), base_dir);
    }
    return compile(std::move(kv), base_dir);
}

RunConfig with_override(const RunConfig& base, const std::string& path,
                        const std::string& value) {
    KeyValueFile kv = base.source;
    kv.set(path, value);
    // known keys were consumed during the base compile; recompiling from the
    // canonical text restores a clean slate so a bogus path still trips
    // require_all_consumed
    KeyValueFile fresh =
        KeyValueFile::parse_string(kv.canonical(), base.source.origin());
    return compile(std::move(fresh), base.base_dir);
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, text] : preset_table()) names.push_back(name);
    return names;
}

const std::string& preset_text(const std::string& name) {
    static std::map<std::string, std::string> cache;
    auto it = preset_table().find(name);
    if (it == preset_table().end())
        throw lookup_error("no preset named '" + name + "'");
    return cache.emplace(name, it->second).first->second;
}

RunConfig preset(const std::string& name) {
    RunConfig rc = run_config_from_string(preset_text(name));
    rc.source.set("preset", name);
    return rc;
}

} // namespace orca

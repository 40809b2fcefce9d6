#pragma once

// Run configuration files: the flat dotted-key format (schema_version 1)
// compiled into everything one run needs. A file either stands alone or
// names a preset whose keys it overlays; overrides always win key by key.
// Unknown keys are hard errors, so a sweep axis pointing at a misspelled
// path fails before any point runs.

#include "orca/kvfile.hpp"
#include "orca/protocol.hpp"
#include "orca/solver.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace orca {

struct SweepAxis {
    std::string path;           // dotted key the axis rewrites per point
    std::vector<double> values;
};

struct RunConfig {
    // merged key-value view (preset keys plus user overrides); its canonical
    // form is what sweep bookkeeping and artifact names key off
    KeyValueFile source;
    std::string base_dir = ".";

    std::string species_path;
    SpeciesData species;
    SolverConfig solver;

    std::string protocol = "rephased";
    ProtocolParams params;
    double storage_ns = 25;
    std::vector<double> bins_ns;
    std::vector<double> bin_amplitudes;
    std::vector<double> bin_phases;
    SegmentPlan plan;
    double mix_area = M_PI_2;     // interference pairs only
    double relative_phase = 0;

    std::string output_dir = "out";
    std::string label = "run";
    std::uint64_t seed = 0;
    std::vector<SweepAxis> axes;

    PulseSequence sequence() const;
    std::uint64_t fingerprint() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_string(const std::string& text,
                                 const std::string& base_dir = ".");

// rewrite one dotted key on the merged view and recompile. Sweep points go
// through here, so every swept path gets the same schema checking as a key
// typed into the file.
RunConfig with_override(const RunConfig& base, const std::string& path,
                        const std::string& value);

std::vector<std::string> preset_names();
const std::string& preset_text(const std::string& name); // throws lookup_error
RunConfig preset(const std::string& name);

} // namespace orca

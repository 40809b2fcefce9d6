#pragma once

// Stable hashing plus the on-disk formats for runs and traces. Fingerprints
// feed sweep resumption and the determinism checks, so every field that can
// change a result must be folded in, and nothing volatile (timestamps,
// worker counts) may be.

#include "orca/solver.hpp"

#include <cstdint>
#include <cstring>
#include <string>

namespace orca {

// FNV-1a, 64 bit
class Fingerprint {
  public:
    void add_bytes(const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 1099511628211ull;
        }
    }
    void add(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        add_bytes(&bits, sizeof bits);
    }
    void add(std::int64_t v) { add_bytes(&v, sizeof v); }
    void add(int v) { add(static_cast<std::int64_t>(v)); }
    void add(bool v) { add(static_cast<std::int64_t>(v)); }
    void add(const std::string& s) {
        add_bytes(s.data(), s.size());
        add(static_cast<std::int64_t>(s.size()));
    }
    std::uint64_t value() const { return h_; }

  private:
    std::uint64_t h_ = 1469598103934665603ull;
};

// covers the physics-relevant configuration and the full pulse sequence;
// excludes worker count and snapshot bookkeeping order
std::uint64_t config_fingerprint(const SolverConfig& cfg,
                                 const PulseSequence& seq);

// JSON manifest describing a finished run (windows, energies, fingerprint,
// sample/snapshot inventory); field traces go to CSV alongside
std::string record_manifest_json(const SimulationRecord& rec);

// columns: tau_ps, reE, imE, Q (exit field, one row per sample and component)
std::string field_trace_csv(const SimulationRecord& rec);

// columns: t_storage_ns, efficiency, sigma
std::string efficiency_trace_csv(const std::vector<double>& t_ns,
                                 const std::vector<double>& eta,
                                 const std::vector<double>& sigma);

} // namespace orca

#pragma once

// Level-scheme data for a four-manifold ladder (g -> e -> s -> d) with
// hyperfine structure, plus Maxwell-Boltzmann velocity grids.
//
// Energy offsets are MHz relative to each manifold's fine-structure centroid
// (the A/B formula is trace-free over F with 2F+1 weights). Decay constants
// follow the coherence convention gamma = 1/(2*lifetime) in rad/ns.

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace orca {

enum class Level { g = 0, e = 1, s = 2, d = 3 };
enum class Leg { ge = 0, es = 1, sd = 2 };

// interval-rule energy of hyperfine level F within a (I, J) manifold.
// B contribution is omitted when J <= 1/2 or I <= 1/2 (vanishing denominator).
double hyperfine_energy(double A_MHz, double B_MHz, double I, double J, double F);

struct FineLevel {
    std::string label;
    double J = 0;
    double lifetime_ns = 0;   // inf allowed; <=0 means no decay (ground)
    double A_MHz = 0;
    double B_MHz = 0;
    double gamma() const;     // rad/ns
};

struct HyperfineLevel {
    double F = 0;
    double m_F = 0;
    double energy_MHz = 0;    // offset from manifold centroid
};

struct VelocityGrid {
    Eigen::VectorXd v;        // m/s, ascending, symmetric about 0
    Eigen::VectorXd w;        // weights, sum to 1
    double sigma_v = 0;       // sqrt(kB T / m)
    int n() const { return static_cast<int>(v.size()); }
};

// uniformly spaced grid over +-span*sigma with renormalized Gaussian weights;
// n_classes must be odd and >= 3 so v = 0 is always a node
VelocityGrid velocity_grid(double temperature_K, double mass_kg,
                           int n_classes, double span_sigma = 4.0);

struct SpeciesData {
    std::string name;
    double nuclear_spin = 0;
    double mass_kg = 0;
    std::array<FineLevel, 4> levels;       // indexed by Level
    double wavelength_ge_nm = 0;
    double wavelength_es_nm = 0;
    double wavelength_sd_nm = 0;
    double optical_depth = 0;
    double ground_F = -1;                  // -1: use I + J_g
    std::string ground_population = "thermal"; // thermal | stretched
};

SpeciesData parse_species_file(const std::string& path);

class LevelScheme {
  public:
    double I = 0;
    double mass_kg = 0;
    std::array<FineLevel, 4> fine;
    double wavelength_nm[3] = {0, 0, 0};   // indexed by Leg
    double optical_depth = 0;

    const FineLevel& level(Level l) const { return fine[static_cast<int>(l)]; }
    const std::vector<HyperfineLevel>& sublevels(Level l) const {
        return subs_[static_cast<int>(l)];
    }
    int n_sub(Level l) const { return static_cast<int>(sublevels(l).size()); }
    const std::vector<double>& F_values(Level l) const {
        return fvals_[static_cast<int>(l)];
    }

    // ground populations over sublevels(g), sum exactly renormalized to 1
    const Eigen::VectorXd& ground_population() const { return rho_; }
    void set_ground_population(const Eigen::VectorXd& rho);
    void set_stretched_ground();

    // relative transition amplitude for lower sublevel i -> upper sublevel k
    // absorbing polarization q in {-1,0,+1}; each leg's table is normalized so
    // its stretched sigma+ amplitude equals 1, signs kept
    double coupling(Leg leg, int q, int k_upper, int i_lower) const;
    // lookup by quantum numbers; 0 when selection rules forbid the path
    double coupling(Leg leg, double F, double m_F, int q,
                    double F_up, double m_up) const;

    friend LevelScheme build_level_scheme(const SpeciesData& sp);

  private:
    std::array<std::vector<HyperfineLevel>, 4> subs_;
    std::array<std::vector<double>, 4> fvals_;
    Eigen::VectorXd rho_;
    // tables_[leg][q+1] is (n_upper x n_lower)
    std::array<std::array<Eigen::MatrixXd, 3>, 3> tables_;
    int sub_index(Level l, double F, double m) const;
};

LevelScheme build_level_scheme(const SpeciesData& sp);

// unnormalized relative amplitude <F' m'|T^1_q|F m> within a J -> J' leg
// (Wigner-Eckart + 6j reduction, Condon-Shortley phases)
double coupling_amplitude(double I, double J_low, double F, double m, int q,
                          double J_up, double F_up, double m_up);

} // namespace orca

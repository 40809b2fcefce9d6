#include "orca/atomics.hpp"
#include "orca/angular.hpp"
#include "orca/constants.hpp"
#include "orca/errors.hpp"
#include "orca/kvfile.hpp"

#include <cmath>
#include <stdexcept>

namespace orca {

double hyperfine_energy(double A_MHz, double B_MHz, double I, double J, double F) {
    double fmin = std::abs(I - J), fmax = I + J;
    if (F < fmin - 1e-9 || F > fmax + 1e-9 ||
        std::abs(F - std::round(2 * F) / 2) > 1e-9 ||
        std::abs(std::round(2 * (F - fmin)) / 2 - (F - fmin)) > 1e-9 ||
        std::fmod(std::round(2 * (F - fmin)), 2.0) != 0.0)
        throw std::domain_error("hyperfine_energy: F outside |I-J|..I+J");
    double K = F * (F + 1) - I * (I + 1) - J * (J + 1);
    double e = 0.5 * A_MHz * K;
    if (B_MHz != 0.0 && J > 0.5 && I > 0.5) {
        double num = 3 * K * (K + 1) - 4 * I * (I + 1) * J * (J + 1);
        double den = 2 * I * (2 * I - 1) * 2 * J * (2 * J - 1);
        e += 0.5 * B_MHz * num / den;
    }
    return e;
}

double FineLevel::gamma() const {
    if (!(lifetime_ns > 0) || std::isinf(lifetime_ns)) return 0.0;
    return 1.0 / (2.0 * lifetime_ns);
}

VelocityGrid velocity_grid(double temperature_K, double mass_kg,
                           int n_classes, double span_sigma) {
    if (temperature_K <= 0) throw validation_error("velocity_grid: temperature must be > 0");
    if (mass_kg <= 0) throw validation_error("velocity_grid: mass must be > 0");
    if (n_classes < 3 || n_classes % 2 == 0)
        throw validation_error("velocity_grid: n_classes must be odd and >= 3");
    if (span_sigma <= 0) throw validation_error("velocity_grid: span must be > 0");

    VelocityGrid grid;
    grid.sigma_v = std::sqrt(k_boltzmann * temperature_K / mass_kg);
    grid.v.resize(n_classes);
    grid.w.resize(n_classes);
    int half = n_classes / 2;
    double dv = span_sigma * grid.sigma_v / half;
    // fill by mirrored pairs so symmetry survives floating point
    grid.v[half] = 0.0;
    grid.w[half] = 1.0;
    for (int i = 1; i <= half; ++i) {
        double vi = i * dv;
        double wi = std::exp(-0.5 * (vi / grid.sigma_v) * (vi / grid.sigma_v));
        grid.v[half + i] = vi;
        grid.v[half - i] = -vi;
        grid.w[half + i] = wi;
        grid.w[half - i] = wi;
    }
    grid.w /= grid.w.sum();
    return grid;
}

double coupling_amplitude(double I, double J_low, double F, double m, int q,
                          double J_up, double F_up, double m_up) {
    if (q < -1 || q > 1) throw std::domain_error("coupling_amplitude: q must be -1, 0 or +1");
    if (std::abs(m_up - m - q) > 1e-9) return 0.0;
    if (std::abs(F_up - F) > 1.0 + 1e-9) return 0.0;
    double six = wigner_6j(J_up, F_up, I, F, J_low, 1.0);
    if (six == 0.0) return 0.0;
    double cg = clebsch_gordan(F, m, 1.0, q, F_up, m_up);
    if (cg == 0.0) return 0.0;
    int ph = static_cast<int>(std::llround(J_up + I + F + 1));
    double sign = (ph % 2 != 0) ? -1.0 : 1.0;
    return sign * std::sqrt(2 * F + 1) * six * cg;
}

namespace {

std::vector<double> f_range(double I, double J) {
    std::vector<double> out;
    for (double F = std::abs(I - J); F <= I + J + 1e-9; F += 1.0) out.push_back(F);
    return out;
}

Level leg_lower(Leg leg) {
    switch (leg) {
        case Leg::ge: return Level::g;
        case Leg::es: return Level::e;
        case Leg::sd: return Level::s;
    }
    throw std::logic_error("bad leg");
}

Level leg_upper(Leg leg) {
    switch (leg) {
        case Leg::ge: return Level::e;
        case Leg::es: return Level::s;
        case Leg::sd: return Level::d;
    }
    throw std::logic_error("bad leg");
}

} // namespace

int LevelScheme::sub_index(Level l, double F, double m) const {
    const auto& list = sublevels(l);
    for (int i = 0; i < static_cast<int>(list.size()); ++i)
        if (std::abs(list[i].F - F) < 1e-9 && std::abs(list[i].m_F - m) < 1e-9)
            return i;
    return -1;
}

double LevelScheme::coupling(Leg leg, int q, int k_upper, int i_lower) const {
    return tables_[static_cast<int>(leg)][q + 1](k_upper, i_lower);
}

double LevelScheme::coupling(Leg leg, double F, double m_F, int q,
                             double F_up, double m_up) const {
    if (q < -1 || q > 1) throw std::domain_error("coupling: q must be -1, 0 or +1");
    int i = sub_index(leg_lower(leg), F, m_F);
    int k = sub_index(leg_upper(leg), F_up, m_up);
    if (i < 0 || k < 0) return 0.0;
    return coupling(leg, q, k, i);
}

void LevelScheme::set_ground_population(const Eigen::VectorXd& rho) {
    if (rho.size() != static_cast<Eigen::Index>(sublevels(Level::g).size()))
        throw validation_error("ground population size mismatch");
    if ((rho.array() < 0).any())
        throw validation_error("ground population must be non-negative");
    double s = rho.sum();
    if (s <= 0) throw validation_error("ground population must not vanish");
    rho_ = rho / s;
}

void LevelScheme::set_stretched_ground() {
    const auto& gs = sublevels(Level::g);
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(gs.size());
    int best = 0;
    for (int i = 1; i < static_cast<int>(gs.size()); ++i)
        if (gs[i].m_F > gs[best].m_F) best = i;
    rho[best] = 1.0;
    set_ground_population(rho);
}

LevelScheme build_level_scheme(const SpeciesData& sp) {
    LevelScheme sch;
    sch.I = sp.nuclear_spin;
    sch.mass_kg = sp.mass_kg;
    sch.fine = sp.levels;
    sch.wavelength_nm[0] = sp.wavelength_ge_nm;
    sch.wavelength_nm[1] = sp.wavelength_es_nm;
    sch.wavelength_nm[2] = sp.wavelength_sd_nm;
    sch.optical_depth = sp.optical_depth;

    if (sch.I < 0 || std::abs(2 * sch.I - std::round(2 * sch.I)) > 1e-9)
        throw validation_error("nuclear spin must be a non-negative half-integer");
    if (sch.mass_kg <= 0) throw validation_error("mass must be > 0");
    for (int l = 0; l < 4; ++l) {
        const auto& fl = sch.fine[l];
        if (fl.J < 0 || std::abs(2 * fl.J - std::round(2 * fl.J)) > 1e-9)
            throw validation_error("level " + fl.label + ": J must be a half-integer >= 0");
        if (l > 0 && !(fl.lifetime_ns > 0))
            throw validation_error("level " + fl.label + ": lifetime must be > 0");
    }
    for (double wl : sch.wavelength_nm)
        if (!(wl > 0)) throw validation_error("wavelengths must be > 0");
    if (!(sch.optical_depth > 0)) throw validation_error("optical depth must be > 0");

    // hyperfine manifolds; ground keeps a single F (populated manifold)
    for (int l = 0; l < 4; ++l) {
        const auto& fl = sch.fine[l];
        std::vector<double> fr = f_range(sch.I, fl.J);
        if (l == 0) {
            double Fg = sp.ground_F >= 0 ? sp.ground_F : sch.I + fl.J;
            bool ok = false;
            for (double F : fr)
                if (std::abs(F - Fg) < 1e-9) ok = true;
            if (!ok) throw validation_error("ground F outside |I-J|..I+J");
            fr = {Fg};
        }
        sch.fvals_[l] = fr;
        for (double F : fr) {
            double e = hyperfine_energy(fl.A_MHz, fl.B_MHz, sch.I, fl.J, F);
            for (double m = -F; m <= F + 1e-9; m += 1.0)
                sch.subs_[l].push_back({F, m, e});
        }
    }

    // coupling tables, one per leg, stretched sigma+ amplitude scaled to 1
    for (int leg = 0; leg < 3; ++leg) {
        Level lo = leg_lower(static_cast<Leg>(leg));
        Level up = leg_upper(static_cast<Leg>(leg));
        const auto& lows = sch.sublevels(lo);
        const auto& ups = sch.sublevels(up);
        double Jl = sch.level(lo).J, Ju = sch.level(up).J;

        double F_str = sch.I + Jl, Fu_str = sch.I + Ju;
        double norm = coupling_amplitude(sch.I, Jl, F_str, F_str, +1, Ju, Fu_str, F_str + 1);
        if (norm == 0.0)
            throw validation_error("stretched path vanishes on leg " + std::to_string(leg));

        for (int q = -1; q <= 1; ++q) {
            Eigen::MatrixXd t(ups.size(), lows.size());
            for (size_t k = 0; k < ups.size(); ++k)
                for (size_t i = 0; i < lows.size(); ++i)
                    t(k, i) = coupling_amplitude(sch.I, Jl, lows[i].F, lows[i].m_F, q,
                                                 Ju, ups[k].F, ups[k].m_F) / norm;
            sch.tables_[leg][q + 1] = std::move(t);
        }
    }

    // a storable scheme needs at least one dipole-allowed ladder path
    bool path = false;
    for (int i = 0; i < sch.n_sub(Level::g) && !path; ++i)
        for (int k = 0; k < sch.n_sub(Level::e) && !path; ++k)
            for (int q = -1; q <= 1 && !path; ++q)
                if (sch.coupling(Leg::ge, q, k, i) != 0.0)
                    for (int j = 0; j < sch.n_sub(Level::s) && !path; ++j)
                        for (int q2 = -1; q2 <= 1 && !path; ++q2)
                            if (sch.coupling(Leg::es, q2, j, k) != 0.0) path = true;
    if (!path)
        throw validation_error("no dipole-allowed path from the ground manifold");

    const auto& gs = sch.sublevels(Level::g);
    sch.rho_ = Eigen::VectorXd::Constant(gs.size(), 1.0 / double(gs.size()));
    sch.rho_ /= sch.rho_.sum();
    if (sp.ground_population == "stretched")
        sch.set_stretched_ground();
    else if (sp.ground_population != "thermal")
        throw validation_error("unknown ground population '" +
                               sp.ground_population + "'");
    return sch;
}

SpeciesData parse_species_file(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    long schema = kv.get_int("schema_version");
    if (schema != 1)
        throw config_error(path + ": unsupported schema_version " + std::to_string(schema));

    SpeciesData sp;
    sp.name = kv.get_string("name", "");
    sp.nuclear_spin = kv.get_fraction("nuclear_spin");
    sp.mass_kg = kv.get_number("mass_u") * atomic_mass_unit;
    const char* labels[4] = {"g", "e", "s", "d"};
    for (int l = 0; l < 4; ++l) {
        std::string p = std::string("level.") + labels[l] + ".";
        FineLevel fl;
        fl.label = labels[l];
        fl.J = parse_fraction(kv.get_string(p + "J"));
        fl.lifetime_ns = kv.get_number(p + "lifetime_ns", HUGE_VAL);
        fl.A_MHz = kv.get_number(p + "A_MHz", 0.0);
        fl.B_MHz = kv.get_number(p + "B_MHz", 0.0);
        sp.levels[l] = fl;
    }
    sp.wavelength_ge_nm = kv.get_number("wavelength_nm.ge");
    sp.wavelength_es_nm = kv.get_number("wavelength_nm.es");
    sp.wavelength_sd_nm = kv.get_number("wavelength_nm.sd");
    sp.optical_depth = kv.get_number("optical_depth");
    if (kv.has("ground.F")) sp.ground_F = kv.get_fraction("ground.F");
    sp.ground_population = kv.get_string("ground.population", "thermal");
    kv.require_all_consumed();
    return sp;
}

} // namespace orca

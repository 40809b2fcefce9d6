#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "orca/analysis.hpp"
#include "orca/errors.hpp"

#include <cmath>
#include <random>

using namespace orca;

namespace {

std::vector<RabiPoint> rabi_synthetic(double eta0, double V, double a,
                                      double phi, double noise,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<RabiPoint> pts;
    for (int i = 0; i < 16; ++i) {
        const double E = 0.05 + i * 0.4;
        const double c = std::cos(a * std::sqrt(E) + phi);
        double eta = eta0 * (1.0 - V * c * c);
        if (noise > 0) {
            const double s = noise * eta;
            eta += s * g(rng);
            pts.push_back({E, eta, s});
        } else {
            pts.push_back({E, eta, 0.0});
        }
    }
    return pts;
}

EfficiencyTrace lifetime_synthetic(LifetimeModel model, double eta0,
                                   double t_c) {
    EfficiencyTrace tr;
    for (int i = 0; i < 10; ++i) {
        const double t = model == LifetimeModel::gaussian ? 0.2 + 0.2 * i
                                                          : 10.0 + 20.0 * i;
        const double eta = model == LifetimeModel::gaussian
                               ? eta0 * std::exp(-(t / t_c) * (t / t_c))
                               : eta0 * std::exp(-t / t_c);
        tr.points.push_back({t, eta, 0.0});
    }
    return tr;
}

} // namespace

TEST_CASE("rabi fit recovers exact oscillation data to machine accuracy") {
    const double eta0 = 0.8, V = 0.9, a = 1.1, phi = 0.35;
    const FitResult fit =
        fit_rabi(rabi_synthetic(eta0, V, a, phi, 0.0, 0), 7, 50);

    CHECK(fit.param("eta0") == doctest::Approx(eta0).epsilon(1e-9));
    CHECK(fit.param("V") == doctest::Approx(V).epsilon(1e-9));
    CHECK(fit.param("a") == doctest::Approx(a).epsilon(1e-9));
    CHECK(fit.param("phi") == doctest::Approx(phi).epsilon(1e-9));
    CHECK(fit.residual_norm < 1e-8);

    // first efficiency maximum: full transfer at a sqrt(E) + phi = pi/2
    const double E_pi = std::pow((M_PI_2 - phi) / a, 2);
    CHECK(fit.pi_energy_nj == doctest::Approx(E_pi).epsilon(1e-9));
    CHECK(fit.pi_fidelity == doctest::Approx(V).epsilon(1e-9));

    CHECK_THROWS_AS(fit.param("bogus"), lookup_error);
}

TEST_CASE("rabi fit tracks noisy data within its own error bars") {
    const double V = 0.9;
    const FitResult fit =
        fit_rabi(rabi_synthetic(0.8, V, 1.1, 0.35, 0.05, 123), 42, 400);
    CHECK(std::abs(fit.param("V") - V) < 4 * fit.sigma("V") + 0.02);
    CHECK(fit.sigma("V") > 0);
    CHECK(fit.n_boot == 400);

    // same data, same seed: identical numbers including the bootstrap
    const FitResult again =
        fit_rabi(rabi_synthetic(0.8, V, 1.1, 0.35, 0.05, 123), 42, 400);
    for (std::size_t i = 0; i < fit.params.size(); ++i) {
        CHECK(fit.params[i] == again.params[i]);
        CHECK(fit.sigmas[i] == again.sigmas[i]);
    }
}

TEST_CASE("degenerate rabi input is refused") {
    std::vector<RabiPoint> flat;
    for (int i = 0; i < 12; ++i) flat.push_back({0.1 + i * 0.3, 0.5, 0.0});
    CHECK_THROWS_AS(fit_rabi(flat, 1, 10), fit_error);

    std::vector<RabiPoint> few = {{0.1, 0.2, 0}, {0.5, 0.6, 0}, {1.0, 0.3, 0}};
    CHECK_THROWS_AS(fit_rabi(few, 1, 10), fit_error);
}

TEST_CASE("lifetime fits invert their own models exactly") {
    const FitResult g = fit_lifetime(
        lifetime_synthetic(LifetimeModel::gaussian, 0.7, 0.8),
        LifetimeModel::gaussian, 3, 50);
    CHECK(g.param("eta0") == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(g.param("t_c") == doctest::Approx(0.8).epsilon(1e-9));

    const FitResult e = fit_lifetime(
        lifetime_synthetic(LifetimeModel::exponential, 0.5, 140.0),
        LifetimeModel::exponential, 3, 50);
    CHECK(e.param("t_c") == doctest::Approx(140.0).epsilon(1e-9));

    EfficiencyTrace tiny;
    tiny.points = {{1.0, 0.5, 0}, {2.0, 0.4, 0}};
    CHECK_THROWS_AS(
        fit_lifetime(tiny, LifetimeModel::exponential, 3, 10), fit_error);
}

TEST_CASE("efficiency traces police their own shape") {
    EfficiencyTrace tr;
    tr.points = {{1.0, 0.5, 0}, {2.0, 0.4, 0}, {3.0, 0.3, 0}};
    CHECK_NOTHROW(tr.require_valid());

    tr.points[1].t_ns = 0.5; // not increasing
    CHECK_THROWS_AS(tr.require_valid(), validation_error);

    tr.points[1].t_ns = 2.0;
    tr.points[2].efficiency = 1.7; // beyond unity plus slack
    CHECK_THROWS_AS(tr.require_valid(), validation_error);
}

namespace {

SolverConfig tiny_cfg(const SpeciesData& sp, int classes, int n_z) {
    SolverConfig cfg;
    cfg.scheme = build_level_scheme(sp);
    cfg.vgrid = velocity_grid(343.15, sp.mass_kg, classes);
    cfg.k = wavevectors(780.2, +1, 1529.3, -1, 792.7, -1);
    cfg.optical_depth = 30;
    cfg.delta_single_hz = 6e9;
    cfg.gamma_s_rad_ns = 0;
    cfg.gamma_d_rad_ns = 0;
    cfg.n_z = n_z;
    cfg.dtau_ps = 2.0;
    cfg.signal_on_ge = true;
    return cfg;
}

ProtocolParams tiny_params(const SolverConfig& cfg) {
    ProtocolParams p;
    p.control_area = 2 * M_PI;
    p.r = cfg.k.ratio();
    p.t_deph_ns = dephasing_time_ns(cfg.k.k_gs(), cfg.vgrid.sigma_v);
    return p;
}

SimulationRecord quick_record() {
    const SpeciesData sp =
        parse_species_file(std::string(ORCA_DATA_DIR) + "/rb87.species");
    SolverConfig cfg = tiny_cfg(sp, 9, 8);
    return run_four_level(cfg, build_standard_orca(tiny_params(cfg), 0.9));
}

} // namespace

TEST_CASE("window energies add exactly over a partition of the span") {
    const SimulationRecord rec = quick_record();
    const double t0 = rec.tau_ns.front(), t1 = rec.tau_ns.back();
    const double mid = 0.5 * (t0 + t1) + 0.123;
    const double whole = window_energy(rec, t0, t1);
    const double split =
        window_energy(rec, t0, mid) + window_energy(rec, mid, t1);
    CHECK(whole == doctest::Approx(split).epsilon(1e-9));
    CHECK(whole == doctest::Approx(rec.total_energy_out).epsilon(1e-6));

    // empty overlap is a warned zero, bad reference a hard error
    CHECK(window_energy(rec, t1 + 5.0, t1 + 6.0) == 0.0);
    CHECK_THROWS_AS(window_efficiency(rec, t0, t1, 0.0), validation_error);
}

TEST_CASE("an empty cell transmits unit efficiency over the full span") {
    const SpeciesData sp =
        parse_species_file(std::string(ORCA_DATA_DIR) + "/rb87.species");
    SolverConfig cfg = tiny_cfg(sp, 9, 8);
    cfg.optical_depth = 0;
    const SimulationRecord rec =
        run_four_level(cfg, build_standard_orca(tiny_params(cfg), 0.9));
    const double eff = window_efficiency(rec, rec.tau_ns.front(),
                                         rec.tau_ns.back(),
                                         rec.total_energy_in);
    CHECK(eff == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mode weights are scale invariant") {
    SimulationRecord rec = quick_record();
    const std::vector<std::pair<double, double>> spans = {
        {rec.tau_ns.front(), 0.3}, {0.3, rec.tau_ns.back()}};
    const std::vector<double> w1 = mode_weights(rec, spans);
    REQUIRE(w1.size() == 2);
    CHECK(w1[0] == 1.0);

    rec.field_out *= 2.0;
    const std::vector<double> w2 = mode_weights(rec, spans);
    CHECK(w2[0] == doctest::Approx(w1[0]).epsilon(1e-12));
    CHECK(w2[1] == doctest::Approx(w1[1]).epsilon(1e-12));
}

TEST_CASE("hyperfine grid search dips at the true coupling constants") {
    const SpeciesData sp =
        parse_species_file(std::string(ORCA_DATA_DIR) + "/rb87.species");

    GridSearchSetup setup;
    setup.species = sp;
    setup.cfg = tiny_cfg(sp, 5, 4);
    setup.cfg.dtau_ps = 8.0;
    setup.cfg.tier = ModelTier::hyperfine;
    setup.target = Level::d;
    const ProtocolParams p = tiny_params(setup.cfg);
    setup.sequence_for = [p](double T) { return build_rephased(p, T); };
    setup.efficiency_of = [](const SimulationRecord& rec) {
        return std::min(1.0, rec.windows.back().energy_out * 1e6);
    };

    // reference data generated at the true (A, B) = (3.4, -4)
    EfficiencyTrace data;
    for (double T : {8.0, 12.0, 16.0}) {
        const SimulationRecord rec =
            run_hyperfine(setup.cfg, setup.sequence_for(T));
        data.points.push_back(
            {T, setup.efficiency_of(rec), 0.02});
    }

    const std::vector<double> As = {2.4, 3.4, 4.4};
    const std::vector<double> Bs = {-9.0, -4.0, 1.0};
    const ResidualGrid grid =
        hyperfine_grid_search(data, As, Bs, setup, 5, 0);

    REQUIRE(grid.residual.rows() == 3);
    REQUIRE(grid.residual.cols() == 3);
    // the generating node is a strict residual minimum
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == 1 && j == 1) continue;
            CHECK(grid.residual(1, 1) < grid.residual(i, j));
        }
    CHECK(grid.residual(1, 1) < 1e-10);
    // interpolated minimum stays within one cell of the truth
    CHECK(std::abs(grid.A_min - 3.4) <= 1.0);
    CHECK(std::abs(grid.B_min - (-4.0)) <= 5.0);
    CHECK_FALSE(grid.polarizations.empty());
}

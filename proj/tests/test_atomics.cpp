#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "orca/angular.hpp"
#include "orca/atomics.hpp"
#include "orca/constants.hpp"
#include "orca/errors.hpp"

#include <cmath>

using namespace orca;

namespace {

SpeciesData rb87() {
    return parse_species_file(std::string(ORCA_DATA_DIR) + "/rb87.species");
}

} // namespace

TEST_CASE("wigner symbols reproduce closed-form values") {
    // 3j(j j 0; m -m 0) = (-1)^(j-m) / sqrt(2j+1)
    CHECK(wigner_3j(1, 1, 0, 0, 0, 0) == doctest::Approx(-1.0 / std::sqrt(3.0)));
    CHECK(wigner_3j(1.5, 1.5, 0, 0.5, -0.5, 0) ==
          doctest::Approx(-1.0 / 2.0));
    CHECK(wigner_3j(1, 1, 2, 1, -1, 0) == doctest::Approx(1.0 / std::sqrt(30.0)));
    // m-sum violation and triangle violation both vanish
    CHECK(wigner_3j(1, 1, 1, 1, 1, 1) == 0.0);
    CHECK(wigner_3j(1, 1, 3, 0, 0, 0) == 0.0);

    CHECK(wigner_6j(1, 1, 1, 1, 1, 1) == doctest::Approx(1.0 / 6.0));
    CHECK(wigner_6j(2, 1, 1, 1, 1, 1) == doctest::Approx(1.0 / 6.0));

    CHECK(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0) ==
          doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0, 0) ==
          doctest::Approx(1.0 / std::sqrt(2.0)));

    CHECK_THROWS_AS(wigner_3j(1.2, 1, 1, 0, 0, 0), std::domain_error);
}

TEST_CASE("clebsch-gordan columns are orthonormal") {
    const double j1 = 1.5, j2 = 1.0;
    for (double J = std::abs(j1 - j2); J <= j1 + j2; ++J) {
        for (double M = -J; M <= J; ++M) {
            double norm = 0;
            for (double m1 = -j1; m1 <= j1; ++m1) {
                const double c = clebsch_gordan(j1, m1, j2, M - m1, J, M);
                norm += c * c;
            }
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("interval rule energies are trace-free and match hand values") {
    // I = 3/2, J = 7/2, A = 3.4 MHz, B = -4 MHz: F = 2..5
    const double I = 1.5, J = 3.5, A = 3.4, B = -4.0;
    double trace = 0;
    for (double F = 2; F <= 5; ++F)
        trace += (2 * F + 1) * hyperfine_energy(A, B, I, J, F);
    CHECK(trace == doctest::Approx(0.0).epsilon(1e-9));

    const double e2 = hyperfine_energy(A, B, I, J, 2);
    const double e3 = hyperfine_energy(A, B, I, J, 3);
    const double e4 = hyperfine_energy(A, B, I, J, 4);
    const double e5 = hyperfine_energy(A, B, I, J, 5);
    CHECK(e3 - e2 == doctest::Approx(13.057142857142857).epsilon(1e-12));
    CHECK(e4 - e3 == doctest::Approx(14.742857142857144).epsilon(1e-12));
    CHECK(e5 - e4 == doctest::Approx(14.142857142857142).epsilon(1e-12));

    // B term must drop out when either spin is 1/2
    CHECK(hyperfine_energy(1.0, 5.0, 0.5, 1.5, 2) ==
          doctest::Approx(hyperfine_energy(1.0, 0.0, 0.5, 1.5, 2)));
}

TEST_CASE("species file parses the published rb87 numbers") {
    const SpeciesData sp = rb87();
    CHECK(sp.name == "rb87");
    CHECK(sp.nuclear_spin == doctest::Approx(1.5));
    CHECK(sp.mass_kg == doctest::Approx(86.909180527 * atomic_mass_unit));
    CHECK(sp.levels[1].lifetime_ns == doctest::Approx(26.24));
    CHECK(sp.levels[2].lifetime_ns == doctest::Approx(84.0));
    CHECK(sp.levels[3].A_MHz == doctest::Approx(3.4));
    CHECK(sp.levels[3].B_MHz == doctest::Approx(-4.0));
    CHECK(sp.wavelength_ge_nm == doctest::Approx(780.2));
    CHECK(sp.wavelength_es_nm == doctest::Approx(1529.3));
    CHECK(sp.wavelength_sd_nm == doctest::Approx(792.7));
    CHECK(sp.ground_F == doctest::Approx(2.0));
    CHECK(sp.ground_population == "thermal");

    CHECK_THROWS_AS(parse_species_file("/nonexistent/species"), config_error);
}

TEST_CASE("level scheme enumerates the expected sublevels") {
    const LevelScheme sc = build_level_scheme(rb87());
    // ground restricted to F = 2; excited manifolds carry all F
    CHECK(sc.n_sub(Level::g) == 5);
    CHECK(sc.n_sub(Level::e) == 16); // J=3/2: F = 0..3
    CHECK(sc.n_sub(Level::s) == 24); // J=5/2: F = 1..4
    CHECK(sc.n_sub(Level::d) == 32); // J=7/2: F = 2..5

    // energies sit symmetrically about the manifold centroid
    for (Level l : {Level::e, Level::s, Level::d}) {
        double sum = 0;
        for (const auto& hf : sc.sublevels(l)) sum += hf.energy_MHz;
        CHECK(sum == doctest::Approx(0.0).epsilon(1e-9));
    }

    // gamma convention: 1 / (2 * lifetime)
    CHECK(sc.level(Level::e).gamma() == doctest::Approx(1.0 / (2 * 26.24)));
    CHECK(sc.level(Level::g).gamma() == 0.0);
}

TEST_CASE("ground populations: thermal is uniform, stretched is a delta") {
    LevelScheme sc = build_level_scheme(rb87());
    const Eigen::VectorXd& rho = sc.ground_population();
    CHECK(rho.size() == 5);
    CHECK(rho.sum() == doctest::Approx(1.0).epsilon(1e-15));
    for (int i = 0; i < rho.size(); ++i)
        CHECK(rho(i) == doctest::Approx(0.2));

    sc.set_stretched_ground();
    CHECK(sc.ground_population().sum() == doctest::Approx(1.0));
    CHECK(sc.ground_population().maxCoeff() == doctest::Approx(1.0));

    Eigen::VectorXd bad = Eigen::VectorXd::Zero(5);
    CHECK_THROWS_AS(sc.set_ground_population(bad), validation_error);
}

TEST_CASE("coupling tables are normalized to the stretched sigma+ line") {
    const LevelScheme sc = build_level_scheme(rb87());
    // stretched chain: (F=2,m=2) -> (3,3) -> (4,4) -> (5,5), all amplitude 1
    CHECK(sc.coupling(Leg::ge, 2, 2, +1, 3, 3) == doctest::Approx(1.0));
    CHECK(sc.coupling(Leg::es, 3, 3, +1, 4, 4) == doctest::Approx(1.0));
    CHECK(sc.coupling(Leg::sd, 4, 4, +1, 5, 5) == doctest::Approx(1.0));

    // selection rules: m' = m + q, |dF| <= 1
    CHECK(sc.coupling(Leg::ge, 2, 2, 0, 3, 3) == 0.0);
    CHECK(sc.coupling(Leg::ge, 2, 0, +1, 0, 0) == 0.0);

    // no entry exceeds the stretched amplitude
    for (int q = -1; q <= 1; ++q)
        for (int k = 0; k < sc.n_sub(Level::e); ++k)
            for (int i = 0; i < sc.n_sub(Level::g); ++i)
                CHECK(std::abs(sc.coupling(Leg::ge, q, k, i)) <= 1.0 + 1e-12);
}

TEST_CASE("velocity grid is a symmetric renormalized gaussian") {
    const SpeciesData sp = rb87();
    const VelocityGrid g = velocity_grid(393.15, sp.mass_kg, 33);
    CHECK(g.n() == 33);
    CHECK(g.sigma_v == doctest::Approx(193.9382199).epsilon(1e-8));
    CHECK(g.w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.v(16) == doctest::Approx(0.0)); // odd count pins v = 0
    for (int i = 0; i < g.n(); ++i) {
        CHECK(g.v(i) == doctest::Approx(-g.v(g.n() - 1 - i)));
        CHECK(g.w(i) == doctest::Approx(g.w(g.n() - 1 - i)).epsilon(1e-13));
    }
    // weights follow exp(-v^2 / 2 sigma^2) up to the common normalization
    const double ratio = g.w(16) / g.w(0);
    const double expect = std::exp(0.5 * g.v(0) * g.v(0) / (g.sigma_v * g.sigma_v));
    CHECK(ratio == doctest::Approx(expect).epsilon(1e-10));

    const VelocityGrid g70 = velocity_grid(343.15, sp.mass_kg, 65);
    CHECK(g70.sigma_v == doctest::Approx(181.1866798).epsilon(1e-8));

    CHECK_THROWS_AS(velocity_grid(393.15, sp.mass_kg, 32), validation_error);
    CHECK_THROWS_AS(velocity_grid(393.15, sp.mass_kg, 1), validation_error);
    CHECK_THROWS_AS(velocity_grid(-10.0, sp.mass_kg, 33), validation_error);
}

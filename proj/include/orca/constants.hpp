#pragma once

// Physical constants (SI) and the unit conventions used throughout:
//   time in ns, angular rates (Rabi, detunings, decay) in rad/ns,
//   velocities in m/s, wavevectors in rad/m, cell coordinate z in [0,1].
// A product k*v is rad/s and must be scaled by RAD_PER_S_TO_RAD_PER_NS
// before entering the equations of motion.

namespace orca {

constexpr double k_boltzmann = 1.380649e-23;   // J/K
constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
constexpr double speed_of_light = 2.99792458e8; // m/s
constexpr double two_pi = 6.283185307179586;

constexpr double RAD_PER_S_TO_RAD_PER_NS = 1e-9;
// energies in species files are MHz; E[MHz] * MHZ_TO_RAD_PER_NS = rad/ns
constexpr double MHZ_TO_RAD_PER_NS = two_pi * 1e-3;
constexpr double GHZ_TO_RAD_PER_NS = two_pi;

constexpr double celsius_to_kelvin(double t_c) { return t_c + 273.15; }

} // namespace orca

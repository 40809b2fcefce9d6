#pragma once

// Classical drive pulses and beam geometry. Envelopes are Gaussian in Rabi
// amplitude; chirp is a linear sweep entering as exp(i*pi*rate*(tau-t0)^2).
// Wavevectors are signed by propagation direction along the cell axis; the
// stored-coherence wavevectors are the signed sums of the absorbed fields,
// so counter-propagating two-photon excitation gives |k_gs| = ||k_c|-|k_s||.

#include "orca/constants.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>

namespace orca {

enum class Channel { signal = 0, control = 1, transfer = 2 };

std::string channel_name(Channel c);
Channel parse_channel(const std::string& name);

struct Polarization {
    Eigen::Vector3cd q{0.0, 0.0, 1.0}; // spherical components (q = -1, 0, +1)
    std::string label = "sigma+";

    static Polarization sigma_plus();
    static Polarization sigma_minus();
    static Polarization pi();
    static Polarization horizontal(); // x = (e- - e+)/sqrt2
    static Polarization vertical();   // y = i(e- + e+)/sqrt2
    static Polarization parse(const std::string& name);
};

struct PulseEnvelope {
    Channel channel = Channel::control;
    double center_ns = 0;
    double fwhm_ps = 330;
    double peak_rabi = 0;          // rad/ns
    double detuning_hz = 0;        // carrier offset from the channel default
    double chirp_mhz_per_ns = 0;   // linear sweep rate
    double phase_rad = 0;          // static carrier phase
    Polarization pol;

    double fwhm_ns() const { return fwhm_ps * 1e-3; }
};

// time-integrated Rabi area of the Gaussian envelope (chirp does not enter)
double pulse_area(const PulseEnvelope& p);

// peak Rabi giving the requested area at the given width; exact inverse of
// pulse_area
double area_to_peak(double area_rad, double fwhm_ps);

// scalar complex Rabi amplitude at co-moving time tau (polarization excluded)
std::complex<double> rabi_at(const PulseEnvelope& p, double tau_ns);

// half-width outside which the envelope is below `floor` times its peak
double envelope_support_ns(const PulseEnvelope& p, double floor = 1e-6);

// integral of |envelope|^2 over all time, in Rabi-squared units; phase terms
// drop out, so this is the natural normalization for window efficiencies
double envelope_energy(const PulseEnvelope& p);

// calibration between pulse energy and area: area scales with sqrt(energy)
double area_from_energy(double energy_nj, double nj_per_pi);
double energy_from_area(double area_rad, double nj_per_pi);

struct WavevectorSet {
    double k_signal = 0;   // signed, rad/m
    double k_control = 0;
    double k_transfer = 0;

    double k_gs() const { return k_signal + k_control; }
    double k_gd() const { return k_signal + k_control + k_transfer; }
    // |k_gd| / |k_gs|; the shelved-interval scale of the rephasing protocol
    double ratio() const;
    // rephasing requires the shelved coherence to unwind the stored phase
    bool rephasing_geometry() const { return k_gs() * k_gd() < 0; }
};

// directions are +-1 along the cell axis
WavevectorSet wavevectors(double lambda_signal_nm, int dir_signal,
                          double lambda_control_nm, int dir_control,
                          double lambda_transfer_nm, int dir_transfer);

} // namespace orca

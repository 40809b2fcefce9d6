#include "orca/fields.hpp"

#include "orca/errors.hpp"

#include <cmath>

namespace orca {

namespace {

// integral of exp(-4 ln2 (t/w)^2) over t is w * sqrt(pi / (4 ln 2))
const double kGaussAreaFactor = std::sqrt(M_PI / (4.0 * M_LN2));

} // namespace

std::string channel_name(Channel c) {
    switch (c) {
    case Channel::signal: return "signal";
    case Channel::control: return "control";
    case Channel::transfer: return "transfer";
    }
    return "?";
}

Channel parse_channel(const std::string& name) {
    if (name == "signal") return Channel::signal;
    if (name == "control") return Channel::control;
    if (name == "transfer") return Channel::transfer;
    throw config_error("unknown channel '" + name + "'");
}

Polarization Polarization::sigma_plus() {
    Polarization p;
    p.q = Eigen::Vector3cd(0.0, 0.0, 1.0);
    p.label = "sigma+";
    return p;
}

Polarization Polarization::sigma_minus() {
    Polarization p;
    p.q = Eigen::Vector3cd(1.0, 0.0, 0.0);
    p.label = "sigma-";
    return p;
}

Polarization Polarization::pi() {
    Polarization p;
    p.q = Eigen::Vector3cd(0.0, 1.0, 0.0);
    p.label = "pi";
    return p;
}

Polarization Polarization::horizontal() {
    Polarization p;
    const double s = 1.0 / std::sqrt(2.0);
    p.q = Eigen::Vector3cd(s, 0.0, -s);
    p.label = "H";
    return p;
}

Polarization Polarization::vertical() {
    Polarization p;
    const std::complex<double> is(0.0, 1.0 / std::sqrt(2.0));
    p.q = Eigen::Vector3cd(is, 0.0, is);
    p.label = "V";
    return p;
}

Polarization Polarization::parse(const std::string& name) {
    if (name == "sigma+" || name == "sigma_plus") return sigma_plus();
    if (name == "sigma-" || name == "sigma_minus") return sigma_minus();
    if (name == "pi") return pi();
    if (name == "H" || name == "horizontal") return horizontal();
    if (name == "V" || name == "vertical") return vertical();
    throw config_error("unknown polarization '" + name + "'");
}

double pulse_area(const PulseEnvelope& p) {
    return std::abs(p.peak_rabi) * p.fwhm_ns() * kGaussAreaFactor;
}

double area_to_peak(double area_rad, double fwhm_ps) {
    if (fwhm_ps <= 0)
        throw validation_error("pulse width must be positive");
    return area_rad / (fwhm_ps * 1e-3 * kGaussAreaFactor);
}

std::complex<double> rabi_at(const PulseEnvelope& p, double tau_ns) {
    const double t = tau_ns - p.center_ns;
    const double w = p.fwhm_ns();
    const double env = p.peak_rabi * std::exp(-4.0 * M_LN2 * (t / w) * (t / w));
    // linear phase from the carrier offset, quadratic from the chirp
    // (instantaneous offset ramps at chirp_mhz_per_ns)
    double phase = p.phase_rad;
    if (p.detuning_hz != 0.0)
        phase -= two_pi * p.detuning_hz * 1e-9 * t;
    if (p.chirp_mhz_per_ns != 0.0)
        phase += M_PI * p.chirp_mhz_per_ns * 1e-3 * t * t;
    if (phase == 0.0)
        return {env, 0.0};
    return env * std::exp(std::complex<double>(0.0, phase));
}

double envelope_support_ns(const PulseEnvelope& p, double floor) {
    // exp(-4 ln2 (t/w)^2) = floor  =>  t = w sqrt(-ln floor / (4 ln 2))
    return p.fwhm_ns() * std::sqrt(-std::log(floor) / (4.0 * M_LN2));
}

double envelope_energy(const PulseEnvelope& p) {
    // int exp(-8 ln2 (t/w)^2) dt = w sqrt(pi / (8 ln 2))
    const double w = p.fwhm_ns();
    return p.peak_rabi * p.peak_rabi * w * std::sqrt(M_PI / (8.0 * M_LN2));
}

double area_from_energy(double energy_nj, double nj_per_pi) {
    if (nj_per_pi <= 0)
        throw validation_error("pi-pulse energy must be positive");
    if (energy_nj < 0)
        throw validation_error("pulse energy must be non-negative");
    return M_PI * std::sqrt(energy_nj / nj_per_pi);
}

double energy_from_area(double area_rad, double nj_per_pi) {
    if (nj_per_pi <= 0)
        throw validation_error("pi-pulse energy must be positive");
    const double x = area_rad / M_PI;
    return nj_per_pi * x * x;
}

double WavevectorSet::ratio() const {
    const double gs = std::abs(k_gs());
    if (gs == 0.0)
        throw validation_error("two-photon wavevector vanishes; shelving ratio undefined");
    return std::abs(k_gd()) / gs;
}

WavevectorSet wavevectors(double lambda_signal_nm, int dir_signal,
                          double lambda_control_nm, int dir_control,
                          double lambda_transfer_nm, int dir_transfer) {
    auto one = [](double lambda_nm, int dir) {
        if (lambda_nm <= 0)
            throw validation_error("wavelength must be positive");
        if (dir != 1 && dir != -1)
            throw validation_error("beam direction must be +1 or -1");
        return dir * two_pi / (lambda_nm * 1e-9);
    };
    WavevectorSet k;
    k.k_signal = one(lambda_signal_nm, dir_signal);
    k.k_control = one(lambda_control_nm, dir_control);
    k.k_transfer = one(lambda_transfer_nm, dir_transfer);
    return k;
}

} // namespace orca

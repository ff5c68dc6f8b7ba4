#pragma once

#include <cmath>

namespace qdent {

// All times are in ps and all energies in ueV throughout the toolkit.
// hbar in ueV*ps (CODATA).
inline constexpr double kHbarUevPs = 658.2119569;

// E[eV] = 1239.841984 / lambda[nm]
inline constexpr double kEvNm = 1239.841984;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Photon energy in ueV from vacuum wavelength in nm.
inline double energy_uev_from_wavelength_nm(double lambda_nm) {
    return kEvNm / lambda_nm * 1e6;
}

inline double wavelength_nm_from_energy_uev(double e_uev) {
    return kEvNm / (e_uev * 1e-6);
}

// Gaussian FWHM <-> standard deviation.
inline double sigma_from_fwhm(double fwhm) {
    return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

}  // namespace qdent

#ifndef SIVSTARK_UNITS_HPP
#define SIVSTARK_UNITS_HPP

// Unit conventions used throughout the toolkit.
//
//   frequency       GHz   (line centers, detunings, splittings)
//   linewidth       MHz
//   polarizability  MHz/(MV/m)^2
//   electric field  MV/m  (numerically equal to V/um)
//   length          um, except emitter depth in nm
//   voltage         V
//
// All conversions go through the constants below.

namespace sivstark::units {

inline constexpr double mhz_per_ghz = 1000.0;
inline constexpr double ghz_per_mhz = 1.0 / mhz_per_ghz;
inline constexpr double ghz_per_thz = 1000.0;
inline constexpr double nm_per_um = 1000.0;
inline constexpr double um_per_nm = 1.0 / nm_per_um;

// V/um -> MV/m
inline constexpr double mvpm_per_v_per_um = 1.0;

// FWHM of a normal distribution in units of its standard deviation, 2*sqrt(2 ln 2).
inline constexpr double fwhm_per_sigma = 2.3548200450309493;

constexpr double mhz_to_ghz(double mhz) { return mhz * ghz_per_mhz; }
constexpr double ghz_to_mhz(double ghz) { return ghz * mhz_per_ghz; }
constexpr double nm_to_um(double nm) { return nm * um_per_nm; }
constexpr double um_to_nm(double um) { return um * nm_per_um; }

}  // namespace sivstark::units

#endif  // SIVSTARK_UNITS_HPP

// constants.hpp — Physical constants (CODATA 2018) and engine unit conversions
//
// Engine units, used by every module:
//   energy   : angular frequency, rad/us (energy divided by hbar)
//   time     : us
//   distance : Angstrom
//   field    : Tesla
// Gyromagnetic tensors are stored in rad/(us*T) so that B.gamma.S is an
// energy in engine units.

#pragma once

namespace qcce::units {

// --------------------------- SI base constants ------------------------------

inline constexpr double hbar_J_s = 1.054571817e-34;           // reduced Planck
inline constexpr double elementary_charge_C = 1.602176634e-19; // exact
inline constexpr double mu0_over_4pi_SI = 1e-7;               // T^2 m^3 / J
inline constexpr double bohr_magneton_J_T = 9.2740100783e-24;
inline constexpr double nuclear_magneton_J_T = 5.0507837461e-27;
inline constexpr double gamma_proton_rad_s_T = 2.6752218744e8;

// --------------------------- engine conversions -----------------------------

// 1 meV and 1 ueV expressed in rad/us.
inline constexpr double meV = 1e-3 * elementary_charge_C / hbar_J_s * 1e-6;
inline constexpr double ueV = 1e-3 * meV;

// Gyromagnetic scale of one Bohr / nuclear magneton, in rad/(us*T).
inline constexpr double bohr_magneton = bohr_magneton_J_T / hbar_J_s * 1e-6;
inline constexpr double nuclear_magneton = nuclear_magneton_J_T / hbar_J_s * 1e-6;

// Proton gyromagnetic ratio in rad/(us*T).
inline constexpr double gamma_proton = gamma_proton_rad_s_T * 1e-6;

// Point-dipole prefactor: with gyromagnetic tensors g1, g2 in rad/(us*T) and
// the separation R in Angstrom, the interaction tensor in rad/us is
//   dipole_prefactor / |R|^3 * (g1.g2 - 3 (g1.R)(g2.R)^T / |R|^2).
inline constexpr double dipole_prefactor = mu0_over_4pi_SI * hbar_J_s * 1e36;

} // namespace qcce::units

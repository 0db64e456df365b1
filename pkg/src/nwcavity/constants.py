"""Physical constants (SI, CODATA 2018)."""

import math

C0 = 299_792_458.0
MU0 = 1.25663706212e-6
EPS0 = 1.0 / (MU0 * C0 * C0)
ETA0 = MU0 * C0
HBAR = 1.054571817e-34
QE = 1.602176634e-19

#: photon energy [eV] times wavelength [nm]
EV_NM = 2.0 * math.pi * HBAR * C0 / QE * 1e9

NM = 1e-9


def omega_from_nm(wavelength_nm):
    """Angular frequency [rad/s] of a vacuum wavelength given in nm."""
    return 2.0 * math.pi * C0 / (wavelength_nm * NM)

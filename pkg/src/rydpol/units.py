"""Unit conversions used at I/O boundaries. Everything internal is SI."""

import numpy as np
from scipy import constants

TWO_PI = 2.0 * np.pi
AMU = constants.atomic_mass
E_CHARGE = constants.e

#: polarizabilities are exchanged in units of 1e-30 C m^2 / V
POL_UNIT = 1e-30

#: mass of 40Ca+ (neutral 40Ca atomic mass minus one electron)
MASS_CA40 = 39.962590866 * AMU - constants.m_e


def mhz_to_angular(f_mhz):
    return TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float)


def angular_to_mhz(omega):
    return np.asarray(omega, dtype=float) / (TWO_PI * 1e6)


def us_to_s(t_us):
    return np.asarray(t_us, dtype=float) * 1e-6


def s_to_us(t_s):
    return np.asarray(t_s, dtype=float) * 1e6

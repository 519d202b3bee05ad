"""Reference implementations written independently of the package.

Plain ``math`` with CODATA 2022 constants typed in by hand; nothing here
imports rydpol.
"""

import math

E = 1.602176634e-19
AMU = 1.66053906892e-27
M_E = 9.1093837139e-31
M_CA40 = 39.962590866 * AMU - M_E


def secular_scalar(g_rf, g_dc, w_rf, eps, pol, m=M_CA40, e=E):
    """Modified secular angular frequencies (x, y, z), one scalar radicand at a time."""
    out = []
    for k in (1.0 + eps, 1.0 - eps):
        r = (2.0 * e * e * g_rf * g_rf / (m * m * w_rf * w_rf)
             - 2.0 * e * g_dc * k / m
             - 2.0 * pol * (g_rf * g_rf + g_dc * g_dc * k * k) / m)
        out.append(math.sqrt(r))
    rz = 4.0 * e * g_dc / m - 16.0 * pol * g_dc * g_dc / m
    out.append(math.sqrt(rz))
    return tuple(out)


def calibrate_scalar(wx, wy, wz, w_rf, m=M_CA40, e=E):
    g_dc = m * wz * wz / (4.0 * e)
    eps = (wy * wy - wx * wx) / (wz * wz)
    g_rf = math.sqrt((wx * wx + wy * wy + wz * wz) * m * m * w_rf * w_rf / (4.0 * e * e))
    return g_rf, g_dc, eps


def brute_mean(pmf, n_max):
    """Mean of a phonon law by direct summation of ``pmf(n)`` for n <= n_max."""
    num = den = 0.0
    for n in range(n_max + 1):
        p = pmf(n)
        num += n * p
        den += p
    return num / den


def poisson_pmf(mu, n):
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1)) if mu > 0 else float(n == 0)


def geometric_pmf(nbar, n):
    return (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)


def displacement_matrix(eta, dim):
    """``exp(i eta (a + a^dagger))`` in a truncated Fock basis of size ``dim``."""
    import numpy as np
    from scipy.linalg import expm

    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    return expm(1j * eta * (a + a.T))

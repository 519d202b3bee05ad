"""Phonon-number distributions of a single motional mode.

Supported states are thermal (geometric law), coherent (Poisson law in
``|alpha|^2``), Fock and explicit probability tables. The phase of a
coherent amplitude never enters, so coherent states are labelled by
``|alpha| >= 0``.

The thermal law ``P_n = nbar^n / (nbar + 1)^(n + 1)`` is the textbook
Bose-Einstein occupation of a harmonic mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

DEFAULT_TAIL_MASS = 1e-6

KINDS = ("thermal", "coherent", "fock", "explicit")


def coherent_pmf(alpha, n):
    """Poisson weight of ``n`` phonons in a coherent state of size ``|alpha|``.

    Evaluated in log space, so large ``n`` (hundreds) does not overflow.
    """
    alpha = abs(float(alpha))
    n = np.asarray(n)
    if alpha == 0.0:
        return np.where(n == 0, 1.0, 0.0)
    # 2 log|alpha| rather than log(alpha^2), which underflows for tiny alpha
    logp = n * 2.0 * math.log(alpha) - alpha * alpha - special.gammaln(n + 1.0)
    return np.exp(logp)


def thermal_pmf(nbar, n):
    """Geometric occupation of a thermal mode with mean ``nbar``."""
    nbar = float(nbar)
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    n = np.asarray(n)
    if nbar == 0.0:
        return np.where(n == 0, 1.0, 0.0)
    logp = n * math.log(nbar / (nbar + 1.0)) - math.log1p(nbar)
    return np.exp(logp)


@dataclass(frozen=True)
class PhononDistribution:
    """Probability law over the phonon number of one mode.

    Use the ``thermal``, ``coherent``, ``fock`` and ``explicit`` constructors
    rather than the raw initializer.
    """

    kind: str
    value: float = 0.0
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind in ("thermal", "coherent") and not self.value >= 0:
            raise ValueError(f"{self.kind} parameter must be >= 0")
        if self.kind == "fock" and (self.value < 0 or int(self.value) != self.value):
            raise ValueError("Fock index must be a non-negative integer")
        if self.kind == "explicit":
            if not self.table:
                raise ValueError("explicit distribution needs at least one entry")
            ns = [n for n, _ in self.table]
            ps = np.array([p for _, p in self.table], dtype=float)
            if len(set(ns)) != len(ns) or min(ns) < 0:
                raise ValueError("explicit phonon indices must be unique and >= 0")
            if np.any(ps < 0) or np.any(ps > 1):
                raise ValueError("explicit probabilities must lie in [0, 1]")
            if abs(ps.sum() - 1.0) > 1e-6:
                raise ValueError(f"explicit probabilities sum to {ps.sum()}, not 1")

    @classmethod
    def thermal(cls, nbar):
        return cls("thermal", float(nbar))

    @classmethod
    def coherent(cls, alpha):
        return cls("coherent", abs(float(alpha)))

    @classmethod
    def fock(cls, n):
        return cls("fock", int(n))

    @classmethod
    def explicit(cls, entries):
        """``entries`` is a mapping or iterable of ``(n, p)`` pairs."""
        if isinstance(entries, dict):
            entries = entries.items()
        table = tuple(sorted((int(n), float(p)) for n, p in entries))
        return cls("explicit", 0.0, table)

    def pmf(self, n):
        n = np.asarray(n)
        if self.kind == "thermal":
            return thermal_pmf(self.value, n)
        if self.kind == "coherent":
            return coherent_pmf(self.value, n)
        if self.kind == "fock":
            return np.where(n == int(self.value), 1.0, 0.0)
        lookup = dict(self.table)
        return np.vectorize(lambda k: lookup.get(int(k), 0.0), otypes=[float])(n)

    def truncation_bound(self, tail_mass=DEFAULT_TAIL_MASS):
        return truncation_bound(self, tail_mass)

    def support(self, tail_mass=DEFAULT_TAIL_MASS):
        """Phonon indices ``0..N`` and their weights, with ``N`` from truncation_bound."""
        n, p = _support(self, tail_mass)
        return n.copy(), p.copy()

    def moments(self):
        return moments(self)

    @property
    def mean(self):
        return moments(self)[0]

    def to_config(self):
        if self.kind == "explicit":
            return {"explicit": [[n, p] for n, p in self.table]}
        if self.kind == "fock":
            return {"fock": int(self.value)}
        return {self.kind: self.value}

    @classmethod
    def from_config(cls, cfg):
        """Inverse of :meth:`to_config`; also accepts ``{"explicit": {n: p}}``."""
        if isinstance(cfg, PhononDistribution):
            return cfg
        if not isinstance(cfg, dict) or len(cfg) != 1:
            raise ValueError(f"distribution config must have exactly one key: {cfg!r}")
        (kind, val), = cfg.items()
        if kind == "explicit":
            if isinstance(val, dict):
                val = [(int(k), v) for k, v in val.items()]
            return cls.explicit(val)
        if kind not in KINDS:
            raise ValueError(f"unknown distribution kind {kind!r}")
        return getattr(cls, kind)(val)


@lru_cache(maxsize=4096)
def _support(dist, tail_mass):
    n = np.arange(truncation_bound(dist, tail_mass) + 1)
    return n, dist.pmf(n)


def truncation_bound(dist: PhononDistribution, tail_mass=DEFAULT_TAIL_MASS) -> int:
    """Smallest ``N`` such that the mass above ``N`` is at most ``tail_mass``."""
    if not 0 < tail_mass < 1:
        raise ValueError("tail_mass must lie in (0, 1)")
    if dist.kind == "fock":
        return int(dist.value)
    if dist.kind == "explicit":
        ns = np.array([n for n, _ in dist.table])
        ps = np.array([p for _, p in dist.table])
        # mass strictly above each candidate N
        above = ps.sum() - np.cumsum(ps)
        return int(ns[np.argmax(above <= tail_mass)])
    if dist.value == 0.0:
        return 0
    if dist.kind == "thermal":
        # P(n > N) = r^(N + 1)
        r = dist.value / (dist.value + 1.0)
        n = max(int(math.ceil(math.log(tail_mass) / math.log(r))) - 1, 0)
        while n > 0 and r ** n <= tail_mass:
            n -= 1
        while r ** (n + 1) > tail_mass:
            n += 1
        return n
    mu = dist.value**2
    # Gaussian-tail starting point, then exact stepping with the Poisson survival function
    n = max(int(mu + -special.ndtri(tail_mass) * math.sqrt(mu)), 0)
    while n > 0 and special.pdtrc(n - 1, mu) <= tail_mass:
        n -= 1
    while special.pdtrc(n, mu) > tail_mass:
        n += 1
    return n


def moments(dist: PhononDistribution):
    """Mean and variance of the untruncated law."""
    if dist.kind == "thermal":
        nbar = dist.value
        return nbar, nbar * nbar + nbar
    if dist.kind == "coherent":
        mu = dist.value**2
        return mu, mu
    if dist.kind == "fock":
        return float(dist.value), 0.0
    ns = np.array([n for n, _ in dist.table], dtype=float)
    ps = np.array([p for _, p in dist.table])
    mean = float(ps @ ns)
    return mean, float(ps @ (ns - mean) ** 2)

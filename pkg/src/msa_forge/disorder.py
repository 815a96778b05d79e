"""IID random potentials generated per site from a keyed counter-based generator.

The value at site ``x`` depends only on ``(seed, x)``: each site gets its own
Philox4x64 stream whose key is the seed and whose counter encodes the site
coordinates.  Overlapping regions therefore agree on their intersection, and
disjoint regions are independent by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .errors import CoverageError, DomainError

__all__ = [
    "Uniform",
    "PiecewiseLinearCDF",
    "MarginalDistribution",
    "DisorderSample",
    "distribution_from_json",
    "sample",
    "site_uniforms",
    "cdf_increment",
    "DEFAULT_DISTRIBUTION",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Uniform:
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise DomainError(f"uniform({self.a}, {self.b}) needs b > a")

    @property
    def holder_exponent(self) -> float:
        return 1.0

    @property
    def holder_constant(self) -> float:
        return 1.0 / (self.b - self.a)

    @property
    def support(self) -> tuple[float, float]:
        return self.a, self.b

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def to_json(self) -> dict:
        return {"kind": "uniform", "a": float(self.a), "b": float(self.b)}


@dataclass(frozen=True)
class PiecewiseLinearCDF:
    """CDF interpolated linearly through ``(knots[i], levels[i])``.

    ``levels`` must start at 0, end at 1 and be non-decreasing; ``knots`` must
    be strictly increasing.  Such a CDF is Lipschitz, so it satisfies the
    Hölder condition with exponent 1 and constant equal to the steepest slope.
    """

    knots: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=float)
        p = np.asarray(self.levels, dtype=float)
        if x.ndim != 1 or x.shape != p.shape or len(x) < 2:
            raise DomainError("knots and levels must be 1-d of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise DomainError("knots must be strictly increasing")
        if np.any(np.diff(p) < 0) or p[0] != 0.0 or p[-1] != 1.0:
            raise DomainError("levels must rise monotonically from 0 to 1")
        object.__setattr__(self, "knots", tuple(float(v) for v in x))
        object.__setattr__(self, "levels", tuple(float(v) for v in p))

    @property
    def holder_exponent(self) -> float:
        return 1.0

    @property
    def holder_constant(self) -> float:
        return float(np.max(np.diff(self.levels) / np.diff(self.knots)))

    @property
    def support(self) -> tuple[float, float]:
        return self.knots[0], self.knots[-1]

    def cdf(self, t):
        return np.interp(np.asarray(t, dtype=float), self.knots, self.levels, left=0.0, right=1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        x = np.asarray(self.knots)
        p = np.asarray(self.levels)
        # searching from the left never lands on a flat (massless) piece
        i = np.clip(np.searchsorted(p, u, side="left") - 1, 0, len(p) - 2)
        dp = p[i + 1] - p[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(dp > 0, (u - p[i]) / dp, 1.0)
        return x[i] + t * (x[i + 1] - x[i])

    def to_json(self) -> dict:
        return {"kind": "piecewise_linear", "knots": list(self.knots), "levels": list(self.levels)}


MarginalDistribution = Union[Uniform, PiecewiseLinearCDF]

DEFAULT_DISTRIBUTION = Uniform(-1.0, 1.0)


def distribution_from_json(spec: Mapping) -> MarginalDistribution:
    kind = spec.get("kind")
    extra = set(spec) - {"kind", "a", "b", "knots", "levels"}
    if extra:
        raise DomainError(f"unknown distribution field(s): {sorted(extra)}")
    if kind == "uniform":
        return Uniform(float(spec.get("a", -1.0)), float(spec.get("b", 1.0)))
    if kind == "piecewise_linear":
        return PiecewiseLinearCDF(tuple(spec["knots"]), tuple(spec["levels"]))
    raise DomainError(f"unknown distribution kind {kind!r}")


def _zigzag(v: int) -> int:
    return (v << 1) & _MASK64 if v >= 0 else ((-v << 1) - 1) & _MASK64


def site_uniforms(seed: int, sites) -> np.ndarray:
    """Uniform(0,1) variate per site, keyed on ``(seed, site)``.

    Sites of dimension up to 3 are supported (the fourth counter word holds
    the dimension so that e.g. ``(0,)`` and ``(0, 0)`` do not collide).
    """
    pts = np.asarray(sites, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, d = pts.shape
    if d > 3:
        raise DomainError("site keying supports single-particle dimension d <= 3")
    key = np.array([int(seed) & _MASK64, 0x4D5341], dtype=np.uint64)
    out = np.empty(n)
    for i in range(n):
        counter = [0, 0, 0, d]
        for k in range(d):
            counter[k] = _zigzag(int(pts[i, k]))
        raw = np.random.Philox(counter=np.array(counter, dtype=np.uint64), key=key).random_raw()
        out[i] = (int(raw) >> 11) * (1.0 / 9007199254740992.0)
    return out


@dataclass(frozen=True)
class DisorderSample:
    """Potential values ``V(x)`` on a finite set of single-particle sites."""

    seed: Optional[int]
    sites: np.ndarray
    values: np.ndarray
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64)
        if sites.ndim == 1:
            sites = sites[:, None]
        values = np.asarray(self.values, dtype=float)
        if len(sites) != len(values):
            raise DomainError("sites and values differ in length")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "_lookup", {tuple(int(c) for c in s): float(v) for s, v in zip(sites, values)}
        )

    @classmethod
    def constant(cls, sites, value: float = 0.0) -> "DisorderSample":
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim == 1:
            sites = sites[:, None]
        return cls(None, sites, np.full(len(sites), float(value)))

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    def __len__(self):
        return len(self.values)

    def __getitem__(self, site) -> float:
        key = tuple(int(c) for c in np.atleast_1d(site))
        try:
            return self._lookup[key]
        except KeyError:
            raise CoverageError(f"no potential value at site {key}") from None

    def values_at(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        return np.array([self[p] for p in pts], dtype=float)

    def as_dict(self) -> dict:
        return dict(self._lookup)


def sample(distribution: MarginalDistribution, seed: int, region) -> DisorderSample:
    """Draw ``V(x)`` for every site in ``region`` (an ``(n, d)`` array of sites)."""
    pts = np.asarray(region, dtype=np.int64)
    if pts.size == 0:
        return DisorderSample(seed, np.empty((0, pts.shape[1] if pts.ndim == 2 else 1), np.int64),
                              np.empty(0))
    if pts.ndim == 1:
        pts = pts[:, None]
    return DisorderSample(int(seed), pts, distribution.ppf(site_uniforms(seed, pts)))


def cdf_increment(distribution: MarginalDistribution, t: float, eps: float) -> float:
    """``F(t + eps) - F(t)``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    return float(distribution.cdf(t + eps) - distribution.cdf(t))

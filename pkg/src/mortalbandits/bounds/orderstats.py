"""Distribution of the maximum of independent, non-identical mean estimates.

The density of ``max_i Y_i`` at ``x`` is ``perm(V) / (m - 1)!`` where ``V`` has
``m - 1`` rows of CDF values ``F_i(x)`` and one row of densities ``f_i(x)``;
expanding the permanent gives ``sum_j f_j(x) prod_{i != j} F_i(x)``.

For discrete estimates the same construction would double-count ties, so the
CDF row is replaced by ``F_i(x-) + theta * f_i(x)`` and averaged over
``theta ~ U(0, 1)``. The average is a polynomial of degree ``m - 1`` in theta
and Gauss-Legendre nodes make it exact, recovering
``P(max = x) = prod F_i(x) - prod F_i(x-)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

from ..core import Bernoulli, RewardRange
from ..errors import QuadratureError
from .permanent import MAX_PERMANENT_SIZE, permanent

QUAD_ABS_TOL = 1e-8
QUAD_MAX_SUBDIVISIONS = 10_000
EXACT_PULL_LIMIT = 20


@dataclass(frozen=True)
class DiscreteMeanDist:
    atoms: np.ndarray
    pmf: np.ndarray

    discrete = True

    def mass(self, x: float) -> float:
        i = np.searchsorted(self.atoms, x)
        if i < len(self.atoms) and self.atoms[i] == x:
            return float(self.pmf[i])
        return 0.0

    def cdf(self, x: float) -> float:
        i = np.searchsorted(self.atoms, x, side="right")
        return float(self.pmf[:i].sum())

    def cdf_left(self, x: float) -> float:
        i = np.searchsorted(self.atoms, x, side="left")
        return float(self.pmf[:i].sum())

    def mean(self) -> float:
        return float(self.atoms @ self.pmf)


@dataclass(frozen=True)
class NormalMeanDist:
    loc: float
    scale: float

    discrete = False

    def pdf(self, x: float) -> float:
        z = (x - self.loc) / self.scale
        return math.exp(-0.5 * z * z) / (self.scale * math.sqrt(2 * math.pi))

    def cdf(self, x: float) -> float:
        return float(special.ndtr((x - self.loc) / self.scale))

    def mean(self) -> float:
        return self.loc


def bernoulli_mean_dist(success_prob: float, pulls: int, rr: RewardRange = RewardRange()) -> DiscreteMeanDist:
    """Exact law of the mean of ``pulls`` two-point rewards on ``{a, b}``."""
    k = np.arange(pulls + 1)
    # a + r*(k/n) keeps equal fractions bit-identical across different n
    atoms = rr.a + rr.r * (k / pulls)
    pmf = stats.binom.pmf(k, pulls, success_prob)
    keep = pmf > 0
    if not keep.any():
        keep[:] = True
    return DiscreteMeanDist(atoms[keep], pmf[keep])


def estimate_dist(dist, pulls: int, rr: RewardRange, exact_limit: int = EXACT_PULL_LIMIT):
    """Law of an arm's mean estimate after ``pulls`` pulls and whether it is a CLT approximation."""
    if pulls < 1:
        raise ValueError("an estimate needs at least one pull")
    if isinstance(dist, Bernoulli) and pulls <= exact_limit:
        return bernoulli_mean_dist(dist.success_prob(rr), pulls, rr), False
    sd = math.sqrt(max(dist.variance(rr), 0.0) / pulls)
    return NormalMeanDist(dist.mean(rr), max(sd, 1e-12)), True


def normal_dist_for(dist, pulls: int, rr: RewardRange) -> NormalMeanDist:
    sd = math.sqrt(max(dist.variance(rr), 0.0) / pulls)
    return NormalMeanDist(dist.mean(rr), max(sd, 1e-12))


def _vaughan(F: Sequence[float], f: Sequence[float], method: str) -> float:
    m = len(f)
    if m == 1:
        return float(f[0])
    if method == "permanent" and m <= MAX_PERMANENT_SIZE:
        V = np.empty((m, m))
        V[:-1, :] = F
        V[-1, :] = f
        return permanent(V) / math.factorial(m - 1)
    if method not in ("closed", "permanent"):
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    for j in range(m):
        prod = f[j]
        for i in range(m):
            if i != j:
                prod *= F[i]
        total += prod
    return total


def _theta_rule(m: int):
    nodes, weights = np.polynomial.legendre.leggauss(m // 2 + 1)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def max_pdf(dists: Sequence, x: float, method: str = "permanent") -> float:
    """Density (continuous) or mass (discrete) of ``max_i Y_i`` at ``x``."""
    m = len(dists)
    if m == 0:
        raise ValueError("max of an empty set of estimates")
    kinds = {d.discrete for d in dists}
    if len(kinds) > 1:
        raise ValueError("mixing discrete and continuous estimates is not supported")
    if kinds == {False}:
        F = [d.cdf(x) for d in dists]
        f = [d.pdf(x) for d in dists]
        return _vaughan(F, f, method)
    f = np.array([d.mass(x) for d in dists])
    if not f.any():
        return 0.0
    G = np.array([d.cdf_left(x) for d in dists])
    thetas, weights = _theta_rule(m)
    return float(sum(w * _vaughan(G + th * f, f, method) for th, w in zip(thetas, weights)))


def max_mass_exact(dists: Sequence[DiscreteMeanDist], x: float) -> float:
    """``prod F_i(x) - prod F_i(x-)``: the tie-aware mass, computed directly."""
    return math.prod(d.cdf(x) for d in dists) - math.prod(d.cdf_left(x) for d in dists)


def max_support(dists: Sequence[DiscreteMeanDist]) -> np.ndarray:
    return np.unique(np.concatenate([d.atoms for d in dists]))


def expect_over_max(dists: Sequence, fn: Callable[[float], float], rr: RewardRange,
                    method: str = "permanent", tol: float = QUAD_ABS_TOL) -> float:
    """``E[fn(max_i Y_i)]`` with the maximum clipped to ``[a, b]``.

    Discrete laws give an exact finite sum over the atoms; continuous laws use
    adaptive Gauss-Kronrod quadrature plus the point masses the clipping puts
    on the endpoints.
    """
    if all(d.discrete for d in dists):
        xs = max_support(dists)
        return math.fsum(fn(min(max(x, rr.a), rr.b)) * max_pdf(dists, x, method) for x in xs)
    a, b = rr.a, rr.b
    below = math.prod(d.cdf(a) for d in dists)
    above = 1.0 - math.prod(d.cdf(b) for d in dists)
    pts = sorted({d.loc for d in dists if a < d.loc < b})
    val, err, info = _quad(lambda x: fn(x) * max_pdf(dists, x, method), a, b, pts, tol)
    return fn(a) * below + fn(b) * above + val


def _quad(g, a, b, pts, tol):
    out = integrate.quad(g, a, b, epsabs=tol, epsrel=0.0, limit=QUAD_MAX_SUBDIVISIONS,
                         points=pts or None, full_output=1)
    val, err, info = out[0], out[1], out[2]
    if len(out) > 3 and err > tol:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: estimate {val}, "
            f"abserr {err} > {tol}, {info.get('last')} subintervals ({out[3][:80]})"
        )
    return val, err, info


def total_mass(dists: Sequence, rr: RewardRange | None = None, method: str = "permanent") -> float:
    """Integral (or sum) of the max density; 1 for proper inputs."""
    if all(d.discrete for d in dists):
        return math.fsum(max_pdf(dists, x, method) for x in max_support(dists))
    lo = min(d.loc - 12 * d.scale for d in dists)
    hi = max(d.loc + 12 * d.scale for d in dists)
    pts = sorted({d.loc for d in dists})
    val, _, _ = _quad(lambda x: max_pdf(dists, x, method), lo, hi, pts, 1e-10)
    return val

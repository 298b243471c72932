"""Partition functions, cumulant-generating functions, and energy limits.

The partition function of the N-point process with extra weight psi is
N! det G(psi), where G is the Gram matrix of the orthonormal basis under the
psi-weighted inner product.  Its log-ratio along a direction,

    K(t) = log det G(base + t psi) - log det G(base),

is the cumulant-generating function of the linear statistic sum psi(X_i),
with derivative K'(t) = -int psi(x) B_t(x, x) dmu(x) against the kernel of
the re-orthonormalized basis.  Both routes to the derivative (central finite
difference and the Bergman integral) are exposed so they can be compared.

Monge-Ampere and equilibrium quantities use the per-k potential: the density
against chart Lebesgue measure is (n!/pi^n) det H, where H is the per-k
complex Hessian of the full potential (space weight plus any shifts).  For
the Fubini-Study family the total chart mass is exactly 1; products carry
mass n! * prod(multiplicities), matching the leading rank growth.  The
equilibrium measure is the normalized density.

The Mabuchi-type functional L(phi + psi', u) = int_0^1 int u dmu_eq^(s) ds
(equilibrium measures along the segment phi + psi' + s u) is evaluated by
Gauss-Legendre in s.  The rescaled cumulant functional

    Lambda_k(f) = [log det G(psi + k (psi' - f)) - log det G(psi + k psi')] / (k N)

converges to -L(phi + psi', -f): substituting K'(t) turns the numerator into
k int_0^1 int f B_t dmu dt along the weight path phi + psi' - t f, and
(1/N) B_t dmu tends to the equilibrium measure of that endpoint.  A constant
direction f = c gives Lambda_k = c exactly at every k, which pins the sign.

Smooth positively-curved weights only: when a shifted Hessian loses
positivity the computation stops with a "leaves the Kahler cone" error
rather than projecting onto the psh envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exprs import WeightExpr, complex_hessian
from .kernel import reweighted_evaluator
from .quadrature import QuadratureGrid, build_grid, gram
from .spaces import ModelSpace

__all__ = [
    "PositivityError",
    "PartitionValue",
    "partition_function",
    "mc_partition_ratio",
    "GramPath",
    "monge_ampere_density",
    "equilibrium_mass",
    "mabuchi",
    "lambda_k",
    "lambda_limit",
    "LambdaRow",
    "EnergyReport",
    "lambda_report",
]


class PositivityError(ArithmeticError):
    """A shifted potential left the Kahler cone (non-positive Hessian)."""


def _as_fn(psi):
    """Normalize None | WeightExpr | callable to None or callable."""
    if psi is None:
        return None
    if hasattr(psi, "evaluate"):
        return psi.evaluate
    if callable(psi):
        return psi
    raise TypeError(f"cannot interpret weight {psi!r}")


def _combine(*terms):
    """Weighted sum of optional weight functions -> callable or None.

    terms: (coefficient, fn_or_none) pairs.
    """
    live = [(c, f) for c, f in terms if f is not None and c != 0.0]
    if not live:
        return None

    def total(points):
        acc = None
        for c, f in live:
            v = c * np.asarray(f(points), dtype=float)
            acc = v if acc is None else acc + v
        return acc

    return total


# ---------------------------------------------------------------------------
# partition function


@dataclass(frozen=True)
class PartitionValue:
    rank: int
    logdet_gram: float
    log_value: float    # log Z = log N! + log det G
    value: float        # inf if it overflows

    def to_json_dict(self) -> dict:
        return {
            "rank": self.rank,
            "logdet_gram": self.logdet_gram,
            "log_value": self.log_value,
            "value": self.value,
        }


def partition_function(
    space: ModelSpace, psi=None, grid: QuadratureGrid | None = None
) -> PartitionValue:
    """Z = N! det G(psi), with the log form computed without overflow."""
    if grid is None:
        grid = build_grid(space)
    g = gram(space, grid, psi=psi)
    log_z = float(gammaln(space.rank + 1.0)) + g.logdet
    try:
        value = math.exp(log_z)
    except OverflowError:
        value = math.inf
    return PartitionValue(
        rank=space.rank, logdet_gram=g.logdet, log_value=log_z, value=value
    )


def mc_partition_ratio(configurations, psi) -> tuple[float, float]:
    """Monte Carlo estimate of det G(psi) = E[exp(-sum psi(X_i))].

    Takes exact unweighted samples; returns (mean, standard error).
    """
    fn = _as_fn(psi)
    vals = []
    for conf in configurations:
        if fn is None:
            vals.append(1.0)
        else:
            vals.append(math.exp(-float(np.sum(fn(conf.points)))))
    vals = np.asarray(vals)
    if vals.size == 0:
        raise ValueError("no configurations")
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return float(vals.mean()), se


# ---------------------------------------------------------------------------
# cumulant-generating function


class GramPath:
    """log det G(base + t psi) along a direction psi, with cached values."""

    def __init__(self, space: ModelSpace, psi, base_psi=None, grid=None):
        self.space = space
        self.psi = _as_fn(psi)
        self.base_psi = _as_fn(base_psi)
        self.grid = grid if grid is not None else build_grid(space)
        self._logdets: dict[float, float] = {}

    def weight_at(self, t: float):
        return _combine((1.0, self.base_psi), (float(t), self.psi))

    def logdet(self, t: float) -> float:
        t = float(t)
        if t not in self._logdets:
            self._logdets[t] = gram(self.space, self.grid, psi=self.weight_at(t)).logdet
        return self._logdets[t]

    def cgf(self, t: float) -> float:
        return self.logdet(t) - self.logdet(0.0)

    def bergman_derivative(self, t: float) -> float:
        """K'(t) = -int psi(x) B_t(x, x) dmu(x)."""
        if self.psi is None:
            return 0.0
        ev = reweighted_evaluator(self.space, self.grid, psi=self.weight_at(t), t=1.0)
        rows = ev.section_rows(self.grid.nodes)
        bdiag = np.einsum("mi,mi->m", rows, rows.conj()).real
        c = self.grid.weights * self.grid.density
        return -float(np.sum(c * self.psi(self.grid.nodes) * bdiag))

    def fd_derivative(self, t: float, h: float | None = None) -> float:
        if h is None:
            h = 1e-4 * (1.0 + abs(t))
        return (self.cgf(t + h) - self.cgf(t - h)) / (2.0 * h)

    def derivative_check(self, t: float, h: float | None = None) -> dict:
        fd = self.fd_derivative(t, h)
        bg = self.bergman_derivative(t)
        scale = max(abs(fd), abs(bg), 1e-300)
        return {
            "t": float(t),
            "finite_difference": fd,
            "bergman_integral": bg,
            "rel_gap": abs(fd - bg) / scale,
        }


# ---------------------------------------------------------------------------
# Monge-Ampere quantities


def monge_ampere_density(space: ModelSpace, points, shifts=()) -> np.ndarray:
    """(n!/pi^n) det of the per-k complex Hessian of the shifted potential.

    shifts: (scale, WeightExpr) pairs added to the space's own per-k weight.
    Raises PositivityError when the Hessian is not positive definite
    somewhere on the points.
    """
    Z = np.asarray(points, dtype=complex)
    if Z.ndim == 1:
        Z = Z[:, None]
    H = space.weight_hessian_per_k(Z).copy()
    for scale, expr in shifts:
        if expr is None or scale == 0.0:
            continue
        H += float(scale) * complex_hessian(expr, Z)
    n = space.dim
    eigs = np.linalg.eigvalsh(H)
    worst = float(eigs.min())
    if worst <= 0.0:
        idx = int(np.argmin(eigs.min(axis=1)))
        raise PositivityError(
            "shifted potential leaves the Kahler cone: Hessian eigenvalue "
            f"{worst:.3e} at point index {idx}"
        )
    det = np.prod(eigs, axis=1)
    return (math.factorial(n) / math.pi**n) * det


def _region_mask(region, points):
    return None if region is None else region.mask(points)


def equilibrium_mass(
    space: ModelSpace,
    region=None,
    shifts=(),
    grid: QuadratureGrid | None = None,
) -> float:
    """Normalized Monge-Ampere mass of a radial region.

    region: any object with .mask(points) and .break_radii() (or None for the
    whole chart).  For the Ginibre space the equilibrium measure is the
    uniform law on the disk of radius sqrt(N) (the smooth global potential
    story does not apply without the psh envelope), so only unshifted masses
    are available there.
    """
    if space.kind == "ginibre":
        if shifts:
            raise ValueError(
                "shifted Ginibre equilibrium measures need the psh envelope, "
                "which is out of scope"
            )
        if region is None:
            return 1.0
        lo, hi = region.bounds[0]
        N = float(space.rank)
        return (min(hi * hi, N) - min(lo * lo, N)) / N

    if grid is None:
        breaks = region.break_radii() if region is not None else None
        grid = build_grid(space, breaks=breaks)
    ma = monge_ampere_density(space, grid.nodes, shifts)
    wma = grid.weights * ma
    total = float(wma.sum())
    mask = _region_mask(region, grid.nodes)
    num = total if mask is None else float(wma[mask].sum())
    return num / total


def mabuchi(
    space: ModelSpace,
    psi_prime=None,
    direction: WeightExpr | None = None,
    scale: float = 1.0,
    s_nodes: int = 16,
    grid: QuadratureGrid | None = None,
) -> float:
    """L(phi + psi', scale * u) = int_0^1 int scale*u dmu_eq^(phi+psi'+s*scale*u) ds.

    Gauss-Legendre in s with at least 16 nodes; equilibrium measures from the
    normalized Monge-Ampere density at each s.
    """
    if space.kind == "ginibre":
        raise ValueError(
            "Mabuchi functional on the Ginibre space needs the psh envelope, "
            "which is out of scope"
        )
    if direction is None or scale == 0.0:
        return 0.0
    if s_nodes < 16:
        raise ValueError("s_nodes must be at least 16")
    if grid is None:
        grid = build_grid(space)
    x, w = np.polynomial.legendre.leggauss(s_nodes)
    s_pts = 0.5 * (x + 1.0)
    s_wts = 0.5 * w
    u_vals = float(scale) * np.asarray(direction.evaluate(grid.nodes), dtype=float)
    total = 0.0
    for s, ws in zip(s_pts, s_wts):
        try:
            ma = monge_ampere_density(
                space,
                grid.nodes,
                shifts=((1.0, psi_prime), (float(scale) * float(s), direction)),
            )
        except PositivityError as exc:
            raise PositivityError(f"{exc} (path parameter s={s:.4f})") from None
        wma = grid.weights * ma
        mass = float(wma.sum())
        total += float(ws) * float(np.sum(wma * u_vals)) / mass
    return total


# ---------------------------------------------------------------------------
# rescaled cumulant functional


def lambda_k(
    space: ModelSpace,
    f,
    psi=None,
    psi_prime=None,
    grid: QuadratureGrid | None = None,
) -> float:
    """[log det G(psi + k(psi' - f)) - log det G(psi + k psi')] / (k N)."""
    if grid is None:
        grid = build_grid(space)
    k = float(space.power)
    f_fn = _as_fn(f)
    psi_fn = _as_fn(psi)
    pp_fn = _as_fn(psi_prime)
    shifted = _combine((1.0, psi_fn), (k, pp_fn), (-k, f_fn))
    base = _combine((1.0, psi_fn), (k, pp_fn))
    g1 = gram(space, grid, psi=shifted).logdet
    g2 = gram(space, grid, psi=base).logdet
    return (g1 - g2) / (k * space.rank)


def lambda_limit(
    space: ModelSpace,
    f: WeightExpr,
    psi_prime=None,
    s_nodes: int = 24,
    grid: QuadratureGrid | None = None,
) -> float:
    """Large-k limit of lambda_k: -L(phi + psi', -f)."""
    return -mabuchi(
        space, psi_prime=psi_prime, direction=f, scale=-1.0, s_nodes=s_nodes, grid=grid
    )


@dataclass(frozen=True)
class LambdaRow:
    k: int
    rank: int
    lambda_value: float
    gap: float

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "rank": self.rank,
            "lambda_value": self.lambda_value,
            "gap": self.gap,
        }


@dataclass(frozen=True)
class EnergyReport:
    rows: tuple[LambdaRow, ...]
    target: float
    s_nodes: int

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "target": self.target,
            "s_nodes": self.s_nodes,
        }


def lambda_report(
    spaces_by_k,
    f: WeightExpr,
    psi=None,
    psi_prime=None,
    s_nodes: int = 24,
) -> EnergyReport:
    """lambda_k across a family of spaces plus the Mabuchi-limit target.

    The target uses per-k Hessians, which do not depend on k, so it is
    computed once on the first space of the family.
    """
    spaces_by_k = list(spaces_by_k)
    if not spaces_by_k:
        raise ValueError("no spaces given")
    target = lambda_limit(spaces_by_k[0][1], f, psi_prime=psi_prime, s_nodes=s_nodes)
    rows = []
    for k, space in spaces_by_k:
        lam = lambda_k(space, f, psi=psi, psi_prime=psi_prime)
        rows.append(
            LambdaRow(k=int(k), rank=space.rank, lambda_value=lam, gap=abs(lam - target))
        )
    return EnergyReport(rows=tuple(rows), target=target, s_nodes=s_nodes)

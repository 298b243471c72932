"""Statistics on sampled configurations, checked against kernel predictions.

Every prediction here comes from quadrature of the kernel, never from another
Monte Carlo run.  For a radial region U the count moments of the projection
process are

    E[#U]   = tr A_U,
    Var[#U] = tr A_U - |A_U|_F^2,

where A_U is the restriction of the Gram matrix to U (A_U[i, j] =
integral over U of conj(v_i) v_j dmu), since tr A_U = int_U B(x, x) dmu and
|A_U|_F^2 = double integral of |B(x, y)|^2 over U x U.  Pair predictions are
computed the long way, as the double quadrature of the two-point correlation
det [[B(x,x), B(x,y)], [B(y,x), B(y,y)]], so that sampled pair counts are
tested against the determinant itself and not against an algebraic shortcut.

Radial laws used for Kolmogorov-Smirnov checks:

  * per-factor radius of the Fubini-Study family: mixture over basis states
    of Beta(j+1, K-j+1) laws in s = r^2 / (1 + r^2), which collapses to the
    uniform law in s;
  * Ginibre radius: mixture over j < N of Gamma(j+1) laws in r^2;
  * Ginibre radii rescaled by 1/sqrt(N): CDF min(r^2, 1) in the rank limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammainc

from .quadrature import QuadratureGrid, build_grid, weighted_gram_matrix
from .sampler import Configuration, sample_dpp
from .spaces import ModelSpace

__all__ = [
    "Region",
    "parse_region",
    "EmpiricalMeasure",
    "CountStats",
    "PairStats",
    "IntensityCell",
    "region_count_stats",
    "pair_count_stats",
    "estimate_intensity",
    "radial_cdf",
    "ks_distance",
    "circular_law_distance",
    "CircularLawReport",
    "ConvergenceRow",
    "ConvergenceReport",
    "measure_convergence",
]


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Region:
    """Product of radial annuli, one (r_lo, r_hi) interval per factor."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (0.0 <= lo < hi):
                raise ValueError(f"bad radial interval [{lo}, {hi}]")

    @staticmethod
    def disk(radius: float, dim: int = 1) -> "Region":
        return Region(((0.0, float(radius)),) * dim)

    @staticmethod
    def annulus(inner: float, outer: float, dim: int = 1) -> "Region":
        return Region(((float(inner), float(outer)),) * dim)

    @staticmethod
    def full(dim: int = 1) -> "Region":
        return Region(((0.0, math.inf),) * dim)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def label(self) -> str:
        parts = []
        for lo, hi in self.bounds:
            if lo == 0.0 and math.isinf(hi):
                parts.append("full")
            elif lo == 0.0:
                parts.append(f"disk:{hi:g}")
            else:
                parts.append(f"annulus:{lo:g}:{hi:g}")
        return "x".join(parts)

    def mask(self, points: np.ndarray) -> np.ndarray:
        Z = np.asarray(points, dtype=complex)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Z.shape[1] != self.dim:
            raise ValueError(f"points have {Z.shape[1]} factors, region has {self.dim}")
        r = np.abs(Z)
        ok = np.ones(Z.shape[0], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            ok &= (r[:, i] >= lo) & (r[:, i] <= hi)
        return ok

    def break_radii(self) -> list[list[float]]:
        """Per-factor finite positive radii, for panel-aligned grids."""
        out = []
        for lo, hi in self.bounds:
            edges = [r for r in (lo, hi) if 0.0 < r < math.inf]
            out.append(sorted(set(edges)))
        return out


def parse_region(text: str, dim: int = 1) -> Region:
    """Parse "full", "disk:R" or "annulus:A:B" (same bounds on every factor)."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "full" and len(parts) == 1:
            return Region.full(dim)
        if parts[0] == "disk" and len(parts) == 2:
            return Region.disk(float(parts[1]), dim)
        if parts[0] == "annulus" and len(parts) == 3:
            return Region.annulus(float(parts[1]), float(parts[2]), dim)
    except ValueError as exc:
        raise ValueError(f"bad region {text!r}: {exc}") from None
    raise ValueError(f"bad region {text!r}; expected full, disk:R or annulus:A:B")


def region_grid(
    space: ModelSpace,
    *regions: Region,
    radial: int | None = None,
    angular: int | None = None,
) -> QuadratureGrid:
    """Quadrature grid with panel edges on every region boundary."""
    per_factor: list[list[float]] = [[] for _ in range(space.dim)]
    for reg in regions:
        for i, edges in enumerate(reg.break_radii()):
            per_factor[i].extend(edges)
    breaks = [sorted(set(e)) for e in per_factor]
    if radial is None:
        degree = max(space.factor_degrees)
        radial = max(24, degree // 2 + 6) if space.kind != "ginibre" else 80
    return build_grid(space, radial=radial, angular=angular, breaks=breaks)


# ---------------------------------------------------------------------------
# empirical measures


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Point configurations viewed as probability measures (1/N per point)."""

    configurations: tuple[Configuration, ...]

    def __post_init__(self):
        if len(self.configurations) == 0:
            raise ValueError("need at least one configuration")

    @property
    def reps(self) -> int:
        return len(self.configurations)

    @property
    def rank(self) -> int:
        return self.configurations[0].points.shape[0]

    def counts(self, region: Region) -> np.ndarray:
        return np.array(
            [int(region.mask(c.points).sum()) for c in self.configurations]
        )

    def masses(self, region: Region) -> np.ndarray:
        return self.counts(region) / float(self.rank)

    def pooled_radii(self, factor: int = 0) -> np.ndarray:
        return np.concatenate(
            [np.abs(c.points[:, factor]) for c in self.configurations]
        )


# ---------------------------------------------------------------------------
# count statistics


@dataclass(frozen=True)
class CountStats:
    region: str
    reps: int
    predicted_mean: float
    predicted_variance: float
    observed_mean: float
    observed_variance: float
    mean_z: float
    variance_z: float

    def to_json_dict(self) -> dict:
        return {
            "region": self.region,
            "reps": self.reps,
            "predicted_mean": self.predicted_mean,
            "predicted_variance": self.predicted_variance,
            "observed_mean": self.observed_mean,
            "observed_variance": self.observed_variance,
            "mean_z": self.mean_z,
            "variance_z": self.variance_z,
        }


def count_moments(space: ModelSpace, region: Region, grid: QuadratureGrid | None = None):
    """Predicted (mean, variance) of the point count in a region."""
    if grid is None:
        grid = region_grid(space, region)
    A = weighted_gram_matrix(space, grid, mask=region.mask(grid.nodes))
    mean = float(np.trace(A).real)
    var = mean - float(np.sum(np.abs(A) ** 2))
    return mean, max(var, 0.0)


def _ratio_z(obs: float, pred: float, se: float) -> float:
    if se > 0.0:
        return (obs - pred) / se
    return 0.0 if obs == pred else math.inf if obs > pred else -math.inf


def region_count_stats(
    space: ModelSpace,
    configurations,
    region: Region,
    grid: QuadratureGrid | None = None,
) -> CountStats:
    emp = EmpiricalMeasure(tuple(configurations))
    pred_mean, pred_var = count_moments(space, region, grid)
    counts = emp.counts(region).astype(float)
    reps = emp.reps
    obs_mean = float(counts.mean())
    obs_var = float(counts.var(ddof=1)) if reps > 1 else 0.0
    mean_z = _ratio_z(obs_mean, pred_mean, math.sqrt(pred_var / reps) if pred_var > 0 else 0.0)
    # standard error of the sample variance from the observed 4th central moment
    centered = counts - obs_mean
    m2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / reps)
    variance_z = _ratio_z(obs_var, pred_var, se_var)
    return CountStats(
        region=region.label,
        reps=reps,
        predicted_mean=pred_mean,
        predicted_variance=pred_var,
        observed_mean=obs_mean,
        observed_variance=obs_var,
        mean_z=mean_z,
        variance_z=variance_z,
    )


@dataclass(frozen=True)
class PairStats:
    region_a: str
    region_b: str
    reps: int
    predicted: float       # double quadrature of rho_2 over A x B
    observed_mean: float   # mean of #A * #B (or #A(#A - 1) on the diagonal)
    observed_se: float
    z: float

    def to_json_dict(self) -> dict:
        return {
            "region_a": self.region_a,
            "region_b": self.region_b,
            "reps": self.reps,
            "predicted": self.predicted,
            "observed_mean": self.observed_mean,
            "observed_se": self.observed_se,
            "z": self.z,
        }


def pair_correlation_integral(
    space: ModelSpace,
    region_a: Region,
    region_b: Region,
    grid: QuadratureGrid | None = None,
) -> float:
    """Double quadrature of rho_2(x, y) = B(x,x)B(y,y) - |B(x,y)|^2 over A x B."""
    if grid is None:
        grid = region_grid(space, region_a, region_b)
    c = grid.weights * grid.density
    ma = region_a.mask(grid.nodes)
    mb = region_b.mask(grid.nodes)
    Va = space.section_matrix(grid.nodes[ma])
    Vb = space.section_matrix(grid.nodes[mb])
    ca, cb = c[ma], c[mb]
    da = np.einsum("ai,ai->a", Va, Va.conj()).real
    db = np.einsum("bi,bi->b", Vb, Vb.conj()).real
    diag_term = float((ca * da).sum() * (cb * db).sum())
    # explicit |B(x,y)|^2 double sum, blocked to bound the cross-kernel size
    cross_term = 0.0
    step = max(1, int(4_000_000 // max(Vb.shape[0], 1)))
    for a0 in range(0, Va.shape[0], step):
        K = Va[a0 : a0 + step] @ Vb.conj().T
        cross_term += float(ca[a0 : a0 + step] @ (np.abs(K) ** 2 @ cb))
    return diag_term - cross_term


def pair_count_stats(
    space: ModelSpace,
    configurations,
    regions,
    grid: QuadratureGrid | None = None,
) -> list[PairStats]:
    """Pair-count checks over all unordered region pairs, diagonal included."""
    regions = list(regions)
    emp = EmpiricalMeasure(tuple(configurations))
    if grid is None:
        grid = region_grid(space, *regions)
    counts = np.stack([emp.counts(reg).astype(float) for reg in regions])
    out = []
    for a in range(len(regions)):
        for b in range(a, len(regions)):
            pred = pair_correlation_integral(space, regions[a], regions[b], grid)
            if a == b:
                stat = counts[a] * (counts[a] - 1.0)
            else:
                stat = counts[a] * counts[b]
            obs = float(stat.mean())
            se = float(stat.std(ddof=1) / math.sqrt(emp.reps)) if emp.reps > 1 else 0.0
            out.append(
                PairStats(
                    region_a=regions[a].label,
                    region_b=regions[b].label,
                    reps=emp.reps,
                    predicted=pred,
                    observed_mean=obs,
                    observed_se=se,
                    z=_ratio_z(obs, pred, se),
                )
            )
    return out


# ---------------------------------------------------------------------------
# binned intensity


@dataclass(frozen=True)
class IntensityCell:
    center_re: float
    center_im: float
    rate: float        # mean count per replicate per unit area
    stderr: float
    prediction: float  # B(x, x) * base density at the cell center
    expected_count: float


def estimate_intensity(
    space: ModelSpace,
    configurations,
    bins: int = 40,
    extent: float | None = None,
) -> list[IntensityCell]:
    """Square-bin intensity estimate on a dim-1 chart with kernel predictions."""
    if space.dim != 1:
        raise ValueError("binned intensity is implemented for one-factor charts")
    emp = EmpiricalMeasure(tuple(configurations))
    if extent is None:
        extent = space.truncation_radius or 4.0
        if space.kind == "ginibre":
            extent = math.sqrt(space.rank) * 1.25 + 1.0
    edges = np.linspace(-extent, extent, bins + 1)
    width = edges[1] - edges[0]
    area = width * width
    reps = emp.reps

    per_rep = np.zeros((reps, bins, bins))
    for r, conf in enumerate(emp.configurations):
        z = conf.points[:, 0]
        ix = np.searchsorted(edges, z.real, side="right") - 1
        iy = np.searchsorted(edges, z.imag, side="right") - 1
        keep = (ix >= 0) & (ix < bins) & (iy >= 0) & (iy < bins)
        np.add.at(per_rep[r], (ix[keep], iy[keep]), 1.0)

    mean_counts = per_rep.mean(axis=0)
    se_counts = (
        per_rep.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(mean_counts)
    )
    centers = 0.5 * (edges[:-1] + edges[1:])
    cells = []
    for i in range(bins):
        zrow = centers[i] + 1j * centers
        V = space.section_matrix(zrow[:, None])
        bdiag = np.einsum("mi,mi->m", V, V.conj()).real
        pred = bdiag * space.base_density(zrow[:, None])
        for j in range(bins):
            cells.append(
                IntensityCell(
                    center_re=float(centers[i]),
                    center_im=float(centers[j]),
                    rate=float(mean_counts[i, j] / area),
                    stderr=float(se_counts[i, j] / area),
                    prediction=float(pred[j]),
                    expected_count=float(pred[j] * area),
                )
            )
    return cells


# ---------------------------------------------------------------------------
# radial laws


def radial_cdf(space: ModelSpace, factor: int = 0):
    """CDF of one pooled point radius |z_factor| under the projection process.

    Mixture over basis states: Beta laws in s = r^2/(1+r^2) for Fubini-Study
    factors (uniform in s after summation), Gamma laws in r^2 for Ginibre.
    """
    if space.kind == "ginibre":
        N = space.rank

        def cdf(r):
            r = np.asarray(r, dtype=float)
            j = np.arange(N)
            return gammainc(j[None, :] + 1.0, (r * r)[..., None]).mean(axis=-1)

        return cdf

    K = space.factor_degrees[factor]

    def cdf(r):
        r = np.asarray(r, dtype=float)
        s = (r * r) / (1.0 + r * r)
        j = np.arange(K + 1)
        return betainc(j[None, :] + 1.0, K - j[None, :] + 1.0, s[..., None]).mean(axis=-1)

    return cdf


def ks_distance(values: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a callable CDF."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no values")
    F = np.asarray(cdf(x), dtype=float)
    hi = np.max(np.arange(1, n + 1) / n - F)
    lo = np.max(F - np.arange(0, n) / n)
    return float(max(hi, lo))


@dataclass(frozen=True)
class CircularLawReport:
    rank: int
    reps: int
    pooled_points: int
    distance: float

    def to_json_dict(self) -> dict:
        return {
            "rank": self.rank,
            "reps": self.reps,
            "pooled_points": self.pooled_points,
            "distance": self.distance,
        }


def circular_law_distance(space: ModelSpace, configurations) -> CircularLawReport:
    """KS distance of radii / sqrt(N) to the unit-disk radial CDF min(r^2, 1)."""
    if space.kind != "ginibre":
        raise ValueError("the circular-law check applies to the Ginibre space")
    emp = EmpiricalMeasure(tuple(configurations))
    radii = emp.pooled_radii(0) / math.sqrt(space.rank)
    dist = ks_distance(radii, lambda r: np.minimum(np.asarray(r) ** 2, 1.0))
    return CircularLawReport(
        rank=space.rank,
        reps=emp.reps,
        pooled_points=radii.size,
        distance=dist,
    )


# ---------------------------------------------------------------------------
# equilibrium-measure convergence


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    rank: int
    mc_mass: float
    mc_se: float
    replicate_variance: float
    quadrature_mass: float    # (1/N) int_U B(x,x) dmu
    equilibrium_mass: float
    gap: float                # |mc_mass - equilibrium_mass|

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "rank": self.rank,
            "mc_mass": self.mc_mass,
            "mc_se": self.mc_se,
            "replicate_variance": self.replicate_variance,
            "quadrature_mass": self.quadrature_mass,
            "equilibrium_mass": self.equilibrium_mass,
            "gap": self.gap,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    region: str
    reps: int
    seed: int | None
    rows: tuple[ConvergenceRow, ...]
    warnings: tuple[str, ...] = field(default=())

    def to_json_dict(self) -> dict:
        return {
            "region": self.region,
            "reps": self.reps,
            "seed": self.seed,
            "rows": [r.to_json_dict() for r in self.rows],
            "warnings": list(self.warnings),
        }


def convergence_row(
    space: ModelSpace,
    k: int,
    configurations,
    region: Region,
    grid: QuadratureGrid | None = None,
) -> ConvergenceRow:
    from .energy import equilibrium_mass

    emp = EmpiricalMeasure(tuple(configurations))
    if grid is None:
        grid = region_grid(space, region)
    pred_mean, _ = count_moments(space, region, grid)
    masses = emp.masses(region)
    mc = float(masses.mean())
    se = float(masses.std(ddof=1) / math.sqrt(emp.reps)) if emp.reps > 1 else 0.0
    eq = equilibrium_mass(space, region=region)
    return ConvergenceRow(
        k=k,
        rank=space.rank,
        mc_mass=mc,
        mc_se=se,
        replicate_variance=float(masses.var(ddof=1)) if emp.reps > 1 else 0.0,
        quadrature_mass=pred_mean / space.rank,
        equilibrium_mass=eq,
        gap=abs(mc - eq),
    )


def measure_convergence(
    spaces_by_k,
    region: Region,
    reps: int,
    seed: int,
    sample_fn=None,
) -> ConvergenceReport:
    """Empirical-measure convergence report over a family of spaces.

    spaces_by_k: sequence of (k, ModelSpace); sample_fn(space, reps, seed,
    k_index) may be supplied to override the default sequential exact sampler
    (the CLI uses this for worker pools; streams are keyed by (k_index, rep)
    either way, so results do not depend on scheduling).
    """
    if sample_fn is None:
        def sample_fn(space, n, s, k_index):
            return [sample_dpp(space, seed=s, stream=(k_index, r)) for r in range(n)]

    rows = []
    warnings: list[str] = []
    for idx, (k, space) in enumerate(spaces_by_k):
        configs = sample_fn(space, reps, seed, idx)
        rows.append(convergence_row(space, k, configs, region))
    for prev, cur in zip(rows, rows[1:]):
        if cur.replicate_variance > prev.replicate_variance:
            warnings.append(
                f"replicate variance increased from k={prev.k} to k={cur.k}"
            )
    return ConvergenceReport(
        region=region.label,
        reps=reps,
        seed=seed,
        rows=tuple(rows),
        warnings=tuple(warnings),
    )

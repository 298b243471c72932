"""Tensor-product quadrature grids and Gram matrices on model-space charts.

Radial structure.  Every factor is integrated in the squared radius t = r^2.
Fubini-Study factors map t to s = t/(1+t) in [0, 1]; under this substitution
the Gram integrands t^j (1+t)^{-K-2} dt become polynomials s^j (1-s)^{K-j} ds,
so Gauss-Legendre nodes integrate them exactly once 2*n_r - 1 >= 2K.  Ginibre
factors use Gauss-Legendre directly on t in [0, R^2] with R = sqrt(2N) + 6;
the Gaussian tail beyond R is below 1e-12 of any Gram entry at that rank.

Panels.  The radial rule accepts breakpoints (region radii).  Each panel gets
its own Gauss-Legendre nodes, so indicator functions of disks and annuli are
constant per panel and region masses keep spectral accuracy instead of the
O(n^{-2}) loss from cutting a Gauss panel in half.

Angular structure.  Uniform angles with weight 2 pi / n_theta integrate
e^{i j theta} exactly for 0 < |j| < n_theta; the default n_theta = 2 d + 1
(d the factor's top degree) makes every angular integral arising from
products of two sections, and from |B|^2, exact.

Grams.  gram() assembles A_ij = int v_i conj(v_j) e^{-psi} dmu, Hermitianizes
as (A + A^H)/2 with the asymmetry recorded, and reports the log-determinant
from a pivoted factorization.  Non-positive-definite results raise
GramDegenerateError (the usual cause being a grid with fewer nodes than the
rank needs).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .spaces import ModelSpace

__all__ = [
    "GramDegenerateError",
    "QuadratureGrid",
    "GramMatrix",
    "build_grid",
    "integrate",
    "integrate_lebesgue",
    "gram",
    "weighted_gram_matrix",
    "gram_to_csv",
]


class GramDegenerateError(ArithmeticError):
    """Gram matrix is numerically not positive definite."""


@dataclass(frozen=True)
class QuadratureGrid:
    """Flat list of chart nodes with Lebesgue weights and base density."""

    nodes: np.ndarray          # (M, n) complex
    weights: np.ndarray        # (M,) chart-Lebesgue weights
    density: np.ndarray        # base_density at the nodes
    radial: tuple[int, ...]    # Gauss nodes per radial panel, per factor
    angular: tuple[int, ...]   # angular nodes per factor
    breaks: tuple[tuple[float, ...], ...]  # radial panel breakpoints (radii)
    truncation: float | None   # outer radius for non-compact factors
    under_resolved: bool       # true when nodes per factor < 4 * factor rank

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def mass(self) -> float:
        return float(np.sum(self.weights * self.density))


def _panel_gauss(edges: np.ndarray, n_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on each [edges[i], edges[i+1]] panel."""
    x, w = np.polynomial.legendre.leggauss(n_per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _factor_grid(
    kind: str, trunc: float | None, n_radial: int, n_angular: int, breaks: tuple[float, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """2-d polar rule for one factor: nodes (m,) complex, Lebesgue weights (m,)."""
    radii = sorted(r for r in breaks if r > 0.0 and math.isfinite(r))
    if kind == "ginibre":
        edges = np.array([0.0] + [r**2 for r in radii if r < trunc] + [trunc**2])
        t, wt = _panel_gauss(edges, n_radial)
    else:
        # s = t / (1 + t); Gram integrands are polynomials in s
        s_edges = np.array([0.0] + [r**2 / (1.0 + r**2) for r in radii] + [1.0])
        s, ws = _panel_gauss(s_edges, n_radial)
        t = s / (1.0 - s)
        wt = ws / (1.0 - s) ** 2
    theta = 2.0 * math.pi * np.arange(n_angular) / n_angular
    z = np.sqrt(t)[:, None] * np.exp(1j * theta)[None, :]
    # dm = (1/2) dt dtheta in polar squared-radius coordinates
    w = 0.5 * wt[:, None] * (2.0 * math.pi / n_angular) * np.ones(n_angular)[None, :]
    return z.ravel(), w.ravel()


def build_grid(
    space: ModelSpace,
    radial: int | None = None,
    angular: int | None = None,
    truncation: float | None = None,
    breaks: tuple[tuple[float, ...], ...] | tuple[float, ...] | None = None,
) -> QuadratureGrid:
    """Tensor-product grid adapted to the space.

    radial:     Gauss-Legendre nodes per radial panel (default resolves the
                rank exactly with headroom).
    angular:    angles per factor (default 2 * degree + 1, the exactness bound).
    truncation: outer radius override for non-compact factors.
    breaks:     radii at which radial panels split, either one tuple shared by
                all factors or a per-factor tuple of tuples.  Regions whose
                boundaries appear here are integrated to spectral accuracy.
    """
    n = space.dim
    if breaks is None:
        per_factor_breaks: tuple[tuple[float, ...], ...] = tuple(() for _ in range(n))
    elif len(breaks) > 0 and isinstance(breaks[0], (tuple, list)):
        if len(breaks) != n:
            raise ValueError(f"need breaks for {n} factors, got {len(breaks)}")
        per_factor_breaks = tuple(tuple(float(r) for r in b) for b in breaks)
    else:
        per_factor_breaks = tuple(tuple(float(r) for r in breaks) for _ in range(n))

    if truncation is not None and space.kind != "ginibre":
        raise ValueError("truncation only applies to non-compact (ginibre) charts")
    trunc = float(truncation) if truncation is not None else space.truncation_radius

    radials, angulars, zs, ws = [], [], [], []
    for i in range(n):
        d = space.factor_degrees[i]
        n_ang = angular if angular is not None else max(8, 2 * d + 1)
        if radial is not None:
            n_rad = radial
        elif space.kind == "ginibre":
            n_rad = max(128, int(math.ceil(trunc**2)))
        elif n == 1:
            n_rad = max(96, d + 33)
        else:
            # meshed factors multiply; d//2 + 8 still integrates the degree-d
            # Gram integrands exactly
            n_rad = max(32, d // 2 + 8)
        z, w = _factor_grid(space.kind, trunc, n_rad, n_ang, per_factor_breaks[i])
        radials.append(n_rad)
        angulars.append(n_ang)
        zs.append(z)
        ws.append(w)

    if n == 1:
        nodes = zs[0][:, None]
        weights = ws[0]
    else:
        mesh = np.meshgrid(*zs, indexing="ij")
        wmesh = np.meshgrid(*ws, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        weights = np.ones(nodes.shape[0])
        for wm in wmesh:
            weights = weights * wm.ravel()

    density = space.base_density(nodes)
    under = any(
        (radials[i] * (len(per_factor_breaks[i]) + 1)) * angulars[i] < 4 * (space.factor_degrees[i] + 1)
        for i in range(n)
    )
    return QuadratureGrid(
        nodes=nodes,
        weights=weights,
        density=density,
        radial=tuple(radials),
        angular=tuple(angulars),
        breaks=per_factor_breaks,
        truncation=trunc if space.kind == "ginibre" else None,
        under_resolved=under,
    )


def _values_on(grid: QuadratureGrid, f) -> np.ndarray:
    vals = f(grid.nodes) if callable(f) else np.asarray(f)
    vals = np.asarray(vals)
    if vals.shape != (grid.size,):
        raise ValueError(f"integrand must return shape ({grid.size},), got {vals.shape}")
    bad = ~np.isfinite(vals) if not np.iscomplexobj(vals) else ~(
        np.isfinite(vals.real) & np.isfinite(vals.imag)
    )
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"integrand is non-finite at node {i}, z = {grid.nodes[i].tolist()}"
        )
    return vals


def integrate(grid: QuadratureGrid, f):
    """Integral against the base measure: sum_i w_i rho(z_i) f(z_i)."""
    vals = _values_on(grid, f)
    out = np.sum(grid.weights * grid.density * vals)
    return out if np.iscomplexobj(vals) else float(out)


def integrate_lebesgue(grid: QuadratureGrid, f):
    """Integral against chart Lebesgue measure (no base density factor)."""
    vals = _values_on(grid, f)
    out = np.sum(grid.weights * vals)
    return out if np.iscomplexobj(vals) else float(out)


@dataclass(frozen=True)
class GramMatrix:
    """Hermitianized Gram matrix with its log-determinant and diagnostics."""

    matrix: np.ndarray       # (N, N) complex Hermitian
    logdet: float
    psi: str | None          # textual description of the extra weight
    asymmetry_abs: float     # max |A - A^H| before Hermitianization
    asymmetry_rel: float

    @property
    def rank(self) -> int:
        return self.matrix.shape[0]


def _psi_values(psi, nodes: np.ndarray) -> np.ndarray:
    if psi is None:
        return np.zeros(nodes.shape[0])
    vals = psi.evaluate(nodes) if hasattr(psi, "evaluate") else psi(nodes)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (nodes.shape[0],):
        raise ValueError(f"extra weight must return shape ({nodes.shape[0]},)")
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise ValueError(f"extra weight non-finite at node {i}, z = {nodes[i].tolist()}")
    return vals


def weighted_gram_matrix(
    space: ModelSpace, grid: QuadratureGrid, psi=None, mask: np.ndarray | None = None
) -> np.ndarray:
    """Raw Hermitianized Gram A_ij = int_U v_i conj(v_j) e^{-psi} dmu.

    No positivity check: with a mask (region indicator) the result is only
    positive semi-definite.
    """
    V = space.section_matrix(grid.nodes)
    c = grid.weights * grid.density * np.exp(-_psi_values(psi, grid.nodes))
    if mask is not None:
        c = c * mask
    if not np.all(np.isfinite(c)):
        raise ValueError("quadrature factor overflowed; extra weight too negative")
    A = (c[:, None] * V).T @ V.conj()
    return 0.5 * (A + A.conj().T)


def gram(space: ModelSpace, grid: QuadratureGrid, psi=None) -> GramMatrix:
    """Gram matrix of the section family under an optional extra weight psi."""
    V = space.section_matrix(grid.nodes)
    c = grid.weights * grid.density * np.exp(-_psi_values(psi, grid.nodes))
    if not np.all(np.isfinite(c)):
        raise ValueError("quadrature factor overflowed; extra weight too negative")
    A_raw = (c[:, None] * V).T @ V.conj()
    asym_abs = float(np.max(np.abs(A_raw - A_raw.conj().T), initial=0.0))
    scale = float(np.max(np.abs(A_raw), initial=0.0))
    A = 0.5 * (A_raw + A_raw.conj().T)
    eigs = np.linalg.eigvalsh(A)
    if eigs[0] <= 0.0 or eigs[0] <= 1e-12 * eigs[-1]:
        raise GramDegenerateError(
            f"gram-degenerate: eigenvalue range [{eigs[0]:.3e}, {eigs[-1]:.3e}] "
            f"with {grid.size} nodes for rank {space.rank}; refine the grid"
        )
    sign, logdet = np.linalg.slogdet(A)
    if sign.real <= 0.0:
        raise GramDegenerateError("gram-degenerate: non-positive determinant")
    psi_descr = None
    if psi is not None:
        psi_descr = getattr(psi, "source", None) or repr(psi)
    return GramMatrix(
        matrix=A,
        logdet=float(logdet),
        psi=psi_descr,
        asymmetry_abs=asym_abs,
        asymmetry_rel=asym_abs / scale if scale > 0 else 0.0,
    )


def gram_to_csv(gram_matrix: GramMatrix | np.ndarray, path: str) -> None:
    """Write a Gram matrix as CSV, row-major, each cell a quoted "re,im" pair."""
    A = gram_matrix.matrix if isinstance(gram_matrix, GramMatrix) else np.asarray(gram_matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_ALL)
        for row in A:
            writer.writerow([f"{float(val.real)!r},{float(val.imag)!r}" for val in row])

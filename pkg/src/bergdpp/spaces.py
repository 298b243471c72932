"""Explicit model spaces carrying an orthonormal family of weighted sections.

Each space lives on an affine chart C^n and is described by

  * a holomorphic monomial basis f_alpha(z) = prod_i c_{alpha_i} z_i^{alpha_i},
  * a plurisubharmonic weight Phi(z), folded into *half-weighted* section
    values v_alpha(z) = f_alpha(z) exp(-Phi(z)/2),
  * a base probability-or-reference density rho(z) against chart Lebesgue
    measure dm, so integrals read  int g dmu = int g(z) rho(z) dm(z).

Built-in spaces:

  Ginibre(N)      chart C, Phi = |z|^2, rho = 1/pi, basis z^j / sqrt(j!).
                  The reference measure dm/pi with the Gaussian folded into
                  the sections makes these monomials exactly orthonormal
                  (the plain standard Gaussian would give ||z^j/sqrt(j!)||^2
                  = 2^j instead).  Non-compact: quadrature truncates at
                  R = sqrt(2 N) + 6, where the Gaussian tail is negligible.

  FubiniStudy(k)  chart C, Phi = k log(1+|z|^2), rho = (1/pi)(1+|z|^2)^{-2},
                  basis c_j z^j with c_j = sqrt((k+1) C(k,j)), rank k+1.
                  The diagonal kernel is identically k+1.

  Product(m, k)   chart C^n, one Fubini-Study factor per entry of m at power
                  m_i k; rank = prod_i (m_i k + 1); everything factorizes.

The per-k complex Hessian of the weight at a chart point feeds the limit
kernel: at the origin it is diag(m_i) for products (1 for FS and Ginibre).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ModelSpace",
    "NormalFrame",
    "make_ginibre",
    "make_fubini_study",
    "make_product",
    "normalized_section_values",
    "limit_frame",
    "space_to_config",
    "space_from_config",
]


def _as_points(z, dim: int) -> np.ndarray:
    """Coerce scalar / (n,) / (M,n) input to an (M, n) complex array."""
    Z = np.asarray(z, dtype=complex)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1)
    elif Z.ndim == 1:
        # ambiguous: a single point of dim n, or a batch on a 1-dim chart
        Z = Z[None, :] if (dim > 1 and Z.shape[0] == dim) else Z[:, None]
    if Z.ndim != 2 or Z.shape[1] != dim:
        raise ValueError(f"points must have {dim} complex coordinates, got shape {np.shape(z)}")
    return Z


@dataclass(frozen=True)
class ModelSpace:
    """A rank-N family of half-weighted holomorphic sections on C^dim."""

    kind: str                        # "ginibre" | "fs" | "product"
    dim: int
    rank: int
    power: int                       # k for fs/product; N for ginibre (Gibbs scale)
    multiplicities: tuple[int, ...]  # per-factor m_i (empty for ginibre)
    factor_degrees: tuple[int, ...]  # top monomial degree per factor

    # -- factor data ------------------------------------------------------

    @property
    def factor_ranks(self) -> tuple[int, ...]:
        return tuple(d + 1 for d in self.factor_degrees)

    def factor_log_norms(self, i: int) -> np.ndarray:
        """log of the basis normalization constants c_j for factor i."""
        j = np.arange(self.factor_degrees[i] + 1, dtype=float)
        if self.kind == "ginibre":
            return -0.5 * gammaln(j + 1.0)
        K = self.multiplicities[i] * self.power
        return 0.5 * (
            math.log(K + 1.0) + gammaln(K + 1.0) - gammaln(j + 1.0) - gammaln(K - j + 1.0)
        )

    def _factor_values(self, i: int, z: np.ndarray) -> np.ndarray:
        """Half-weighted values v_j(z) for factor i; z is (M,) complex."""
        d = self.factor_degrees[i]
        j = np.arange(d + 1, dtype=float)
        r = np.abs(z)
        theta = np.angle(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            logr = np.log(r)
            jlogr = j[None, :] * logr[:, None]
        jlogr[:, 0] = 0.0  # j = 0 term, avoids 0 * (-inf)
        if self.kind == "ginibre":
            logmag = jlogr - 0.5 * gammaln(j + 1.0)[None, :] - 0.5 * (r**2)[:, None]
        else:
            K = self.multiplicities[i] * self.power
            logmag = (
                jlogr
                + self.factor_log_norms(i)[None, :]
                - 0.5 * K * np.log1p(r**2)[:, None]
            )
        return np.exp(logmag) * np.exp(1j * j[None, :] * theta[:, None])

    # -- sections ----------------------------------------------------------

    def section_matrix(self, points) -> np.ndarray:
        """Half-weighted section values, shape (M, rank).

        Multi-factor bases are flattened in C order: the first factor's
        degree is the slowest index.
        """
        Z = _as_points(points, self.dim)
        V = self._factor_values(0, Z[:, 0])
        for i in range(1, self.dim):
            Vi = self._factor_values(i, Z[:, i])
            V = (V[:, :, None] * Vi[:, None, :]).reshape(Z.shape[0], -1)
        return V

    # -- weight and measure -------------------------------------------------

    def weight_value(self, points) -> np.ndarray:
        """Full weight Phi(z) (already including the power k)."""
        Z = _as_points(points, self.dim)
        if self.kind == "ginibre":
            return np.abs(Z[:, 0]) ** 2
        t = np.abs(Z) ** 2
        m = np.asarray(self.multiplicities, dtype=float)
        return self.power * (np.log1p(t) * m[None, :]).sum(axis=1)

    def weight_per_k(self, points) -> np.ndarray:
        """Per-k potential phi(z): Phi = k phi for fs/product, phi = |z|^2 for ginibre."""
        Z = _as_points(points, self.dim)
        if self.kind == "ginibre":
            return np.abs(Z[:, 0]) ** 2
        t = np.abs(Z) ** 2
        m = np.asarray(self.multiplicities, dtype=float)
        return (np.log1p(t) * m[None, :]).sum(axis=1)

    def weight_hessian_per_k(self, points) -> np.ndarray:
        """Complex Hessian of the per-k potential, shape (M, n, n)."""
        Z = _as_points(points, self.dim)
        M, n = Z.shape
        H = np.zeros((M, n, n), dtype=complex)
        if self.kind == "ginibre":
            H[:, 0, 0] = 1.0
            return H
        t = np.abs(Z) ** 2
        for i in range(n):
            H[:, i, i] = self.multiplicities[i] / (1.0 + t[:, i]) ** 2
        return H

    def base_density(self, points) -> np.ndarray:
        """d mu / dm against chart Lebesgue measure."""
        Z = _as_points(points, self.dim)
        if self.kind == "ginibre":
            return np.full(Z.shape[0], 1.0 / math.pi)
        t = np.abs(Z) ** 2
        return np.prod(1.0 / (math.pi * (1.0 + t) ** 2), axis=1)

    @property
    def truncation_radius(self) -> float | None:
        """Default radial truncation for non-compact charts."""
        if self.kind == "ginibre":
            return math.sqrt(2.0 * self.rank) + 6.0
        return None


# ---------------------------------------------------------------------------
# factories


def make_ginibre(rank: int) -> ModelSpace:
    """Ginibre space of rank N on C: weight |z|^2, basis z^j/sqrt(j!)."""
    if not isinstance(rank, (int, np.integer)) or rank < 1:
        raise ValueError(f"ginibre rank must be a positive integer, got {rank!r}")
    rank = int(rank)
    return ModelSpace(
        kind="ginibre",
        dim=1,
        rank=rank,
        power=rank,
        multiplicities=(),
        factor_degrees=(rank - 1,),
    )


def make_fubini_study(k: int) -> ModelSpace:
    """Fubini-Study space at power k on C: rank k+1, diagonal kernel k+1."""
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError(f"fubini-study power must be an integer >= 0, got {k!r}")
    k = int(k)
    return ModelSpace(
        kind="fs",
        dim=1,
        rank=k + 1,
        power=k,
        multiplicities=(1,),
        factor_degrees=(k,),
    )


def make_product(multiplicities, k: int) -> ModelSpace:
    """Product of Fubini-Study factors at powers m_i * k on C^n."""
    mult = tuple(int(m) for m in multiplicities)
    if len(mult) == 0:
        raise ValueError("product space needs at least one factor")
    if any(m < 1 for m in mult):
        raise ValueError(f"factor multiplicities must be >= 1, got {mult}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"product power must be an integer >= 1, got {k!r}")
    k = int(k)
    degrees = tuple(m * k for m in mult)
    rank = 1
    for d in degrees:
        rank *= d + 1
    return ModelSpace(
        kind="product",
        dim=len(mult),
        rank=rank,
        power=k,
        multiplicities=mult,
        factor_degrees=degrees,
    )


# ---------------------------------------------------------------------------
# point-level operations and limit frames


def normalized_section_values(space: ModelSpace, z) -> np.ndarray:
    """Half-weighted section values v_i(z) = f_i(z) exp(-Phi(z)/2) at one point."""
    pt = np.atleast_1d(np.asarray(z, dtype=complex))
    if not (np.all(np.isfinite(pt.real)) and np.all(np.isfinite(pt.imag))):
        raise ValueError(f"point must be finite, got {z!r}")
    Z = _as_points(pt, space.dim)
    if Z.shape[0] != 1:
        raise ValueError("normalized_section_values takes a single chart point")
    return space.section_matrix(Z)[0]


@dataclass(frozen=True)
class NormalFrame:
    """Limit data at a chart point: Hessian eigenvalues and density kappa."""

    space: ModelSpace
    center: tuple[complex, ...]
    lam: tuple[float, ...]

    def kappa(self, points) -> np.ndarray:
        """Chart density d mu / dm near the center."""
        return self.space.base_density(points)

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=complex)


def limit_frame(space: ModelSpace, center) -> NormalFrame:
    """Normal frame at a chart point: per-k Hessian eigenvalues and kappa.

    For the built-in spaces the Hessian is diagonal in the chart coordinates,
    so the eigenvalues stay aligned with the coordinates (the limit kernel
    needs that alignment; it holds everywhere on products and trivially on
    one-dimensional charts).
    """
    c = np.atleast_1d(np.asarray(center, dtype=complex))
    if c.shape != (space.dim,):
        raise ValueError(f"center must have {space.dim} complex coordinates")
    if not (np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))):
        raise ValueError(f"center must be finite, got {center!r}")
    H = space.weight_hessian_per_k(c[None, :])[0]
    off = H - np.diag(np.diag(H))
    if np.max(np.abs(off), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H))):
        lam = np.linalg.eigvalsh(H)
    else:
        lam = np.diag(H).real
    if np.min(lam) <= 0.0:
        raise ValueError(f"weight is not smooth_positive at {center!r}: eigenvalues {lam}")
    kappa0 = float(space.base_density(c[None, :])[0])
    if not kappa0 > 0.0:
        raise ValueError(f"base density vanishes at {center!r}")
    return NormalFrame(space=space, center=tuple(c.tolist()), lam=tuple(float(x) for x in lam))


# ---------------------------------------------------------------------------
# serialization


def space_to_config(space: ModelSpace) -> dict:
    if space.kind == "ginibre":
        return {"kind": "ginibre", "N": space.rank}
    if space.kind == "fs":
        return {"kind": "fs", "k": space.power}
    return {"kind": "product", "multiplicities": list(space.multiplicities), "k": space.power}


def space_from_config(config: dict) -> ModelSpace:
    kind = config.get("kind")
    if kind == "ginibre":
        rank = config.get("N", config.get("n"))
        return make_ginibre(rank)
    if kind == "fs":
        return make_fubini_study(config["k"])
    if kind == "product":
        return make_product(config["multiplicities"], config["k"])
    raise ValueError(f"unknown space kind {kind!r}")

"""Exact and Markov-chain samplers for the determinantal point processes.

Exact sampler.  A projection kernel of rank N is sampled sequentially: after
points x_1..x_i are fixed, the next point has conditional mu-density
g_i(x) / (N - i), where g_i(x) is the squared norm of the feature vector
v(x) = (v_1(x), ..., v_N(x)) projected onto the orthocomplement of
span{v(x_1), ..., v(x_i)}.  That orthocomplement is carried as a matrix W
with orthonormal columns, so g_i(x) = |W^H v(x)|^2 costs one matvec and each
acceptance removes a column by a Householder reflection.  Proposals are
drawn from the exact one-point intensity B(x, x) dmu / N, which is directly
sampleable for every built-in space:

  * Fubini-Study / products: B(x, x) is constant, so the proposal is the base
    measure itself (radial CDF t / (1 + t) per factor);
  * Ginibre: a uniform mixture over j < N of Gamma(j+1) squared radii with a
    uniform angle.

Since g_i <= B pointwise, acceptance g_i(x) / B(x, x) needs no estimated
envelope, and the expected acceptance rate at step i is (N - i) / N.  A stall
guard still errors out after a proposal budget is exhausted.

Weighted sampler.  Configurations under an extra weight are generated by
Metropolis-Hastings with single-site Gaussian moves in chart coordinates.
The chain targets the chart-Lebesgue density, so acceptance ratios include
the base-density factor at the moved site along with the determinant and
weight terms.  Coincident points get log-density -inf and are never accepted.

All randomness derives from one integer seed through counter-based Philox
streams; replicas use disjoint spawn keys, so runs are reproducible and
parallelizable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import ModelSpace, _as_points

__all__ = [
    "RejectionStallError",
    "Configuration",
    "McmcConfig",
    "McmcRun",
    "rng_stream",
    "log_density",
    "configuration_from_json",
    "sample_dpp",
    "sample_dpp_many",
    "sample_weighted",
    "DiscreteProjectionDpp",
    "discrete_projection_from_space",
]


class RejectionStallError(RuntimeError):
    """Rejection sampler exhausted its proposal budget."""


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for (seed, stream key); disjoint keys never collide."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class Configuration:
    """One sampled N-point configuration on the chart."""

    points: np.ndarray          # (N, dim) complex
    log_density: float          # log |det M|^2 - sum_j (psi + k psi')(x_j), wrt mu^N
    seed: int | None
    origin: str                 # "exact" | "mcmc"
    mcmc_step: int | None = None

    def to_json_dict(self) -> dict:
        pts = []
        for row in self.points:
            out: list[float] = []
            for c in row:
                out.extend((float(c.real), float(c.imag)))
            pts.append(out)
        return {
            "points": pts,
            "log_density": self.log_density,
            "origin": self.origin,
            "mcmc_step": self.mcmc_step,
        }


def configuration_from_json(entry: dict, dim: int, seed=None) -> Configuration:
    pts = np.array(
        [[row[2 * i] + 1j * row[2 * i + 1] for i in range(dim)] for row in entry["points"]],
        dtype=complex,
    ).reshape(-1, dim)
    return Configuration(
        points=pts,
        log_density=float(entry["log_density"]),
        seed=seed,
        origin=entry.get("origin", "exact"),
        mcmc_step=entry.get("mcmc_step"),
    )


def _weight_values(fn, Z: np.ndarray) -> np.ndarray:
    if fn is None:
        return np.zeros(Z.shape[0])
    vals = fn.evaluate(Z) if hasattr(fn, "evaluate") else fn(Z)
    return np.asarray(vals, dtype=float)


def log_density(
    space: ModelSpace,
    points,
    psi=None,
    psi_prime=None,
    k_scale: float | None = None,
) -> float:
    """Unnormalized Gibbs log-density of a configuration against mu^N.

    log |det M|^2 with M_ij = v_i(x_j), minus sum_j (psi + k psi')(x_j).
    Returns -inf for coincident points (singular M).
    """
    Z = _as_points(points, space.dim)
    if Z.shape[0] != space.rank:
        raise ValueError(f"configuration must have {space.rank} points, got {Z.shape[0]}")
    V = space.section_matrix(Z)  # rows v(x_j); det M = det V^T = det V
    sign, logabs = np.linalg.slogdet(V)
    if sign == 0 or not np.isfinite(logabs):
        return float("-inf")
    k = float(space.power if k_scale is None else k_scale)
    pen = _weight_values(psi, Z) + k * _weight_values(psi_prime, Z)
    return float(2.0 * logabs - pen.sum())


# ---------------------------------------------------------------------------
# exact projection sampler


def _propose_intensity(space: ModelSpace, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` points from the one-point intensity B(x, x) dmu / N."""
    cols = []
    for i in range(space.dim):
        if space.kind == "ginibre":
            j = rng.integers(0, space.rank, size=size)
            t = rng.gamma(shape=j + 1.0)
        else:
            u = rng.random(size)
            t = u / (1.0 - u)
        theta = rng.random(size) * (2.0 * math.pi)
        cols.append(np.sqrt(t) * np.exp(1j * theta))
    return np.stack(cols, axis=1)


def sample_dpp(
    space: ModelSpace,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    stream: tuple[int, ...] = (),
    max_proposals: int = 1_000_000,
) -> Configuration:
    """One exact draw of the rank-N projection process.

    The orthocomplement of the accepted feature vectors is tracked as a
    matrix W with orthonormal columns, so the residual intensity is
    g_i(x) = |W^H v(x)|^2 and each acceptance shrinks W by one Householder
    reflection.  det[B(x_a, x_b)] telescopes as prod_i g_i(x_i), which gives
    the emitted log_density directly.
    """
    if rng is None:
        if seed is None:
            raise ValueError("sample_dpp needs a seed or an explicit generator")
        rng = rng_stream(seed, *stream)
    N = space.rank
    W = np.eye(N, dtype=complex)                 # orthocomplement basis, (N, N - i)
    pts = np.zeros((N, space.dim), dtype=complex)
    log_det = 0.0

    for i in range(N):
        proposals = 0
        csize = 16
        while True:
            if proposals >= max_proposals:
                raise RejectionStallError(
                    f"no acceptance after {proposals} proposals at point {i + 1}/{N}; "
                    "the residual intensity envelope looks wrong for this space"
                )
            Zc = _propose_intensity(space, rng, csize)
            U = rng.random(csize)
            Vc = space.section_matrix(Zc)            # (c, N)
            b = np.einsum("ci,ci->c", Vc, Vc.conj()).real
            P = Vc @ W.conj()                        # (c, N - i): W^H v per row
            g = np.einsum("cj,cj->c", P, P.conj()).real
            np.clip(g, 0.0, b, out=g)
            ok = (U * b <= g) & (g > 0.0)
            proposals += csize
            hit = int(np.argmax(ok)) if ok.any() else -1
            if hit >= 0:
                pts[i] = Zc[hit]
                log_det += math.log(g[hit])
                # Householder on coefficients: rotate W so its first column
                # carries v's component, then drop that column.
                u = P[hit]                           # = W^H v(x)
                h = u / np.linalg.norm(u)
                phase = h[0] / abs(h[0]) if abs(h[0]) > 0.0 else 1.0
                v = h.copy()
                v[0] += phase
                v /= np.linalg.norm(v)
                W = (W - 2.0 * np.outer(W @ v, v.conj()))[:, 1:]
                break
            csize = min(csize * 2, 1024)

    return Configuration(
        points=pts,
        log_density=log_det,
        seed=seed,
        origin="exact",
    )


def sample_dpp_many(
    space: ModelSpace, reps: int, seed: int, stream_base: tuple[int, ...] = ()
) -> list[Configuration]:
    """reps independent exact draws on disjoint Philox streams."""
    return [
        sample_dpp(space, seed=seed, stream=stream_base + (r,)) for r in range(reps)
    ]


# ---------------------------------------------------------------------------
# weighted sampler (Metropolis-Hastings)


@dataclass(frozen=True)
class McmcConfig:
    """Chain length and proposal parameters for single-site moves."""

    steps: int
    burn_in: int = 0
    thin: int = 1
    proposal_scale: float = 0.5

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if not (0 <= self.burn_in < self.steps):
            raise ValueError("burn_in must lie in [0, steps)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (self.proposal_scale > 0):
            raise ValueError("proposal_scale must be positive")


@dataclass
class McmcRun:
    """Output of the weighted sampler with chain diagnostics."""

    configurations: list[Configuration]
    acceptance_rate: float
    warnings: list[str] = field(default_factory=list)


def sample_weighted(
    space: ModelSpace,
    config: McmcConfig,
    psi=None,
    psi_prime=None,
    k_scale: float | None = None,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    stream: tuple[int, ...] = (),
) -> McmcRun:
    """Metropolis-Hastings chain for the psi/psi'-weighted process.

    Single-site Gaussian proposals in chart coordinates (standard deviation
    proposal_scale per real component), initialized from one exact draw of
    the unweighted process.  Collected configurations carry the mu^N Gibbs
    log-density and their step index.
    """
    if rng is None:
        if seed is None:
            raise ValueError("sample_weighted needs a seed or an explicit generator")
        rng = rng_stream(seed, *stream)
    N, n = space.rank, space.dim
    k = float(space.power if k_scale is None else k_scale)

    start = sample_dpp(space, rng=rng, seed=seed)
    X = start.points.copy()
    V = space.section_matrix(X)

    def site_pen(Z_row: np.ndarray) -> float:
        row = Z_row[None, :]
        return float(
            _weight_values(psi, row)[0]
            + k * _weight_values(psi_prime, row)[0]
            - np.log(space.base_density(row)[0])
        )

    def slog(Vm: np.ndarray) -> float:
        sign, la = np.linalg.slogdet(Vm)
        return float(2.0 * la) if sign != 0 and np.isfinite(la) else float("-inf")

    cur_logdet2 = slog(V)
    cur_pen = np.array([site_pen(X[j]) for j in range(N)])
    accepted = 0
    out: list[Configuration] = []
    sigma = config.proposal_scale

    for step in range(config.steps):
        j = step % N
        zj = X[j] + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        old_row = V[j].copy()
        V[j] = space.section_matrix(zj[None, :])[0]
        new_logdet2 = slog(V)
        new_pen_j = site_pen(zj)
        delta = (new_logdet2 - cur_logdet2) - (new_pen_j - cur_pen[j])
        if delta >= 0.0 or (delta > -np.inf and math.log(max(rng.random(), 1e-300)) < delta):
            X[j] = zj
            cur_logdet2 = new_logdet2
            cur_pen[j] = new_pen_j
            accepted += 1
        else:
            V[j] = old_row
        if step >= config.burn_in and (step - config.burn_in) % config.thin == 0:
            mu_pen = cur_pen.sum() + float(np.log(space.base_density(X)).sum())
            out.append(
                Configuration(
                    points=X.copy(),
                    log_density=cur_logdet2 - mu_pen,
                    seed=seed,
                    origin="mcmc",
                    mcmc_step=step,
                )
            )

    rate = accepted / config.steps
    warnings = []
    if not (0.05 <= rate <= 0.9):
        warnings.append(
            f"acceptance rate {rate:.3f} outside [0.05, 0.90]; "
            "adjust proposal_scale"
        )
    return McmcRun(configurations=out, acceptance_rate=rate, warnings=warnings)


# ---------------------------------------------------------------------------
# discrete oracle


class DiscreteProjectionDpp:
    """Projection determinantal process on a finite ground set.

    The kernel must be Hermitian with eigenvalues in {0, 1} up to 1e-8.
    Subset inclusion probabilities are det K_S, and sampling follows the
    same sequential conditional scheme as the continuous sampler.
    """

    def __init__(self, K: np.ndarray, atol: float = 1e-8):
        K = np.asarray(K, dtype=complex)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("kernel must be a square matrix")
        herm = float(np.max(np.abs(K - K.conj().T), initial=0.0))
        if herm > atol:
            raise ValueError(f"kernel is not Hermitian (max asymmetry {herm:.2e})")
        K = 0.5 * (K + K.conj().T)
        eigs, vecs = np.linalg.eigh(K)
        if eigs.min() < -atol or eigs.max() > 1.0 + atol:
            raise ValueError(
                f"spectrum outside [-{atol:.0e}, 1+{atol:.0e}]: "
                f"[{eigs.min():.3e}, {eigs.max():.3e}]"
            )
        dist = np.minimum(np.abs(eigs), np.abs(eigs - 1.0))
        if dist.max() > atol:
            raise ValueError(
                f"kernel is not a projection: eigenvalue {eigs[int(np.argmax(dist))]:.6f}"
            )
        self.K = K
        self.size = K.shape[0]
        self.eigenvectors = vecs[:, eigs > 0.5]  # (M, r), orthonormal columns
        self.rank = self.eigenvectors.shape[1]

    def inclusion_probability(self, subset) -> float:
        S = list(subset)
        if len(S) == 0:
            return 1.0
        sub = self.K[np.ix_(S, S)]
        return float(np.linalg.det(sub).real)

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        """Exact draw: a subset of size == rank."""
        W = self.eigenvectors.copy()
        chosen: list[int] = []
        for step in range(self.rank):
            p = np.einsum("mr,mr->m", W, W.conj()).real
            p = np.clip(p, 0.0, None)
            total = p.sum()
            idx = int(rng.choice(self.size, p=p / total))
            chosen.append(idx)
            e = W[idx] / np.linalg.norm(W[idx])
            W = W - np.outer(W @ e.conj(), e)
            W[idx] = 0.0
        return tuple(sorted(chosen))


def discrete_projection_from_space(
    space: ModelSpace, radial: int = 10, angular: int = 6
) -> tuple[np.ndarray, np.ndarray]:
    """Ground set and projection kernel built from a coarse quadrature grid.

    Returns (nodes, K) where K = Q Q^H and Q holds the weighted section
    values orthonormalized over the grid; the ground set has
    radial * angular points per factor.
    """
    from .quadrature import build_grid

    grid = build_grid(space, radial=radial, angular=angular)
    V = space.section_matrix(grid.nodes)
    c = grid.weights * grid.density
    Phi = np.sqrt(c)[:, None] * V
    A = Phi.conj().T @ Phi
    eigs, U = np.linalg.eigh(0.5 * (A + A.conj().T))
    if eigs.min() <= 1e-12 * eigs.max():
        raise ValueError("ground grid too coarse to resolve the rank")
    inv_sqrt = (U * (1.0 / np.sqrt(eigs))[None, :]) @ U.conj().T
    Q = Phi @ inv_sqrt
    K = Q @ Q.conj().T
    return grid.nodes, K

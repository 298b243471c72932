"""Partition functions, cumulant paths, and Monge-Ampere energies.

Hand-derived references for the Fubini-Study chart with f = 0.2/(1+r2):
the per-k Hessian of phi - s f is (1+t)^{-3} [(1+0.2 s) + t (1-0.2 s)]
with t = r^2, which integrates to total mass 1 for every s, gives a disk
mass of 0.525 at s = 0.5 inside r < 1, and gives
int f dmu_eq(s) = 0.1 + s/150, so the limit functional is 0.1 + 1/300.
"""

import math

import numpy as np
import pytest

from bergdpp.energy import (
    GramPath,
    PositivityError,
    equilibrium_mass,
    lambda_k,
    lambda_limit,
    lambda_report,
    mabuchi,
    mc_partition_ratio,
    monge_ampere_density,
    partition_function,
)
from bergdpp.exprs import parse_weight
from bergdpp.quadrature import build_grid, gram
from bergdpp.sampler import sample_dpp_many
from bergdpp.spaces import make_fubini_study, make_ginibre, make_product
from bergdpp.stats import Region

F_EXPR = parse_weight("0.2/(1+r2)")
S_EXPR = parse_weight("r2/(1+r2)")


# ---------------------------------------------------------------------------
# partition function


@pytest.mark.parametrize(
    "space,factorial",
    [(make_fubini_study(3), 24.0), (make_ginibre(4), 24.0), (make_product((1, 1), 1), 24.0)],
    ids=["fs3", "gin4", "prod11"],
)
def test_partition_equals_factorial_without_weight(space, factorial):
    pv = partition_function(space)
    assert abs(pv.value - factorial) / factorial < 1e-10
    assert pv.rank == space.rank
    assert pv.log_value == pytest.approx(math.log(factorial), abs=1e-10)
    assert abs(pv.logdet_gram) < 1e-9


def test_partition_ratio_is_weighted_gram_det():
    space = make_fubini_study(3)
    grid = build_grid(space)
    pv0 = partition_function(space, grid=grid)
    pvw = partition_function(space, psi=S_EXPR, grid=grid)
    det = math.exp(gram(space, grid, psi=S_EXPR).logdet)
    assert pvw.value / pv0.value == pytest.approx(det, rel=1e-10)


def test_mc_partition_ratio_matches_quadrature():
    # Monte Carlo E[e^{-sum psi}] vs det of the weighted Gram, fixed seed
    space = make_fubini_study(3)
    det = math.exp(gram(space, build_grid(space), psi=S_EXPR).logdet)
    confs = sample_dpp_many(space, reps=3000, seed=63)
    mean, se = mc_partition_ratio(confs, S_EXPR)
    assert se > 0.0
    assert abs(mean - det) < 3.0 * se


def test_mc_partition_ratio_needs_samples():
    with pytest.raises(ValueError):
        mc_partition_ratio([], S_EXPR)


# ---------------------------------------------------------------------------
# cumulant generating function along a weight path


def test_cgf_vanishes_at_origin():
    path = GramPath(make_fubini_study(4), S_EXPR)
    assert path.cgf(0.0) == 0.0


def test_cgf_derivative_routes_agree():
    path = GramPath(make_fubini_study(6), S_EXPR)
    for t in (0.0, 0.5):
        chk = path.derivative_check(t)
        assert chk["rel_gap"] < 1e-6


def test_cgf_initial_slope_closed_form():
    # K'(0) = -int psi B dmu = -(k+1) int_0^1 s ds = -(k+1)/2
    k = 6
    path = GramPath(make_fubini_study(k), S_EXPR)
    assert path.bergman_derivative(0.0) == pytest.approx(-(k + 1) / 2.0, abs=1e-10)


def test_cgf_is_convex():
    path = GramPath(make_fubini_study(4), S_EXPR)
    ts = np.linspace(-0.5, 1.5, 5)
    vals = [path.cgf(t) for t in ts]
    h = ts[1] - ts[0]
    second = np.diff(vals, 2) / h**2
    assert np.all(second > 0.0)


def test_gram_path_with_base_weight():
    base = parse_weight("0.3*r2/(1+r2)")
    path = GramPath(make_fubini_study(4), S_EXPR, base_psi=base)
    # base weight shifts the anchor but cgf still vanishes at 0
    assert path.cgf(0.0) == 0.0
    assert path.logdet(0.0) != 0.0


# ---------------------------------------------------------------------------
# Monge-Ampere density


def test_fs_equilibrium_density_is_base_measure():
    space = make_fubini_study(5)
    pts = np.array([[0.3 + 0.4j], [1.0 - 1.0j], [2.0 + 0j]])
    ma = monge_ampere_density(space, pts)
    assert np.allclose(ma, space.base_density(pts), rtol=1e-12)


def test_product_equilibrium_density_scale():
    # det of the diagonal Hessian brings n! prod m_i against the base measure
    space = make_product((1, 2), 3)
    pts = np.array([[0.3 + 0.1j, 0.5 - 0.5j]])
    ma = monge_ampere_density(space, pts)
    want = 2.0 * 1.0 * 2.0 * space.base_density(pts)
    assert np.allclose(ma, want, rtol=1e-12)


def test_shifted_density_closed_form():
    # phi - 0.5 f with f = 0.2/(1+t): density (1/pi)(1+t)^{-3}(1.1 + 0.9 t)
    space = make_fubini_study(3)
    t = 0.7
    pts = np.array([[math.sqrt(t) + 0j]])
    ma = monge_ampere_density(space, pts, shifts=((-0.5, F_EXPR),))
    want = (1.1 + 0.9 * t) / (math.pi * (1.0 + t) ** 3)
    assert ma[0] == pytest.approx(want, rel=1e-12)


def test_losing_positivity_raises():
    space = make_fubini_study(3)
    pts = np.array([[2.0 + 0j]])
    with pytest.raises(PositivityError, match="Kahler cone"):
        monge_ampere_density(space, pts, shifts=((-2.0, parse_weight("log(1+r2)")),))


# ---------------------------------------------------------------------------
# equilibrium masses


def test_fs_equilibrium_masses():
    space = make_fubini_study(4)
    assert equilibrium_mass(space) == pytest.approx(1.0, abs=1e-12)
    assert equilibrium_mass(space, Region.disk(1.0)) == pytest.approx(0.5, abs=1e-12)
    assert equilibrium_mass(space, Region.annulus(1.0, 3.0)) == pytest.approx(
        0.9 - 0.5, abs=1e-12
    )


def test_product_equilibrium_mass_factorizes():
    space = make_product((1, 2), 2)
    reg = Region(bounds=((0.0, 1.0), (0.0, math.inf)))
    assert equilibrium_mass(space, reg) == pytest.approx(0.5, abs=1e-10)


def test_shifted_equilibrium_mass_closed_form():
    space = make_fubini_study(3)
    got = equilibrium_mass(space, Region.disk(1.0), shifts=((-0.5, F_EXPR),))
    assert got == pytest.approx(0.525, abs=1e-12)


def test_ginibre_equilibrium_uniform_disk():
    space = make_ginibre(4)
    assert equilibrium_mass(space, Region.disk(1.0)) == pytest.approx(0.25)
    assert equilibrium_mass(space, Region.annulus(1.0, 3.0)) == pytest.approx(0.75)
    assert equilibrium_mass(space) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        equilibrium_mass(space, Region.disk(1.0), shifts=((0.1, F_EXPR),))


# ---------------------------------------------------------------------------
# Mabuchi functional


def test_mabuchi_constant_direction_is_identity():
    space = make_fubini_study(4)
    c = 0.37
    got = mabuchi(space, direction=parse_weight(f"{c}"))
    assert got == pytest.approx(c, abs=1e-12)
    # scale folds into the direction linearly for constants
    assert mabuchi(space, direction=parse_weight(f"{c}"), scale=2.0) == pytest.approx(2 * c)


def test_mabuchi_zero_direction():
    assert mabuchi(make_fubini_study(3)) == 0.0
    assert mabuchi(make_fubini_study(3), direction=F_EXPR, scale=0.0) == 0.0


def test_mabuchi_closed_form_value():
    # L(phi, -f) = -int_0^1 (0.1 + s/150) ds = -(0.1 + 1/300)
    space = make_fubini_study(3)
    got = mabuchi(space, direction=F_EXPR, scale=-1.0, s_nodes=24)
    assert got == pytest.approx(-(0.1 + 1.0 / 300.0), abs=1e-9)


def test_mabuchi_cocycle_identity():
    # L(phi, u + v) = L(phi, u) + L(phi + u, v)
    space = make_fubini_study(3)
    u = parse_weight("0.1*r2/(1+r2)")
    v = parse_weight("0.2/(1+r2)")
    uv = parse_weight("0.1*r2/(1+r2) + 0.2/(1+r2)")
    lhs = mabuchi(space, direction=uv, s_nodes=32)
    rhs = mabuchi(space, direction=u, s_nodes=32) + mabuchi(
        space, psi_prime=u, direction=v, s_nodes=32
    )
    assert abs(lhs - rhs) < 1e-6


def test_mabuchi_quadrature_insensitive_to_s_nodes():
    space = make_fubini_study(3)
    a = mabuchi(space, direction=F_EXPR, s_nodes=16)
    b = mabuchi(space, direction=F_EXPR, s_nodes=32)
    assert abs(a - b) < 1e-12


def test_mabuchi_guards():
    with pytest.raises(ValueError):
        mabuchi(make_ginibre(3), direction=F_EXPR)
    with pytest.raises(ValueError):
        mabuchi(make_fubini_study(3), direction=F_EXPR, s_nodes=8)
    with pytest.raises(PositivityError, match="path parameter"):
        mabuchi(make_fubini_study(3), direction=parse_weight("3*log(1+r2)"), scale=-1.0)


# ---------------------------------------------------------------------------
# rescaled cumulant functional


def test_lambda_k_constant_direction_exact():
    space = make_fubini_study(5)
    got = lambda_k(space, parse_weight("0.37"))
    assert got == pytest.approx(0.37, abs=1e-10)


def test_lambda_limit_closed_form():
    space = make_fubini_study(3)
    got = lambda_limit(space, F_EXPR)
    assert got == pytest.approx(0.1 + 1.0 / 300.0, abs=1e-9)


def test_lambda_report_converges():
    spaces = [(10, make_fubini_study(10)), (20, make_fubini_study(20))]
    report = lambda_report(spaces, F_EXPR, psi=None, psi_prime=None)
    gaps = [row.gap for row in report.rows]
    assert gaps[1] < gaps[0]
    assert report.target == pytest.approx(0.1 + 1.0 / 300.0, abs=1e-9)
    d = report.to_json_dict()
    assert len(d["rows"]) == 2

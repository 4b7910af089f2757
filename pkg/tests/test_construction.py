import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovlab.construction import (
    ConstructionParams,
    build_algebra_pair,
    build_initial_data,
    dense_lattice,
    initial_norm_report,
    norm_from_table,
)
from besovlab.fields import ResolutionError
from besovlab.lp import DEFAULT_BANK, BesovParams, besov_norm, dense_block_table
from besovlab.sparse import Atom, SparseBumpField, sparse_block_table


# -- parameters ------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"alpha": 0.3},
        {"alpha": 1.0},
        {"q": 1.0},
        {"p": 0.5},
        {"d": 1},
        {"N": 8},
        {"N": 2, "strict": False},
        {"N": 10, "strict": False, "lam_override": -1.0},
    ],
)
def test_params_rejected(kw):
    with pytest.raises(ValueError):
        ConstructionParams(**kw)


def test_params_derived_quantities():
    prm = ConstructionParams(N=100)
    assert prm.lam == pytest.approx(1 / math.log(math.log(100)))
    assert list(prm.j_window) == list(range(50, 81))
    assert prm.T == pytest.approx(2.0**prm.log2_T, rel=1e-12)
    big = prm.with_N(4000)
    assert big.T == 0.0 and math.isfinite(big.log2_T)
    d = prm.to_dict()
    assert d["j_window"] == [50, 80] and d["lambda"] == prm.lam


def test_window_rounding():
    prm = ConstructionParams(N=17)
    assert min(prm.j_window) == 9 and max(prm.j_window) == 13


def test_lam_override_small_N():
    prm = ConstructionParams(N=5, strict=False, lam_override=0.5)
    assert prm.lam == 0.5 and list(prm.j_window) == [3, 4]


# -- data ------------------------------------------------------------------------


def test_sparse_structure():
    prm = ConstructionParams(N=40)
    data = build_initial_data(prm)
    assert [a.j for a in data.u0.atoms] == [40]
    assert data.u0.atoms[0].log2_scale == 40 - 80
    assert data.u0.atoms[0].amplitude == pytest.approx(prm.lam**5)
    assert [a.j for a in data.b0.atoms] == list(prm.j_window)
    for a in data.b0.atoms:
        assert a.amplitude == pytest.approx(a.j**-prm.alpha)
        assert a.log2_scale == -2 * a.j
    assert data.u0.profile.spec.long_axis == 1 and data.b0.profile.spec.long_axis == 0


@pytest.mark.parametrize("d", [2, 3])
def test_divergence_free_spectra(d):
    prm = ConstructionParams(d=d, N=6, strict=False)
    data = build_initial_data(prm)
    rng = np.random.default_rng(1)
    for fld in (data.u0, data.b0):
        lo, hi = zip(*fld.axis_support())
        xi = [rng.uniform(a, b, 4000) for a, b in zip(lo, hi)]
        v = fld.spectrum(xi)
        assert v.shape[0] == d
        div = sum(x * c for x, c in zip(xi, v))
        assert np.abs(div).max() <= 1e-12 * np.abs(v).max()


def test_dense_hermitian_data_is_real():
    prm = ConstructionParams(N=5, strict=False)
    data = build_initial_data(prm, "dense", hermitian=True)
    for fld in (data.u0, data.b0):
        assert fld.hermitian_residual() < 1e-14
        assert fld.divergence_residual() < 1e-12
        vals = fld.to_physical()
        assert np.abs(vals.imag).max() <= 1e-12 * np.abs(vals).max()


def test_dense_lattice_too_coarse():
    prm = ConstructionParams(N=5, strict=False)
    with pytest.raises(ResolutionError):
        build_initial_data(prm, "dense", shape=(32, 32), period=(2 * np.pi, 2 * np.pi))


def test_dense_lattice_resolves_thin_side():
    prm = ConstructionParams(N=6, strict=False)
    data = build_initial_data(prm)
    n, L = dense_lattice([data.u0, data.b0])
    width = min(data.b0.profile.spec.widths()) * 2 ** min(prm.j_window)
    assert width / (2 * np.pi / L) >= 32
    assert np.pi * n / L > data.u0.radial_support()[1]


def test_zero_amplitude():
    prm = ConstructionParams(N=5, strict=False)
    data = build_initial_data(prm, "dense", amplitude=0.0)
    assert np.all(data.u0.coeffs == 0) and np.all(data.b0.coeffs == 0)


# -- norms -----------------------------------------------------------------------


def test_norm_report_shape():
    rep = initial_norm_report(build_initial_data(ConstructionParams(N=64)))
    assert len(rep["quantities"]) == 8
    for row in rep["quantities"]:
        assert set(row) == {"field", "s", "p", "q", "log2_value", "value", "log2_bound", "log2_ratio"}
        assert row["log2_ratio"] == pytest.approx(row["log2_value"] - row["log2_bound"])


@pytest.mark.parametrize("N", [32, 256, 2048])
def test_norm_report_within_bounds(N):
    """Every quantity stays below its bound up to an N-independent constant."""
    rep = initial_norm_report(build_initial_data(ConstructionParams(N=N)))
    for row in rep["quantities"]:
        assert row["log2_ratio"] < 1.0, row


def test_higher_regularity_blows_up():
    rep = initial_norm_report(build_initial_data(ConstructionParams(N=256)))
    u = {row["s"]: row["log2_value"] for row in rep["quantities"] if row["field"] == "u0" and row["q"] == 1.0}
    assert u[2.0] - u[1.0] == pytest.approx(256, abs=2)
    assert u[1.0] - u[0.0] == pytest.approx(256, abs=2)


def test_small_N_sparse_against_dense():
    prm = ConstructionParams(N=5, strict=False)
    data = build_initial_data(prm, hermitian=True)
    for fld in (data.u0, data.b0):
        n, L = dense_lattice([fld])
        dense = fld.to_dense((n, n), (L, L))
        td = dense_block_table(dense, [2.0])
        ts = sparse_block_table(fld, [2.0], DEFAULT_BANK)
        for s in (0.0, 1.0):
            a = norm_from_table(ts, s, 2.0, 2.0)
            b = besov_norm(dense, BesovParams(s, 2.0, 2.0)).log2_total
            assert abs(a - b) < 0.01
        assert set(td) == set(ts)


def test_algebra_pair():
    prm = ConstructionParams(N=64)
    f, g = build_algebra_pair(prm)
    assert isinstance(f, SparseBumpField) and f.multipliers == ("one",)
    assert [a.j for a in g.atoms] == [64]
    assert g.atoms[0].amplitude == prm.lam and g.atoms[0].log2_scale == -128
    # f stays O(1) in B^{d/p}_{p,q}; g in B^{d/p}_{p,q} is lam * ||psi||
    ff = besov_norm(f, BesovParams(1.0, 2.0, 2.0)).log2_total
    assert ff < 1


@settings(max_examples=10, deadline=None)
@given(st.integers(20, 4000))
def test_b0_interior_blocks_scale_invariant(N):
    """With the j^-alpha weights removed, interior b0 blocks at s = d/p are identical."""
    prm = ConstructionParams(N=N)
    b0 = build_initial_data(prm).b0
    flat = SparseBumpField(b0.profile, [Atom(a.j, 1.0, a.log2_scale) for a in b0.atoms], b0.multipliers)
    table = sparse_block_table(flat, [2.0], DEFAULT_BANK)
    js = list(prm.j_window)[1:-1]
    c = [table[j][2.0] + j for j in js]
    assert max(c) - min(c) < 1e-9


def test_psi_plateau_values():
    prm = ConstructionParams(N=64)
    psi = build_initial_data(prm).u0.profile
    lam = prm.lam
    assert psi([1.5 * lam, 1.5]) == 1.0
    assert psi([1.5 * lam, 3.0]) == 0.0


def test_u0_top_regularity_bound():
    rep = initial_norm_report(build_initial_data(ConstructionParams(N=1024)))
    row = next(r for r in rep["quantities"] if r["field"] == "u0" and r["s"] == 1.0 and r["q"] == 1.0)
    assert row["log2_value"] - 1024 <= 0.0


def test_product_pair_norm_bounds():
    """||f^N|| N^(alpha - 1/q) and ||g^N|| ln ln N stay bounded and drift down."""
    Ns = [2**k for k in range(8, 17, 2)]
    rf, rg = [], []
    for N in Ns:
        prm = ConstructionParams(N=N)
        f, g = build_algebra_pair(prm)
        rf.append(besov_norm(f, BesovParams(1.0, 2.0, 2.0)).total * N ** (prm.alpha - 0.5))
        rg.append(besov_norm(g, BesovParams(1.0, 2.0, 2.0)).total * math.log(math.log(N)))
    for r in (rf, rg):
        assert all(b <= a for a, b in zip(r, r[1:]))


def test_product_pair_real_at_small_N():
    prm = ConstructionParams(N=6, strict=False)
    f, g = build_algebra_pair(prm, hermitian=True)
    for fld in (f, g):
        n, L = dense_lattice([fld])
        vals = fld.to_dense((n, n), (L, L)).to_physical()
        assert np.abs(vals.imag).max() <= 1e-12 * np.abs(vals).max()

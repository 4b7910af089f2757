import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovlab.bumps import MULTIPLIERS, BumpProfile, CuboidSpec, build_bump_profile, companion_cutoff
from besovlab.construction import dense_lattice
from besovlab.lp import DEFAULT_BANK, BesovParams, besov_norm, dense_block_table
from besovlab.sparse import Atom, SparseBumpField, sparse_block_table

PS = [1.0, 2.0, math.inf]


def _dense_log2(fld, ps):
    n, L = dense_lattice([fld])
    dense = fld.to_dense((n, n), (L, L))
    table = dense_block_table(dense, ps)
    return {j: {p: math.log2(v) if v > 0 else -math.inf for p, v in row.items()} for j, row in table.items()}


def _compare(sparse, dense, tol):
    assert set(sparse) == set(dense)
    for j in sparse:
        for p in sparse[j]:
            a, b = sparse[j][p], dense[j][p]
            if b == -math.inf:
                assert a == -math.inf
                continue
            assert abs(2.0 ** (a - b) - 1) < tol, (j, p, a, b)


# -- bumps -----------------------------------------------------------------------


def test_cuboid_validation():
    with pytest.raises(ValueError):
        CuboidSpec(((1, 2),), ((0.5, 1.5),), 0)
    with pytest.raises(ValueError):
        CuboidSpec(((1, 2), (1, 2)), ((1.2, 1.8),), 0)
    with pytest.raises(ValueError):
        CuboidSpec(((1, 2),), ((1.2, 1.8),), 1)


def test_bump_plateau_and_support():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.3, 1))
    assert prof([0.4, 1.5]) == 1.0
    assert prof([0.31, 1.5]) < 1.0
    x = np.linspace(-1, 3, 401)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = prof([X, Y])
    assert v.min() >= 0 and v.max() <= 1
    outside = (X < 0.3) | (X > 0.6) | (Y < 1) | (Y > 2)
    assert np.all(v[outside] == 0)


def test_hermitian_profile_is_even():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0), hermitian=True)
    xi = [np.array([1.3, -1.3]), np.array([0.7, -0.7])]
    v = prof(xi)
    assert v[0] == v[1] == 0.5
    assert len(prof.support_boxes()) == 2


def test_profile_dict_roundtrip():
    prof = build_bump_profile(CuboidSpec.standard(3, 0.4, 1), 9, "exp", True, "x")
    assert BumpProfile.from_dict(prof.to_dict()) == prof


def test_companion_cutoff_covers_psi():
    lam = 0.45
    psi = build_bump_profile(CuboidSpec.standard(2, lam, 1))
    tilde = companion_cutoff(2, lam)
    x = np.linspace(0, 4, 301)
    X, Y = np.meshgrid(x, x, indexing="ij")
    m = psi([X, Y]) > 0
    assert np.all(tilde([X, Y])[m] == 1.0)


def test_neg_ratio_divergence_free():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    f = SparseBumpField(prof, [Atom(3)], ("neg_ratio", "one"))
    x = np.linspace(0, 20, 81)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = f.spectrum([X, Y])
    assert np.abs(X * v[0] + Y * v[1]).max() < 1e-12
    assert set(MULTIPLIERS) == {"one", "neg_ratio", "zero"}


# -- sparse fields ---------------------------------------------------------------


def test_atoms_sorted_and_distinct():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    f = SparseBumpField(prof, [Atom(5), Atom(2)])
    assert [a.j for a in f.atoms] == [2, 5]
    with pytest.raises(ValueError):
        SparseBumpField(prof, [Atom(2), Atom(2)])
    with pytest.raises(ValueError):
        SparseBumpField(prof, [Atom(2)], ("bogus",))


def test_atom_log2_scale():
    a = Atom(4, -0.5, -60.0)
    assert a.value() == -0.5 * 2.0**-60
    assert a.log2_abs == pytest.approx(-61.0)


def test_spectrum_matches_dense_samples():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 1))
    f = SparseBumpField(prof, [Atom(2, 1.0), Atom(3, -2.0)])
    dense = f.to_dense((64, 64), (2 * np.pi, 2 * np.pi))
    k = dense.wavevectors()
    assert np.allclose(dense.coeffs, f.spectrum(k))


def test_json_roundtrip():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 1), name="psi_hat")
    f = SparseBumpField(prof, [Atom(2, 1.5, -3.0), Atom(4, -0.25)], ("neg_ratio", "one"), "u")
    import json

    data = json.loads(f.to_json())
    assert {"j", "lambda", "axis", "amplitude", "log2_scale", "profile"} <= set(data["atoms"][0])
    g = SparseBumpField.from_dict(data)
    assert g.atoms == f.atoms and g.profile == f.profile and g.multipliers == f.multipliers


@pytest.mark.parametrize("long_axis", [0, 1])
@pytest.mark.parametrize("lam", [0.4, 0.7])
def test_single_atom_sparse_matches_dense(long_axis, lam):
    prof = build_bump_profile(CuboidSpec.standard(2, lam, long_axis))
    f = SparseBumpField(prof, [Atom(4, 1.0, -8.0)])
    _compare(sparse_block_table(f, PS, DEFAULT_BANK), _dense_log2(f, PS), 0.01)


def test_multi_atom_vector_sparse_matches_dense():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0), hermitian=True)
    f = SparseBumpField(prof, [Atom(3, 1.0), Atom(4, -0.7, -2.0), Atom(5, 0.3)], ("neg_ratio", "one"))
    _compare(sparse_block_table(f, PS, DEFAULT_BANK), _dense_log2(f, PS), 0.01)


def test_nonhomogeneous_low_block():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    f = SparseBumpField(prof, [Atom(-1), Atom(0)])
    n, L = dense_lattice([f])
    dense = f.to_dense((n, n), (L, L))
    dt = dense_block_table(dense, PS, homogeneous=False)
    dt = {j: {p: math.log2(v) for p, v in row.items()} for j, row in dt.items() if all(v > 0 for v in row.values())}
    st_ = sparse_block_table(f, PS, DEFAULT_BANK, homogeneous=False)
    st_ = {j: row for j, row in st_.items() if j in dt}
    _compare(st_, dt, 0.01)
    assert -1 in st_


@settings(max_examples=10, deadline=None)
@given(st.integers(3, 12), st.integers(1, 40), st.sampled_from(PS))
def test_scale_covariance(j, shift, p):
    """Moving every atom up by `shift` multiplies block norms by 2^(shift d (1 - 1/p))."""
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    a = SparseBumpField(prof, [Atom(j), Atom(j + 2, 0.5)])
    b = SparseBumpField(prof, [Atom(j + shift), Atom(j + shift + 2, 0.5)])
    ta = sparse_block_table(a, [p], DEFAULT_BANK)
    tb = sparse_block_table(b, [p], DEFAULT_BANK)
    gain = shift * 2 * (1 - 1 / p)
    for k, row in ta.items():
        assert tb[k + shift][p] == pytest.approx(row[p] + gain, abs=1e-9)


def test_sparse_besov_norm_huge_scale():
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    f = SparseBumpField(prof, [Atom(2000, 1.0, -4000.0)])
    rep = besov_norm(f, BesovParams(1.0, 2.0, 2.0))
    assert math.isfinite(rep.log2_total)
    # s = d/p balances the amplitude, up to O(1) from the profile
    assert abs(rep.log2_total) < 5


def test_single_atom_spans_three_blocks():
    """A dilated cuboid bump straddles neighbouring annuli, so its norm is not a one-term sum."""
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    f = SparseBumpField(prof, [Atom(10)])
    rep = besov_norm(f, BesovParams(1.0, 2.0, 2.0))
    assert [j for j, _, _ in rep.per_block] == [9, 10, 11]
    w = np.array([x for _, _, x in rep.per_block])
    assert rep.total == pytest.approx(np.sqrt(np.sum(w**2)), rel=1e-12)
    assert rep.total > w.max() * (1 + 1e-3)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 60), st.sampled_from(PS), st.floats(-1, 3), st.sampled_from([1.0, 2.0, math.inf]))
def test_total_scale_covariance(j, p, s, q):
    """Dilating every atom j -> j+1 scales the total by 2^(s + d - d/p)."""
    prof = build_bump_profile(CuboidSpec.standard(2, 0.5, 0))
    a = SparseBumpField(prof, [Atom(j), Atom(j + 1, -0.3)])
    b = SparseBumpField(prof, [Atom(j + 1), Atom(j + 2, -0.3)])
    prm = BesovParams(s, p, q)
    gain = s + 2 - 2 / p
    assert besov_norm(b, prm).log2_total - besov_norm(a, prm).log2_total == pytest.approx(gain, abs=1e-9)

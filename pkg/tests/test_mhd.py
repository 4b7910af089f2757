import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovlab.construction import ConstructionParams, VectorInitialData
from besovlab.fields import SpectralField
from besovlab.mhd import (
    CFLViolation,
    MHDSolver,
    SimConfig,
    SimState,
    SimulationBlowup,
    VelocityInterpolant,
    advance_tracers,
    decomposition_report,
    leray_project,
    norm_timeseries,
    polygon_mesh_area,
    run,
    seed_grid,
    step,
    taylor_green,
)
from besovlab.picard import first_iterate_IB_field
from conftest import random_bandlimited

TWO_PI = 2 * np.pi
BOX = (TWO_PI, TWO_PI)


def _divfree(rng, n=32, kmax=6, amp=1.0):
    f = random_bandlimited(rng, (n, n), BOX, 0.5, kmax, components=2)
    f = leray_project(f)
    return f.scaled(amp / np.abs(f.to_physical()).max())


# -- projection and configuration --------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leray_idempotent_and_divergence_free(seed):
    rng = np.random.default_rng(seed)
    f = random_bandlimited(rng, (16, 16), BOX, 0.5, 7, components=2)
    p1 = leray_project(f)
    p2 = leray_project(p1)
    assert np.abs(p2.coeffs - p1.coeffs).max() <= 1e-13 * np.abs(p1.coeffs).max()
    assert p1.divergence_residual() < 1e-13


def test_leray_keeps_gradient_free_part():
    # a solenoidal mode is unchanged, a gradient mode is removed
    f = SpectralField.zeros((16, 16), BOX, components=2)
    f.coeffs[0, 0, 3] = 1.0  # (1, 0) e^{i 3 y}: divergence free
    f.coeffs[0, 2, 0] = 1.0  # (1, 0) e^{i 2 x}: pure gradient
    p = leray_project(f)
    assert p.coeffs[0, 0, 3] == 1.0 and abs(p.coeffs[0, 2, 0]) < 1e-15


@pytest.mark.parametrize("kw", [{"grid": (48, 64)}, {"dt": -1.0}, {"dealias": 0.4}, {"cfl_safety": 1.5}, {"integrator": "euler"}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_dealias_mask_strict():
    s = MHDSolver(SimConfig(grid=(32, 32)))
    ix = np.abs(np.fft.fftfreq(32, 1 / 32))
    kept = ix[s.mask[:, 0]]
    assert kept.max() < 32 / 3 and kept.max() == 10


def test_initial_state_rejects_truncated_data():
    cfg = SimConfig(grid=(32, 32))
    f = SpectralField.zeros((32, 32), BOX, components=2)
    f.coeffs[1, 14, 0] = f.coeffs[1, -14, 0] = 1.0
    with pytest.raises(ValueError):
        MHDSolver(cfg).initial_state(f, f)


# -- dynamics ----------------------------------------------------------------------


def test_taylor_green_viscous_decay():
    """Taylor-Green with b = 0 is an exact solution: u(t) = e^(-2 t) u(0)."""
    cfg = SimConfig(grid=(32, 32), t_end=0.5, dt=0.01)
    u0 = taylor_green((32, 32))
    b0 = SpectralField.zeros((32, 32), BOX, components=2, real=True)
    art = run(cfg, u0, b0)
    expected = math.exp(-1.0) * art.initial.u_hat
    assert np.abs(art.final.u_hat - expected).max() <= 1e-10 * np.abs(expected).max()
    assert max(art.energy_residuals) < 1e-6


def test_random_mhd_energy_balance(rng):
    u0, b0 = _divfree(rng), _divfree(rng)
    cfg = SimConfig(grid=(32, 32), t_end=0.05, dt=1e-3, checkpoints=4)
    art = run(cfg, u0, b0)
    assert max(art.energy_residuals) < 1e-6
    assert max(max(d) for d in art.divergence) < 1e-10
    s = art.solver
    assert s.energy(art.final) < s.energy(art.initial)


def test_energy_residual_shrinks_with_dt(rng):
    u0, b0 = _divfree(rng), _divfree(rng)
    res = []
    for dt in (2e-3, 1e-3):
        art = run(SimConfig(grid=(32, 32), t_end=0.02, dt=dt), u0, b0)
        res.append(max(art.energy_residuals))
    assert res[1] < res[0]


def test_linearized_matches_first_iterate(rng):
    u0 = _divfree(rng, 64, 14)
    b0 = _divfree(rng, 64, 6)
    T = 0.01
    art = run(SimConfig(grid=(64, 64), t_end=T, dt=T / 64, linearized=True), u0, b0)
    data = VectorInitialData(u0, b0, "dense", ConstructionParams(N=5, strict=False))
    ib = first_iterate_IB_field(data, T).to_physical().real
    got = art.solver.to_phys(art.final.b_hat - art.initial.b_hat)
    assert np.abs(got - ib).max() <= 1e-8 * np.abs(ib).max()


def test_cfl_violation_aborts(rng):
    u0 = _divfree(rng, amp=50.0)
    b0 = _divfree(rng)
    cfg = SimConfig(grid=(32, 32), t_end=0.1, dt=0.05)
    with pytest.raises(CFLViolation, match="max\\|u\\|"):
        run(cfg, u0, b0)


def test_nan_aborts():
    cfg = SimConfig(grid=(16, 16), dt=1e-3)
    s = MHDSolver(cfg)
    u = np.zeros((2, 16, 9), complex)
    u[0, 1, 0] = np.nan
    with pytest.raises(SimulationBlowup):
        s.step(SimState(u, np.zeros_like(u)), 1e-3)


def test_module_step_and_auto_dt(rng):
    cfg = SimConfig(grid=(32, 32), t_end=0.1)
    s = MHDSolver(cfg)
    st0 = s.initial_state(_divfree(rng), _divfree(rng))
    dt = s.auto_dt(st0, cfg.t_end)
    assert dt <= cfg.t_end / cfg.min_steps
    assert abs(cfg.t_end / dt - round(cfg.t_end / dt)) < 1e-9
    st1 = step(st0, cfg)
    assert st1.step_count == 1 and st1.t == pytest.approx(dt)


def test_zero_data_stays_zero():
    z = SpectralField.zeros((16, 16), BOX, components=2, real=True)
    art = run(SimConfig(grid=(16, 16), t_end=0.1), z, z)
    assert np.all(art.final.u_hat == 0) and np.all(art.final.b_hat == 0)


# -- tracers -----------------------------------------------------------------------


def test_uniform_flow_tracers():
    n = 16
    s = MHDSolver(SimConfig(grid=(n, n)))
    u = np.zeros((2, n, n // 2 + 1), complex)
    still = advance_tracers(seed_grid(4, 4, BOX), VelocityInterpolant.from_spectrum(s, u), 0.5)
    assert np.array_equal(still.positions, still.seed_positions)
    u[0, 0, 0] = 1.0 * s.volume
    interp = VelocityInterpolant.from_spectrum(s, u)
    cloud = seed_grid(4, 4, BOX)
    out = advance_tracers(cloud, interp, 0.5)
    assert np.allclose(out.positions - cloud.positions, [0.5, 0.0], atol=1e-13)
    far = advance_tracers(cloud, interp, 40.0)
    w = far.wrapped
    assert np.all((w >= 0) & (w < TWO_PI))


def test_single_mode_tracer_area():
    """Shear-free cellular flow u = (sin y, sin x) preserves the area of a seeded mesh."""
    n = 32
    s = MHDSolver(SimConfig(grid=(n, n)))
    x = np.arange(n) * TWO_PI / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = s.to_spec(np.stack([np.sin(Y), np.sin(X)]))
    interp = VelocityInterpolant.from_spectrum(s, u)
    cloud = seed_grid(32, 32, BOX, origin=(2.0, 1.0), extent=(1.5, 1.5))
    a0 = polygon_mesh_area(cloud.positions, cloud.shape)
    c = cloud
    for _ in range(100):
        c = advance_tracers(c, interp, 0.01)
    assert abs(polygon_mesh_area(c.positions, c.shape) / a0 - 1) < 1e-4


def test_interpolant_exact_at_modes(rng):
    n = 32
    s = MHDSolver(SimConfig(grid=(n, n)))
    f = _divfree(rng, n, 5)
    interp = VelocityInterpolant.from_spectrum(s, s.from_field(f))
    pts = rng.uniform(0, TWO_PI, (200, 2))
    k = f.wavevectors()
    phase = np.exp(1j * (np.multiply.outer(pts[:, 0], k[0]) + np.multiply.outer(pts[:, 1], k[1])))
    exact = np.einsum("pab,cab->pc", phase, f.coeffs).real / f.volume
    assert np.abs(interp(pts) - exact).max() < 2e-3 * np.abs(exact).max()


def test_tracer_area_and_reversibility(rng):
    n = 32
    cfg = SimConfig(grid=(n, n), t_end=0.2, dt=0.01)
    s = MHDSolver(cfg)
    u = s.from_field(_divfree(rng, n, 4))
    interp = VelocityInterpolant.from_spectrum(s, u)
    cloud = seed_grid(24, 24, BOX, origin=(1.0, 1.0), extent=(2.0, 2.0))
    a0 = polygon_mesh_area(cloud.positions, cloud.shape)
    c = cloud
    for _ in range(20):
        c = advance_tracers(c, interp, 0.01)
    a1 = polygon_mesh_area(c.positions, c.shape)
    assert abs(a1 / a0 - 1) < 1e-3
    for _ in range(20):
        c = advance_tracers(c, interp, -0.01)
    assert np.abs(c.positions - cloud.positions).max() < 1e-9


def test_polygon_area_unit_square():
    cloud = seed_grid(3, 3, (2.0, 2.0))
    assert polygon_mesh_area(cloud.positions, cloud.shape) == pytest.approx((2 * 2 / 3) ** 2)


# -- runs and analysis -------------------------------------------------------------


def test_run_writes_artifacts(tmp_path, rng):
    from besovlab.fields import read_sfld

    cfg = SimConfig(grid=(16, 16), t_end=0.01, dt=0.005, checkpoints=2)
    art = run(cfg, _divfree(rng, 16, 4), _divfree(rng, 16, 4), tracers=seed_grid(4, 4, BOX), output_dir=tmp_path)
    assert (tmp_path / "tracers.csv").read_text().splitlines()[0] == "id,x,y,t"
    assert len((tmp_path / "tracers.csv").read_text().splitlines()) == 17
    final = read_sfld(tmp_path / "b_000002.sfld")
    assert np.allclose(final.coeffs, art.checkpoints[-1][2].coeffs)
    m = art.manifest({"seed": 1})
    assert m["steps"] == 2 and m["seed"] == 1 and "code_version" in m


def test_decomposition_at_time_zero(rng):
    n = 16
    u0, b0 = _divfree(rng, n, 4), _divfree(rng, n, 4)
    cfg = SimConfig(grid=(n, n), t_end=0.0)
    art = run(cfg, u0, b0, tracers=seed_grid(n, n, BOX))
    ib = SpectralField.zeros((n, n), BOX, components=2, real=True)
    rep = decomposition_report(art, b0, ib, N=5, T=0.0)
    assert rep["I_S_sup"] < 1e-12 and rep["I_S_norm"] < 1e-10
    assert rep["max_displacement"] == 0.0


def test_decomposition_rejects_horizon_mismatch(rng):
    n = 16
    u0, b0 = _divfree(rng, n, 4), _divfree(rng, n, 4)
    art = run(SimConfig(grid=(n, n), t_end=0.01, dt=0.005), u0, b0, tracers=seed_grid(n, n, BOX))
    ib = SpectralField.zeros((n, n), BOX, components=2, real=True)
    with pytest.raises(ValueError, match="does not match"):
        decomposition_report(art, b0, ib, N=5, T=0.02)
    art.tracers = seed_grid(4, 4, BOX)
    with pytest.raises(ValueError, match="full simulation grid"):
        decomposition_report(art, b0, ib, N=5, T=0.01)


def test_norm_timeseries_columns(rng):
    n = 32
    art = run(SimConfig(grid=(n, n), t_end=0.02, dt=0.005, checkpoints=4), _divfree(rng, n, 6), _divfree(rng, n, 6))
    for _, uf, bf in art.checkpoints:
        assert uf.hermitian_residual() < 1e-11 and bf.hermitian_residual() < 1e-11
    fh = io.StringIO()
    rows = norm_timeseries(art, ConstructionParams(N=64), fh)
    header = fh.getvalue().splitlines()[0].split(",")
    assert header == [
        "t", "u_B_sm1", "u_B_s", "u_B_sp1", "b_B_s", "b_B_sp1", "b_B_sp2",
        "u_Linf_B_sm1", "u_L1_B_sp1", "b_Linf_B_s", "u_H1", "b_H1", "u_L2",
    ]  # fmt: skip
    assert len(rows) == 5
    # running sup in time never decreases and dominates the instantaneous value
    lin = [r["u_Linf_B_sm1"] for r in rows]
    assert all(b >= a for a, b in zip(lin, lin[1:]))
    assert all(r["u_Linf_B_sm1"] >= r["u_B_sm1"] * (1 - 1e-12) for r in rows)
    l1 = [r["u_L1_B_sp1"] for r in rows]
    assert l1[0] == 0.0 and all(b >= a for a, b in zip(l1, l1[1:]))

"""2-D pseudo-spectral solver for viscous, non-resistive MHD.

    u_t - Lap u + grad P = b . grad b - u . grad u,
    b_t + u . grad b = b . grad u,          div u = div b = 0,

on a periodic box.  Velocity uses an integrating-factor RK4 (the heat
semigroup is applied exactly), the magnetic field plain RK4 with the same
stages.  Nonlinear terms are formed in rotational form,

    N_u = P[(-j b_2 + w u_2,  j b_1 - w u_1)],    w = curl u, j = curl b,
    N_b = P[curl(a)],  a = u_1 b_2 - u_2 b_1,

on the physical grid with the 2/3 rule, so the truncated system conserves
1/2 |u|^2 + 1/2 |b|^2 up to viscous dissipation exactly.

Spectral arrays use the real-FFT layout ``(2, n0, n1 // 2 + 1)`` and the same
coefficient convention as ``SpectralField`` (``c = cell * fft(values)``).
"""

import csv
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from .fields import SpectralField, write_sfld

__all__ = [
    "SimConfig",
    "SimState",
    "MHDSolver",
    "CFLViolation",
    "SimulationBlowup",
    "leray_project",
    "step",
    "TracerCloud",
    "seed_grid",
    "VelocityInterpolant",
    "advance_tracers",
    "RunArtifacts",
    "run",
    "decomposition_report",
    "norm_timeseries",
    "polygon_mesh_area",
    "taylor_green",
]


class CFLViolation(RuntimeError):
    pass


class SimulationBlowup(FloatingPointError):
    pass


@dataclass
class SimConfig:
    """Run configuration.

    ``dt=None`` picks the step automatically (see ``MHDSolver.auto_dt``).
    ``linearized=True`` switches off every nonlinear term except
    ``b0 . grad u`` with the initial magnetic field frozen.
    """

    grid: tuple = (256, 256)
    period: tuple = (2.0 * np.pi, 2.0 * np.pi)
    dt: float = None
    t_end: float = 1.0
    dealias: float = 2.0 / 3.0
    integrator: str = "ifrk4"
    cfl_safety: float = 0.5
    checkpoints: int = 32
    viscosity: float = 1.0
    linearized: bool = False
    min_steps: int = 16

    def __post_init__(self):
        self.grid = tuple(int(n) for n in np.broadcast_to(self.grid, (2,)))
        self.period = tuple(float(p) for p in np.broadcast_to(self.period, (2,)))
        for n in self.grid:
            if n < 4 or n & (n - 1):
                raise ValueError(f"grid extents must be powers of two, got {self.grid}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0.5 < self.dealias <= 1.0:
            raise ValueError("dealias fraction must lie in (1/2, 1]")
        if not 0 < self.cfl_safety < 1:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.integrator != "ifrk4":
            raise ValueError(f"unknown integrator {self.integrator!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class SimState:
    u_hat: np.ndarray
    b_hat: np.ndarray
    t: float = 0.0
    step_count: int = 0

    def copy(self):
        return SimState(self.u_hat.copy(), self.b_hat.copy(), self.t, self.step_count)


class MHDSolver:
    def __init__(self, config, b_frozen=None):
        self.config = config
        n0, n1 = config.grid
        L0, L1 = config.period
        self.cell = (L0 / n0) * (L1 / n1)
        self.volume = L0 * L1
        self.kx = (2 * np.pi / L0) * np.fft.fftfreq(n0, 1.0 / n0)[:, None]
        self.ky = (2 * np.pi / L1) * np.fft.rfftfreq(n1, 1.0 / n1)[None, :]
        self.k2 = self.kx**2 + self.ky**2
        ix = np.abs(np.fft.fftfreq(n0, 1.0 / n0))[:, None]
        iy = np.fft.rfftfreq(n1, 1.0 / n1)[None, :]
        self.mask = (ix < config.dealias * n0 / 2) & (iy < config.dealias * n1 / 2)
        # real-FFT half plane: interior columns stand for two modes
        w = np.full(self.ky.shape, 2.0)
        w[0, 0] = 1.0
        if n1 % 2 == 0:
            w[0, -1] = 1.0
        self.weight = w
        self.b_frozen = b_frozen
        self._b0_phys = None if b_frozen is None else self.to_phys(b_frozen)

    # -- transforms --------------------------------------------------------

    def to_phys(self, f_hat):
        return np.fft.irfft2(f_hat, s=self.config.grid, axes=(-2, -1)) / self.cell

    def to_spec(self, f):
        return np.fft.rfft2(f, axes=(-2, -1)) * self.cell

    def project(self, v):
        """Leray projector on real-FFT arrays (k = 0 untouched)."""
        k2 = np.where(self.k2 == 0, 1.0, self.k2)
        div = (self.kx * v[0] + self.ky * v[1]) / k2
        return np.stack([v[0] - self.kx * div, v[1] - self.ky * div])

    def from_field(self, fld):
        if fld.dims != 2 or fld.shape != tuple(self.config.grid):
            raise ValueError(f"field lattice {fld.shape} does not match grid {self.config.grid}")
        phys = fld.to_physical()
        if fld.component_count < 2:
            raise ValueError("need a 2-component vector field")
        vals = phys[:2]
        if np.abs(vals.imag).max() > 1e-11 * max(np.abs(vals.real).max(), 1e-300):
            raise ValueError("simulation fields must be real (Hermitian spectra)")
        return self.to_spec(vals.real)

    def to_field(self, f_hat, divergence_free=True):
        fld = SpectralField.from_physical(self.to_phys(f_hat), self.config.period, real=True, divergence_free=divergence_free)
        # round-off from the full transform would otherwise populate the dealiased band
        return fld.with_coeffs(fld.coeffs * solver_mask_full(fld, self.config.dealias))

    def initial_state(self, u0, b0):
        u = self.project(self.from_field(u0) * self.mask)
        b = self.project(self.from_field(b0) * self.mask)
        trunc = max(self._lost_energy(u0), self._lost_energy(b0))
        if trunc > 1e-20:
            raise ValueError(f"initial data carry {trunc:.3g} of their energy beyond the dealiasing cutoff")
        return SimState(u, b, 0.0, 0)

    def _lost_energy(self, fld):
        full = self.from_field(fld)
        tot = self.inner(full, full)
        lost = self.inner(full * ~self.mask, full * ~self.mask)
        return lost / tot if tot > 0 else 0.0

    # -- diagnostics -------------------------------------------------------

    def inner(self, a, b):
        """Real L^2 inner product of two real-FFT vector arrays."""
        return float(np.sum(self.weight * (np.conj(a) * b).real) / self.volume)

    def energy(self, state):
        return 0.5 * self.inner(state.u_hat, state.u_hat) + 0.5 * self.inner(state.b_hat, state.b_hat)

    def dissipation(self, state):
        return self.config.viscosity * self.inner(np.sqrt(self.k2) * state.u_hat, np.sqrt(self.k2) * state.u_hat)

    def dissipation_rate(self, state):
        """d/dt of ||grad u||^2 along the exact flow at this state."""
        nu_, _ = self.rhs(state.u_hat, state.b_hat)
        ut = -self.config.viscosity * self.k2 * state.u_hat + nu_
        return 2.0 * self.config.viscosity * self.inner(self.k2 * state.u_hat, ut)

    def divergence_residual(self, f_hat):
        div = np.abs(self.kx * f_hat[0] + self.ky * f_hat[1])
        mag = np.sqrt(np.abs(f_hat[0]) ** 2 + np.abs(f_hat[1]) ** 2) * np.sqrt(self.k2)
        top = mag.max()
        return float(div.max() / top) if top > 0 else 0.0

    def max_speed(self, u_hat):
        u = self.to_phys(u_hat)
        return float(np.sqrt(u[0] ** 2 + u[1] ** 2).max())

    # -- right-hand sides --------------------------------------------------

    def rhs(self, u_hat, b_hat):
        """Nonlinear terms (N_u, N_b), dealiased and projected."""
        if self.config.linearized:
            return self._rhs_linear(u_hat)
        ik = (1j * self.kx, 1j * self.ky)
        u = self.to_phys(u_hat)
        b = self.to_phys(b_hat)
        w = self.to_phys(ik[0] * u_hat[1] - ik[1] * u_hat[0])
        j = self.to_phys(ik[0] * b_hat[1] - ik[1] * b_hat[0])
        nu_ = self.to_spec(np.stack([-j * b[1] + w * u[1], j * b[0] - w * u[0]])) * self.mask
        a = self.to_spec(u[0] * b[1] - u[1] * b[0]) * self.mask
        nb = np.stack([ik[1] * a, -ik[0] * a])
        return self.project(nu_), self.project(nb)

    def _rhs_linear(self, u_hat):
        b0 = self._b0_phys
        out = []
        for c in range(2):
            gx = self.to_phys(1j * self.kx * u_hat[c])
            gy = self.to_phys(1j * self.ky * u_hat[c])
            out.append(b0[0] * gx + b0[1] * gy)
        return np.zeros_like(u_hat), self.to_spec(np.stack(out)) * self.mask

    # -- stepping ----------------------------------------------------------

    def auto_dt(self, state, t_end):
        """CFL step, limited so k^2 dt <= 1 on the occupied band and >= min_steps steps."""
        cfg = self.config
        dx = min(L / n for L, n in zip(cfg.period, cfg.grid))
        speed = self.max_speed(state.u_hat)
        dt = cfg.cfl_safety * dx / speed if speed > 0 else math.inf
        occ = (np.abs(state.u_hat[0]) + np.abs(state.u_hat[1]) + np.abs(state.b_hat[0]) + np.abs(state.b_hat[1])) > 0
        if occ.any():
            kmax2 = float(self.k2[occ].max())
            if kmax2 > 0:
                dt = min(dt, 1.0 / kmax2)
        if t_end > 0:
            dt = min(dt, t_end / cfg.min_steps)
            dt = t_end / math.ceil(t_end / dt - 1e-9)
        return dt

    def step(self, state, dt):
        cfg = self.config
        dx = min(L / n for L, n in zip(cfg.period, cfg.grid))
        speed = self.max_speed(state.u_hat)
        if speed > 0 and dt > cfg.cfl_safety * dx / speed:
            raise CFLViolation(
                f"dt={dt:.3g} exceeds cfl_safety*dx/max|u| = {cfg.cfl_safety * dx / speed:.3g} "
                f"(max|u|={speed:.3g}) at t={state.t:.6g}"
            )
        nu = cfg.viscosity
        E = np.exp(-0.5 * nu * self.k2 * dt)
        E2 = E * E
        u, b = state.u_hat, state.b_hat
        k1u, k1b = self.rhs(u, b)
        k2u, k2b = self.rhs(E * (u + 0.5 * dt * k1u), b + 0.5 * dt * k1b)
        k3u, k3b = self.rhs(E * u + 0.5 * dt * k2u, b + 0.5 * dt * k2b)
        k4u, k4b = self.rhs(E2 * u + dt * E * k3u, b + dt * k3b)
        un = E2 * u + (dt / 6.0) * (E2 * k1u + 2.0 * E * (k2u + k3u) + k4u)
        bn = b + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(bn))):
            raise SimulationBlowup(f"non-finite values after step {state.step_count + 1} (t={state.t + dt:.6g})")
        return SimState(un * self.mask, bn * self.mask, state.t + dt, state.step_count + 1)


def leray_project(fld):
    """(I - k k^T / |k|^2) applied to a d-component ``SpectralField``."""
    if fld.component_count != fld.dims:
        raise ValueError("Leray projection needs a d-component vector field")
    ks = fld.wavevectors()
    k2 = fld.kmag() ** 2
    safe = np.where(k2 == 0, 1.0, k2)
    div = sum(k * c for k, c in zip(ks, fld.coeffs)) / safe
    out = np.stack([c - k * div for k, c in zip(ks, fld.coeffs)])
    return fld.with_coeffs(out, divergence_free=True)


_SOLVERS = {}


def step(state, config, dt=None):
    """One step with a cached solver for ``config``."""
    key = id(config)
    if key not in _SOLVERS or _SOLVERS[key].config is not config:
        _SOLVERS.clear()
        _SOLVERS[key] = MHDSolver(config)
    solver = _SOLVERS[key]
    return solver.step(state, dt if dt is not None else (config.dt or solver.auto_dt(state, config.t_end)))


def taylor_green(grid, period=(2 * np.pi, 2 * np.pi), amplitude=1.0):
    """u = A (sin x cos y, -cos x sin y) as a real ``SpectralField``."""
    f = SpectralField.zeros(grid, period, components=2)
    x, y = f.grid()
    kx, ky = 2 * np.pi / period[0], 2 * np.pi / period[1]
    vals = amplitude * np.stack([np.sin(kx * x) * np.cos(ky * y), -(kx / ky) * np.cos(kx * x) * np.sin(ky * y)])
    return SpectralField.from_physical(vals, period, real=True, divergence_free=True)


# -- tracers -------------------------------------------------------------------


@dataclass
class TracerCloud:
    """Lagrangian markers; ``positions`` are unwrapped, ``wrapped`` lies in the box."""

    positions: np.ndarray
    seed_positions: np.ndarray
    period: tuple
    shape: tuple = None

    @property
    def wrapped(self):
        return np.mod(self.positions, np.asarray(self.period))

    def copy(self):
        return TracerCloud(self.positions.copy(), self.seed_positions, self.period, self.shape)


def seed_grid(nx, ny, period, origin=(0.0, 0.0), extent=None):
    """Tracers on a regular nx x ny lattice (ij order) over ``extent`` (default: the box)."""
    extent = extent or period
    x = origin[0] + np.arange(nx) * (extent[0] / nx)
    y = origin[1] + np.arange(ny) * (extent[1] / ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    pos = np.stack([X.ravel(), Y.ravel()], axis=1)
    return TracerCloud(pos.copy(), pos.copy(), tuple(period), (nx, ny))


class VelocityInterpolant:
    """Periodic bicubic-spline interpolant of a field sampled on a 2x refined grid.

    The refined samples come from zero-padding the spectrum (exact Fourier
    interpolation); off-grid values use local cubic splines.  Spline
    coefficients are linear in the data, so time blending of two
    interpolants is done on the coefficients.
    """

    def __init__(self, coeffs, period, refine):
        self.coeffs = coeffs
        self.period = period
        self.refine = refine

    @classmethod
    def from_spectrum(cls, solver, f_hat, refine=2):
        n0, n1 = solver.config.grid
        m0, m1 = refine * n0, refine * n1
        pad = np.zeros((f_hat.shape[0], m0, m1 // 2 + 1), dtype=complex)
        h = n0 // 2
        pad[:, :h, : n1 // 2] = f_hat[:, :h, : n1 // 2]
        pad[:, m0 - h :, : n1 // 2] = f_hat[:, n0 - h :, : n1 // 2]
        vals = np.fft.irfft2(pad, s=(m0, m1), axes=(-2, -1)) * (m0 * m1 / solver.volume)
        coeffs = np.stack([ndimage.spline_filter(v, order=3, mode="grid-wrap") for v in vals])
        return cls(coeffs, solver.config.period, refine)

    def blend(self, other, theta):
        if theta == 0.0:
            return self
        if theta == 1.0:
            return other
        return VelocityInterpolant((1.0 - theta) * self.coeffs + theta * other.coeffs, self.period, self.refine)

    def __call__(self, positions):
        shape = self.coeffs.shape[1:]
        idx = np.stack([np.mod(positions[:, i], self.period[i]) * (shape[i] / self.period[i]) for i in range(2)])
        return np.stack(
            [ndimage.map_coordinates(c, idx, order=3, mode="grid-wrap", prefilter=False) for c in self.coeffs], axis=1
        )


def advance_tracers(cloud, interp_now, dt, interp_next=None):
    """One RK4 step of dX/dt = u(t, X), velocity linear in time between two states."""
    nxt = interp_next if interp_next is not None else interp_now
    mid = interp_now.blend(nxt, 0.5) if nxt is not interp_now else interp_now
    x = cloud.positions
    k1 = interp_now(x)
    k2 = mid(x + 0.5 * dt * k1)
    k3 = mid(x + 0.5 * dt * k2)
    k4 = nxt(x + dt * k3)
    new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return TracerCloud(new, cloud.seed_positions, cloud.period, cloud.shape)


def polygon_mesh_area(positions, shape):
    """Total signed area of the quadrilaterals of a tracer lattice (ij order, unwrapped)."""
    P = positions.reshape(shape + (2,))
    a, b = P[:-1, :-1], P[1:, :-1]
    c, d = P[1:, 1:], P[:-1, 1:]
    quad = [a, b, c, d]
    s = 0.0
    for p, q in zip(quad, quad[1:] + quad[:1]):
        s = s + p[..., 0] * q[..., 1] - q[..., 0] * p[..., 1]
    return float(0.5 * np.sum(s))


# -- runs ----------------------------------------------------------------------


@dataclass
class RunArtifacts:
    config: SimConfig
    initial: SimState
    final: SimState
    dt: float
    checkpoints: list = field(default_factory=list)  # (t, u_field, b_field)
    energy_residuals: list = field(default_factory=list)
    divergence: list = field(default_factory=list)
    tracers: TracerCloud = None
    wall_time: float = 0.0
    files: list = field(default_factory=list)
    solver: MHDSolver = field(default=None, repr=False)

    def manifest(self, extra=None):
        out = {
            "config": self.config.to_dict(),
            "dt": self.dt,
            "steps": self.final.step_count,
            "t_final": self.final.t,
            "wall_time_s": self.wall_time,
            "checkpoints": [t for t, _, _ in self.checkpoints],
            "files": self.files,
            "max_energy_residual": max(self.energy_residuals, default=0.0),
            "max_divergence": max((max(d) for d in self.divergence), default=0.0),
        }
        try:
            from importlib.metadata import version

            out["code_version"] = version("artifact")
        except Exception:  # package metadata missing in a source checkout
            out["code_version"] = "unknown"
        if extra:
            out.update(extra)
        return out


def _energy_residual(solver, s0, s1, D0, D1, R0, R1):
    """Relative mismatch of the discrete energy balance over one step.

    The dissipation integral uses the Hermite-corrected trapezoid rule
    dt/2 (D0 + D1) + dt^2/12 (D0' - D1').
    """
    dt = s1.t - s0.t
    integral = 0.5 * dt * (D0 + D1) + dt * dt / 12.0 * (R0 - R1)
    dE = solver.energy(s1) - solver.energy(s0)
    return abs(dE + integral) / integral if integral > 0 else abs(dE)


def run(config, u0, b0, tracers=None, output_dir=None, track_energy=True, refine=2):
    """Integrate from (u0, b0) to ``config.t_end``.

    ``tracers`` (a ``TracerCloud``) are advected alongside.  When
    ``output_dir`` is given, SFLD1 checkpoints and the tracer CSV are written
    there.
    """
    t0 = time.perf_counter()
    solver = MHDSolver(config)
    state = solver.initial_state(u0, b0)
    if config.linearized:
        solver = MHDSolver(config, b_frozen=state.b_hat)
    dt = config.dt or solver.auto_dt(state, config.t_end)
    nsteps = int(round(config.t_end / dt)) if config.t_end > 0 else 0
    if nsteps and abs(nsteps * dt - config.t_end) > 1e-9 * config.t_end:
        nsteps = math.ceil(config.t_end / dt)
    cp_steps = set()
    if config.checkpoints > 0 and nsteps > 0:
        cp_steps = {int(round(i * nsteps / config.checkpoints)) for i in range(config.checkpoints + 1)}
    cp_steps.add(0)
    cp_steps.add(nsteps)
    art = RunArtifacts(config, state.copy(), state, dt, solver=solver)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)

    def checkpoint(s):
        uf, bf = solver.to_field(s.u_hat), solver.to_field(s.b_hat, divergence_free=not config.linearized)
        art.checkpoints.append((s.t, uf, bf))
        if output_dir:
            for name, fld in (("u", uf), ("b", bf)):
                path = os.path.join(output_dir, f"{name}_{s.step_count:06d}.sfld")
                write_sfld(path, fld)
                art.files.append(os.path.basename(path))

    checkpoint(state)
    interp = VelocityInterpolant.from_spectrum(solver, state.u_hat, refine) if tracers is not None else None
    cloud = tracers
    if track_energy and not config.linearized:
        D0, R0 = solver.dissipation(state), solver.dissipation_rate(state)
    for n in range(nsteps):
        h = min(dt, config.t_end - state.t) if n == nsteps - 1 else dt
        new = solver.step(state, h)
        if cloud is not None:
            nxt = VelocityInterpolant.from_spectrum(solver, new.u_hat, refine)
            cloud = advance_tracers(cloud, interp, h, nxt)
            interp = nxt
        if track_energy and not config.linearized:
            D1, R1 = solver.dissipation(new), solver.dissipation_rate(new)
            art.energy_residuals.append(_energy_residual(solver, state, new, D0, D1, R0, R1))
            D0, R0 = D1, R1
        art.divergence.append((solver.divergence_residual(new.u_hat), solver.divergence_residual(new.b_hat)))
        state = new
        if state.step_count in cp_steps:
            checkpoint(state)
    art.final = state
    art.tracers = cloud
    if output_dir and cloud is not None:
        with open(os.path.join(output_dir, "tracers.csv"), "w", newline="") as fh:
            write_tracer_csv(fh, cloud, state.t)
        art.files.append("tracers.csv")
    art.wall_time = time.perf_counter() - t0
    return art


def write_tracer_csv(fh, cloud, t):
    w = csv.writer(fh)
    w.writerow(["id", "x", "y", "t"])
    for i, (x, y) in enumerate(cloud.wrapped):
        w.writerow([i, repr(float(x)), repr(float(y)), repr(float(t))])


# -- analysis ------------------------------------------------------------------


def decomposition_report(run_art, b0, ib_field, N, T, q=2.0, ib_device=None, bank=None):
    """Empirical split b(T, Phi(x, T)) = b0(x) + I^B(x) + I^S(x).

    ``run_art`` must carry tracers seeded on the full simulation grid (ij
    order).  ``b0`` and ``ib_field`` are dense fields on that grid; ``N`` and
    ``T`` identify the I^B computation and must match the run.
    """
    from .lp import DEFAULT_BANK, BesovParams, report_from_table, dense_block_table

    bank = bank or DEFAULT_BANK
    cfg = run_art.config
    if abs(T - run_art.final.t) > 1e-12 * max(T, 1e-300) and not (T == 0 and run_art.final.t == 0):
        raise ValueError(f"I^B horizon T={T!r} does not match run end time {run_art.final.t!r}")
    if ib_field.shape != tuple(cfg.grid):
        raise ValueError("I^B field lattice does not match the run grid")
    cloud = run_art.tracers
    if cloud is None or cloud.shape != tuple(cfg.grid):
        raise ValueError("decomposition needs tracers seeded on the full simulation grid")
    solver = run_art.solver
    b_interp = VelocityInterpolant.from_spectrum(solver, run_art.final.b_hat)
    b_on_flow = b_interp(cloud.positions).T.reshape((2,) + tuple(cfg.grid))
    b0_phys = b0.to_physical()[:2].real
    ib_phys = ib_field.to_physical()[:2].real
    resid = b_on_flow - b0_phys - ib_phys
    params = BesovParams(0.0, math.inf, q)
    rep = {}
    for name, vals in (("I_S", resid), ("I_B", ib_phys)):
        fld = SpectralField.from_physical(vals, cfg.period, real=True)
        if not fld.support_mask().any() or np.abs(vals).max() == 0:
            rep[name] = 0.0
            continue
        fld = fld.with_coeffs(fld.coeffs * solver_mask_full(fld, cfg.dealias))
        table = dense_block_table(_drop_mean(fld), [math.inf], bank, True, 1)
        rep[name] = report_from_table(table, params, 2, "").total if table else 0.0
    x = cloud.seed_positions
    out = {
        "N": N,
        "T": T,
        "q": q,
        "I_S_norm": rep["I_S"],
        "I_B_norm": rep["I_B"],
        "ratio_IS_IB": rep["I_S"] / rep["I_B"] if rep["I_B"] > 0 else 0.0,
        "I_S_sup": float(np.sqrt((resid**2).sum(0)).max()),
        "max_displacement": float(np.abs(cloud.positions - x).max()),
    }
    if ib_device is not None:
        out["I_B_device"] = ib_device
        out["ratio_IS_device"] = rep["I_S"] / ib_device if ib_device > 0 else 0.0
    return out


def solver_mask_full(fld, dealias):
    ks = fld.integer_wavenumbers()
    m = np.ones(fld.shape, dtype=bool)
    for axis, (k, n) in enumerate(zip(ks, fld.shape)):
        view = [1] * fld.dims
        view[axis] = n
        m = m & (np.abs(k) < dealias * n / 2).reshape(view)
    return m


def _drop_mean(fld):
    c = fld.coeffs.copy()
    c[(slice(None),) + (0,) * fld.dims] = 0.0
    return fld.with_coeffs(c)


def _block_log2(fld, p, bank):
    from .lp import dense_block_table

    fld = _drop_mean(fld)
    if not fld.support_mask().any():
        return {}
    table = dense_block_table(fld, [p], bank, True, 1)
    return {j: math.log2(v[float(p)]) if v[float(p)] > 0 else -math.inf for j, v in table.items()}


def norm_timeseries(run_art, params, fh=None, bank=None):
    """Time series of the instantaneous and mixed-time norms at checkpoints.

    Columns: t; u in s = d/p - 1, d/p, d/p + 1 and b in s = d/p, d/p + 1,
    d/p + 2 (all with q = 1); the running mixed norms
    ``u_Linf_B(d/p-1)``, ``u_L1_B(d/p+1)``, ``b_Linf_B(d/p)`` (per-block max or
    trapezoid in time first, then the l^1 sum); and the H^1 norms of u and b.
    Returns the list of row dicts; writes CSV to ``fh`` when given.
    """
    from .lp import DEFAULT_BANK, sobolev_norm

    bank = bank or DEFAULT_BANK
    p = float(params.p)
    d = 2
    sp = d / p
    rows = []
    hist_u, hist_b, times = [], [], []
    for t, uf, bf in run_art.checkpoints:
        tu, tb = _block_log2(uf, p, bank), _block_log2(bf, p, bank)
        hist_u.append(tu)
        hist_b.append(tb)
        times.append(t)

        def bes(tab, s):
            vals = [2.0 ** (j * s + v) for j, v in tab.items() if np.isfinite(v)]
            return float(sum(vals))

        js_u = sorted(set().union(*hist_u))
        js_b = sorted(set().union(*hist_b))

        def series(hist, j, s):
            return np.array([2.0 ** (j * s + h[j]) if j in h and np.isfinite(h[j]) else 0.0 for h in hist])

        u_linf = sum(series(hist_u, j, sp - 1).max() for j in js_u)
        b_linf = sum(series(hist_b, j, sp).max() for j in js_b)
        u_l1 = sum(trapezoid(series(hist_u, j, sp + 1), times) if len(times) > 1 else 0.0 for j in js_u)
        rows.append(
            {
                "t": t,
                "u_B_sm1": bes(tu, sp - 1),
                "u_B_s": bes(tu, sp),
                "u_B_sp1": bes(tu, sp + 1),
                "b_B_s": bes(tb, sp),
                "b_B_sp1": bes(tb, sp + 1),
                "b_B_sp2": bes(tb, sp + 2),
                "u_Linf_B_sm1": u_linf,
                "u_L1_B_sp1": u_l1,
                "b_Linf_B_s": b_linf,
                "u_H1": sobolev_norm(uf, 1.0),
                "b_H1": sobolev_norm(bf, 1.0),
                "u_L2": uf.l2_norm(),
            }
        )
    if fh is not None:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["t"])
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return rows


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else v

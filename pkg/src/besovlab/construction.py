"""Anisotropic initial data (u0, b0) and the product pair (f^N, g^N).

All data are built from two cuboid bumps:

* ``psi_hat`` lives on ``[lam, 2 lam] x [1, 2] x [lam, 2 lam]^(d-2)`` (long axis 1),
* ``phi_hat`` lives on ``[1, 2] x [lam, 2 lam]^(d-1)`` (long axis 0),

with ``lam = 1 / ln ln N``.  The velocity sits at the single scale 2^N, the
magnetic field is a sum of scales 2^j with j in the window [N/2, 4N/5]:

    u0_hat = (-xi_2/xi_1, 1, 0..) * 2^N psi_hat(2^-N xi) * lam^(3+d) / 2^(Nd)
    b0_hat = (-xi_2/xi_1, 1, 0..) * sum_j phi_hat(2^-j xi) / (2^(jd) j^alpha)

Both are divergence free mode by mode.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bumps import CuboidSpec, build_bump_profile
from .lp import DEFAULT_BANK, BesovParams, dense_block_table, lq_aggregate_log2, report_from_log2_table, report_from_table
from .sparse import DEFAULT_OVERSAMPLE, DEFAULT_RESOLUTION, Atom, SparseBumpField, sparse_block_table

__all__ = [
    "ConstructionParams",
    "VectorInitialData",
    "psi_profile",
    "phi_profile",
    "build_initial_data",
    "initial_norm_report",
    "build_algebra_pair",
    "dense_lattice",
]


@dataclass(frozen=True)
class ConstructionParams:
    """Parameters (d, p, q, alpha, N) with the derived thickness and horizon.

    ``strict=True`` enforces the asymptotic regime (N >= 16, 0 < lam < 1 and
    the spectral gap ``max(j_window) + 2 < N``).  Small-N dense checks set
    ``strict=False``; ``lam`` overrides the thickness when given.
    """

    d: int = 2
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.75
    N: int = 256
    strict: bool = True
    lam_override: float = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d}")
        if not self.p >= 1:
            raise ValueError(f"p must lie in [1, inf], got {self.p}")
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not 1.0 / self.q < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (1/q, 1) = ({1.0 / self.q:g}, 1), got {self.alpha}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.lam_override is None and self.N < 3:
            raise ValueError("N >= 3 is needed for ln ln N > 0")
        if self.lam_override is not None and not self.lam_override > 0:
            raise ValueError("lam override must be positive")
        if not self.j_window:
            raise ValueError(f"empty j window for N={self.N}")
        if self.strict:
            if self.N < 16:
                raise ValueError(f"N={self.N} < 16 (set strict=False for small-N checks)")
            if max(self.j_window) + 2 >= self.N:
                raise ValueError("b0 and u0 spectra are not separated")

    @property
    def lam(self):
        if self.lam_override is not None:
            return float(self.lam_override)
        return 1.0 / math.log(math.log(self.N))

    @property
    def j_window(self):
        return range(math.ceil(self.N / 2), math.floor(4 * self.N / 5) + 1)

    @property
    def log2_T(self):
        return -2.0 * self.N - math.log2(math.log(self.N))

    @property
    def T(self):
        """(ln N)^-1 2^(-2N); underflows to 0 for N above ~537 (use ``log2_T``)."""
        return math.ldexp(1.0 / math.log(self.N), -2 * self.N)

    def with_N(self, N):
        return ConstructionParams(self.d, self.p, self.q, self.alpha, int(N), self.strict, self.lam_override)

    def to_dict(self):
        return {
            "d": self.d,
            "p": "inf" if math.isinf(self.p) else self.p,
            "q": "inf" if math.isinf(self.q) else self.q,
            "alpha": self.alpha,
            "N": self.N,
            "lambda": self.lam,
            "log2_T": self.log2_T,
            "j_window": [min(self.j_window), max(self.j_window)],
        }


def _multipliers(d):
    return ("neg_ratio", "one") + ("zero",) * (d - 2)


def psi_profile(params, hermitian=False, smoothness=7, kind="poly"):
    spec = CuboidSpec.standard(params.d, params.lam, long_axis=1)
    return build_bump_profile(spec, smoothness, kind, hermitian, name="psi_hat")


def phi_profile(params, hermitian=False, smoothness=7, kind="poly"):
    spec = CuboidSpec.standard(params.d, params.lam, long_axis=0)
    return build_bump_profile(spec, smoothness, kind, hermitian, name="phi_hat")


def _b0_atoms(params, amplitude=1.0):
    d, a = params.d, params.alpha
    return [Atom(j, amplitude * j**-a, -j * d) for j in params.j_window]


def _u0_atom(params, amplitude=1.0):
    N, d = params.N, params.d
    return Atom(N, amplitude * params.lam ** (3 + d), N - N * d)


@dataclass
class VectorInitialData:
    """Velocity and magnetic initial data in one representation.

    ``u0`` and ``b0`` are ``SparseBumpField`` or ``SpectralField`` depending on
    ``representation``; ``hermitian`` marks the symmetrized (real) variant.
    """

    u0: object
    b0: object
    representation: str
    params: ConstructionParams
    hermitian: bool = False
    sparse: dict = field(default_factory=dict, repr=False)


def dense_lattice(fields, min_modes=32, base_period=2.0 * np.pi, margin=1.0):
    """(n, L) for a square lattice resolving every sparse field in ``fields``.

    The period is a power-of-two multiple of ``base_period`` so that the
    narrowest cuboid side holds at least ``min_modes`` lattice modes; ``n`` is
    the smallest power of two whose Nyquist exceeds ``margin`` times the
    largest support radius.
    """
    width = math.inf
    rmax = 0.0
    for f in fields:
        if not f.atoms:
            continue
        jmin = f.atoms[0].j
        width = min(width, math.ldexp(min(f.profile.spec.widths()), jmin))
        rmax = max(rmax, f.radial_support()[1])
    if rmax == 0.0:
        return 8, base_period
    spacing = width / min_modes
    L = base_period * 2.0 ** max(0, math.ceil(math.log2(2.0 * np.pi / (spacing * base_period))))
    n = 8
    while np.pi * n / L <= margin * rmax:
        n *= 2
    return n, L


def build_initial_data(params, representation="sparse", hermitian=False, shape=None, period=None, amplitude=1.0, smoothness=7, kind="poly"):
    """Velocity/magnetic data of the norm-inflation example.

    Parameters
    ----------
    representation : {"sparse", "dense"}
    hermitian : bool
        Symmetrize the spectra so both fields are real in physical space.
    shape, period : optional lattice for the dense representation; chosen by
        ``dense_lattice`` when omitted.
    amplitude : float
        Global factor (0 gives the zero data).
    """
    mult = _multipliers(params.d)
    u0 = SparseBumpField(psi_profile(params, hermitian, smoothness, kind), [_u0_atom(params, amplitude)], mult, "u0")
    b0 = SparseBumpField(phi_profile(params, hermitian, smoothness, kind), _b0_atoms(params, amplitude), mult, "b0")
    sparse = {"u0": u0, "b0": b0}
    if representation == "sparse":
        return VectorInitialData(u0, b0, "sparse", params, hermitian, sparse)
    if representation != "dense":
        raise ValueError(f"unknown representation {representation!r}")
    if shape is None or period is None:
        n, L = dense_lattice([u0, b0])
        shape = shape or (n,) * params.d
        period = period or (L,) * params.d
    shape = tuple(shape) if np.ndim(shape) else (int(shape),) * params.d
    period = tuple(period) if np.ndim(period) else (float(period),) * params.d
    nyq = min(np.pi * n / L for n, L in zip(shape, period))
    rmax = max(u0.radial_support()[1], b0.radial_support()[1])
    if nyq <= rmax:
        from .fields import ResolutionError

        raise ResolutionError(f"lattice Nyquist {nyq:g} does not exceed the support radius {rmax:g}")
    ud = u0.to_dense(shape, period)
    bd = b0.to_dense(shape, period)
    ud.divergence_free = bd.divergence_free = True
    return VectorInitialData(ud, bd, "dense", params, hermitian, sparse)


# -- norms ---------------------------------------------------------------------


def _log2_tables(fld, ps, bank, homogeneous=True, oversample=2):
    """{j: {p: log2 ||Delta_j f||_p}} for sparse or dense fields."""
    if isinstance(fld, SparseBumpField):
        return sparse_block_table(fld, ps, bank, homogeneous)
    table = dense_block_table(fld, ps, bank, homogeneous, oversample)
    return {j: {float(p): (math.log2(v) if v > 0 else -math.inf) for p, v in row.items()} for j, row in table.items()}


def norm_from_table(table, s, p, q, homogeneous=True):
    """log2 of the Besov norm from a per-block log2 table."""
    return lq_aggregate_log2([j * s + row[float(p)] for j, row in table.items()], q)


def initial_norm_report(data, bank=DEFAULT_BANK):
    """Size and smallness estimates for (u0, b0).

    Returns a dict with, for every quantity, ``log2_value``, ``value`` (may be
    inf / 0 outside double range), the comparison bound and
    ``log2_ratio = log2(value / bound)``.  The bounds are, for q = 1 unless
    marked: u0 in s = d/p-1, d/p, d/p+1 against 1/ln ln N, 2^N, 2^(2N); b0 in
    s = d/p, d/p+1, d/p+2 against N^(1-alpha), 2^N, 2^(2N); and with the
    params' q, u0 in s = d/p-1 against 1/ln ln N and b0 in s = d/p against
    N^(1/q-alpha).
    """
    prm = data.params
    d, p, q, N = prm.d, float(prm.p), float(prm.q), prm.N
    sp = d / p
    lam = prm.lam
    tu = _log2_tables(data.u0, [p], bank)
    tb = _log2_tables(data.b0, [p], bank)
    log2N = math.log2(N)
    rows = [
        ("u0", sp - 1, 1.0, math.log2(lam)),
        ("u0", sp, 1.0, float(N)),
        ("u0", sp + 1, 1.0, 2.0 * N),
        ("b0", sp, 1.0, (1 - prm.alpha) * log2N),
        ("b0", sp + 1, 1.0, float(N)),
        ("b0", sp + 2, 1.0, 2.0 * N),
        ("u0", sp - 1, q, math.log2(lam)),
        ("b0", sp, q, (1.0 / q - prm.alpha) * log2N),
    ]
    out = {"params": prm.to_dict(), "quantities": []}
    for name, s, qq, log2_bound in rows:
        table = tu if name == "u0" else tb
        l2v = norm_from_table(table, s, p, qq) if table else -math.inf
        out["quantities"].append(
            {
                "field": name,
                "s": s,
                "p": p,
                "q": qq,
                "log2_value": l2v,
                "value": _exp2(l2v),
                "log2_bound": log2_bound,
                "log2_ratio": l2v - log2_bound,
            }
        )
    return out


def besov_report(fld, s, p, q, bank=DEFAULT_BANK, homogeneous=True):
    """NormReport for sparse or dense fields (dense uses 2x oversampling)."""
    params = BesovParams(s, p, q, homogeneous)
    if isinstance(fld, SparseBumpField):
        table = sparse_block_table(fld, [p], bank, homogeneous)
        return report_from_log2_table(table, params, "sparse reference-scale reduction")
    table = dense_block_table(fld, [p], bank, homogeneous, oversample=2)
    return report_from_table(table, params, fld.dims, f"dense lattice {fld.shape}")


def _exp2(x):
    if x == -math.inf:
        return 0.0
    if x > 1023.99:
        return math.inf
    return math.pow(2.0, x)


def build_algebra_pair(params, hermitian=False, smoothness=7, kind="poly"):
    """Scalar pair with small norms whose product is large.

    f^N = sum_j F^-1[phi_hat(2^-j xi) / (2^(jd) j^alpha)],
    g^N = F^-1[lam * psi_hat(2^-N xi) / 2^(Nd)].
    """
    f = SparseBumpField(phi_profile(params, hermitian, smoothness, kind), _b0_atoms(params), ("one",), "fN")
    g_atom = Atom(params.N, params.lam, -params.N * params.d)
    g = SparseBumpField(psi_profile(params, hermitian, smoothness, kind), [g_atom], ("one",), "gN")
    return f, g


DEFAULT_SPARSE_SETTINGS = {"resolution": DEFAULT_RESOLUTION, "oversample": DEFAULT_OVERSAMPLE}

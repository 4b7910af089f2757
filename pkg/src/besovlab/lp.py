"""Littlewood-Paley filter banks and Besov / Sobolev norms.

The bank is the usual pair (chi, phi): ``chi`` is a radial cutoff equal to 1
for ``|xi| <= inner`` and 0 for ``|xi| >= outer``; ``phi(xi) = chi(xi/2) - chi(xi)``
is supported in the annulus ``inner <= |xi| <= 2 * outer``.  The homogeneous
block is ``Delta_j u = phi(2^-j D) u``; the nonhomogeneous bank replaces all
blocks ``j <= -1`` by ``Delta_-1 = chi(D)``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import ResolutionError, SpectralField
from .smooth import smoothstep

__all__ = [
    "DyadicFilterBank",
    "build_filter_bank",
    "BesovParams",
    "NormReport",
    "project_block",
    "block_lp_norm",
    "block_lp_norms",
    "besov_norm",
    "sobolev_norm",
    "lq_aggregate_log2",
    "report_from_table",
    "report_from_log2_table",
    "DEFAULT_BANK",
]


@dataclass(frozen=True)
class DyadicFilterBank:
    inner: float = 0.75
    outer: float = 4.0 / 3.0
    order: int = 7
    kind: str = "poly"
    j_range: tuple = (-1074, 1023)

    def chi(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 - smoothstep((r - self.inner) / (self.outer - self.inner), self.order, self.kind)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return self.chi(0.5 * r) - self.chi(r)

    def phi_j(self, j, r):
        return self.phi(np.ldexp(np.asarray(r, dtype=float), -int(j)))

    def block_multiplier(self, j, r, homogeneous=True):
        """Radial symbol of block ``j`` evaluated at ``|xi| = r``."""
        if not homogeneous:
            if j < -1:
                return np.zeros_like(np.asarray(r, dtype=float))
            if j == -1:
                return self.chi(r)
        return self.phi_j(j, r)

    @property
    def annulus(self):
        """(inner, outer) radii of supp phi."""
        return self.inner, 2.0 * self.outer

    def block_radii(self, j, homogeneous=True):
        lo, hi = self.annulus
        if not homogeneous and j == -1:
            return 0.0, self.outer
        return math.ldexp(lo, j), math.ldexp(hi, j)

    def blocks_touching(self, rmin, rmax, homogeneous=True):
        """Indices whose block support meets the radial shell [rmin, rmax]."""
        lo, hi = self.annulus
        if rmax <= 0:
            return []
        j_lo = math.floor(math.log2(max(rmin, 1e-300) / hi))
        j_hi = math.ceil(math.log2(rmax / lo))
        out = []
        for j in range(j_lo - 1, j_hi + 2):
            if not homogeneous and j < -1:
                continue
            a, b = self.block_radii(j, homogeneous)
            if a < rmax and b > rmin:
                out.append(j)
        if not homogeneous and rmin < self.outer and -1 not in out:
            out.insert(0, -1)
        return [j for j in out if self.j_range[0] <= j <= self.j_range[1]]


def build_filter_bank(inner=0.75, outer=4.0 / 3.0, order=7, kind="poly", j_range=(-1074, 1023)):
    """Construct the (chi, phi) pair.

    ``kind="poly"`` uses an odd-degree polynomial smoothstep of degree ``order``;
    ``kind="exp"`` uses the C-infinity exponential transition.
    """
    if not (inner > 0 and outer > 0):
        raise ValueError("plateau radii must be positive")
    if inner >= outer:
        raise ValueError(f"inner plateau radius {inner} must be below the outer support radius {outer}")
    if j_range[0] > j_range[1]:
        raise ValueError("empty j_range")
    smoothstep(0.5, order, kind)  # validates order/kind
    return DyadicFilterBank(float(inner), float(outer), int(order), kind, tuple(j_range))


DEFAULT_BANK = build_filter_bank()


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    q: float = 2.0
    homogeneous: bool = True

    def __post_init__(self):
        if not self.p >= 1 or not self.q >= 1:
            raise ValueError(f"need p >= 1 and q >= 1, got p={self.p}, q={self.q}")

    def to_dict(self):
        return {"s": self.s, "p": _num(self.p), "q": _num(self.q), "homogeneous": self.homogeneous}


def _num(x):
    return "inf" if math.isinf(x) else x


def lq_aggregate_log2(log2_values, q):
    """log2 of the l^q norm of the positive numbers 2**log2_values."""
    v = np.asarray(log2_values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -math.inf
    if math.isinf(q):
        return float(v.max())
    top = v.max()
    return float(top + math.log2(np.sum(np.exp2(q * (v - top)))) / q)


@dataclass
class NormReport:
    """Per-block and aggregated Besov norm.

    ``per_block`` rows are ``(j, lp, weighted)`` with ``weighted = 2^{js} lp``.
    Values that over/underflow a double are still exact in the ``log2_*``
    companions.
    """

    params: BesovParams
    per_block: list
    log2_per_block: list
    truncation_note: str
    log2_total: float = field(init=False)

    def __post_init__(self):
        self.log2_total = lq_aggregate_log2([w for _, _, w in self.log2_per_block], self.params.q)

    @property
    def total(self):
        return _exp2(self.log2_total)

    def weighted(self):
        return {j: w for j, _, w in self.per_block}

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "per_block": [[j, lp, w] for j, lp, w in self.per_block],
            "total": self.total,
            "log2_total": self.log2_total,
            "truncation_note": self.truncation_note,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), default=_json_default)


def _json_default(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    raise TypeError(type(x))


def _exp2(x):
    if x == -math.inf:
        return 0.0
    if x > 1023.99:
        return math.inf
    return math.pow(2.0, x)


def _log2(x):
    return math.log2(x) if x > 0 else -math.inf


# -- dense path -------------------------------------------------------------


def _check_block_resolvable(fld, j, bank, homogeneous):
    inner, outer = bank.block_radii(j, homogeneous)
    nyq = fld.nyquist()
    if inner >= nyq:
        raise ResolutionError(f"block {j} (|xi| >= {inner:g}) lies beyond the lattice Nyquist {nyq:g}")
    if outer > nyq:
        radii = fld.support_radii()
        if radii is not None and (radii[1] >= nyq or fld.touches_nyquist()):
            raise ResolutionError(
                f"block {j} reaches |xi| = {outer:g} beyond Nyquist {nyq:g} while the field has content there"
            )


def project_block(fld, j, bank=DEFAULT_BANK, homogeneous=True):
    """``Delta_j`` applied to a dense field."""
    _check_block_resolvable(fld, j, bank, homogeneous)
    mult = bank.block_multiplier(j, fld.kmag(), homogeneous)
    return fld.with_coeffs(fld.coeffs * mult)


def block_lp_norms(fld, ps, oversample=1):
    """L^p norms (p in ``ps``) of the inverse transform over one period.

    The vector magnitude is pointwise Euclidean.  p = 2 uses Parseval; other
    exponents sample the (optionally zero-padded) grid; p = inf is the grid max.
    """
    if fld.touches_nyquist():
        raise ResolutionError("field support touches the Nyquist ring; L^p values would alias")
    out = {}
    need_grid = [p for p in ps if p != 2]
    if 2 in ps or 2.0 in ps:
        out[2.0] = fld.l2_norm()
    if need_grid:
        vals = fld.to_physical(oversample)
        mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
        cell = np.prod([L / (n * oversample) for L, n in zip(fld.period, fld.shape)])
        for p in need_grid:
            p = float(p)
            if math.isinf(p):
                out[p] = float(mag.max())
            elif p == 1.0:
                out[p] = float(mag.sum() * cell)
            else:
                top = mag.max()
                if top == 0:
                    out[p] = 0.0
                else:
                    out[p] = float(top * (np.sum((mag / top) ** p) * cell) ** (1.0 / p))
    return out


def block_lp_norm(fld, p, oversample=1):
    return block_lp_norms(fld, [p], oversample)[float(p)]


def _dense_blocks(fld, bank, homogeneous):
    radii = fld.support_radii()
    if radii is None:
        return []
    if homogeneous and radii[0] == 0.0:
        raise ValueError("homogeneous Besov norms need a mean-zero field (k = 0 coefficient present)")
    return bank.blocks_touching(radii[0], radii[1], homogeneous)


def dense_block_table(fld, ps, bank=DEFAULT_BANK, homogeneous=True, oversample=1):
    """{j: {p: ||Delta_j f||_p}} over the blocks meeting the support."""
    table = {}
    for j in _dense_blocks(fld, bank, homogeneous):
        table[j] = block_lp_norms(project_block(fld, j, bank, homogeneous), ps, oversample)
    return table


def report_from_table(table, params, d, note):
    """Assemble a NormReport from per-block L^p values of a dense field."""
    p = float(params.p)
    rows, logs = [], []
    for j in sorted(table):
        lp = table[j][p]
        l2lp = _log2(lp)
        l2w = j * params.s + l2lp
        rows.append((j, lp, _exp2(l2w)))
        logs.append((j, l2lp, l2w))
    return NormReport(params, rows, logs, note)


def report_from_log2_table(table, params, note):
    """Assemble a NormReport from ``{j: {p: log2 ||Delta_j f||_p}}``."""
    p = float(params.p)
    rows, logs = [], []
    for j in sorted(table):
        l2lp = table[j][p]
        l2w = j * params.s + l2lp
        rows.append((j, _exp2(l2lp), _exp2(l2w)))
        logs.append((j, l2lp, l2w))
    return NormReport(params, rows, logs, note)


def besov_norm(fld, params, bank=DEFAULT_BANK, oversample=1):
    """Besov norm of a dense ``SpectralField`` or a ``SparseBumpField``.

    Dense fields are projected block by block; sparse fields are reduced to
    reference-scale profiles (see ``besovlab.sparse``).
    """
    from .sparse import SparseBumpField, sparse_besov_norm

    if isinstance(fld, SparseBumpField):
        return sparse_besov_norm(fld, params, bank)
    table = dense_block_table(fld, [params.p], bank, params.homogeneous, oversample)
    if not table:
        return NormReport(params, [], [], "empty support")
    note = f"dense blocks j={min(table)}..{max(table)} on lattice {fld.shape}"
    return report_from_table(table, params, fld.dims, note)


def sobolev_norm(fld, s):
    """Inhomogeneous H^s norm ``(sum (1+|xi|^2)^s |c_k|^2 / volume)^(1/2)``."""
    if not isinstance(fld, SpectralField):
        raise TypeError("sobolev_norm needs a dense SpectralField")
    if fld.touches_nyquist():
        raise ResolutionError("field support touches the Nyquist ring")
    w = (1.0 + fld.kmag() ** 2) ** s
    return float(np.sqrt(np.sum(w * np.abs(fld.coeffs) ** 2) / fld.volume))

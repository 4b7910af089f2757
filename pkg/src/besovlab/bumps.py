"""Anisotropic plateau bumps supported on frequency cuboids."""

from dataclasses import dataclass

import numpy as np

from .smooth import smoothstep

__all__ = ["CuboidSpec", "BumpProfile", "build_bump_profile", "MULTIPLIERS", "companion_cutoff"]


@dataclass(frozen=True)
class CuboidSpec:
    """Per-axis support and plateau intervals of a tensor-product bump.

    ``long_axis`` is 0-based: the psi-hat cuboid has its O(1) side on axis 1
    (the second coordinate), the phi-hat cuboid on axis 0.
    """

    axis_ranges: tuple
    plateau_ranges: tuple
    long_axis: int

    def __post_init__(self):
        if len(self.axis_ranges) != len(self.plateau_ranges):
            raise ValueError("axis_ranges and plateau_ranges differ in dimension")
        for (a, b), (pa, pb) in zip(self.axis_ranges, self.plateau_ranges):
            if not pa < pb:
                raise ValueError(f"degenerate plateau [{pa}, {pb}]")
            if not (a < pa and pb < b):
                raise ValueError(f"plateau [{pa}, {pb}] must lie strictly inside [{a}, {b}]")
        if not 0 <= self.long_axis < self.dims:
            raise ValueError(f"long_axis {self.long_axis} out of range for d={self.dims}")

    @property
    def dims(self):
        return len(self.axis_ranges)

    @classmethod
    def standard(cls, d, lam, long_axis):
        """Range [1, 2] (plateau [5/4, 7/4]) on ``long_axis``, [lam, 2 lam] elsewhere."""
        ranges, plateaus = [], []
        for i in range(d):
            s = 1.0 if i == long_axis else lam
            ranges.append((s, 2.0 * s))
            plateaus.append((1.25 * s, 1.75 * s))
        return cls(tuple(ranges), tuple(plateaus), long_axis)

    def radial_range(self):
        lo2 = hi2 = 0.0
        for a, b in self.axis_ranges:
            lo2 += 0.0 if a <= 0.0 <= b else min(a * a, b * b)
            hi2 += max(a * a, b * b)
        return float(np.sqrt(lo2)), float(np.sqrt(hi2))

    def widths(self):
        return tuple(b - a for a, b in self.axis_ranges)


@dataclass(frozen=True)
class BumpProfile:
    """Tensor product of 1-D plateau functions; optionally symmetrized.

    With ``hermitian=True`` the profile is ``(P(xi) + P(-xi)) / 2`` so that the
    inverse transform is the real part of the one-sided function.
    """

    spec: CuboidSpec
    order: int = 7
    kind: str = "poly"
    hermitian: bool = False
    name: str = ""

    @property
    def dims(self):
        return self.spec.dims

    def one_sided(self, xi):
        out = 1.0
        for x, (a, b), (pa, pb) in zip(xi, self.spec.axis_ranges, self.spec.plateau_ranges):
            x = np.asarray(x, dtype=float)
            rise = smoothstep((x - a) / (pa - a), self.order, self.kind)
            fall = smoothstep((b - x) / (b - pb), self.order, self.kind)
            out = out * (rise * fall)
        return out

    def __call__(self, xi):
        if self.hermitian:
            return 0.5 * (self.one_sided(xi) + self.one_sided([-np.asarray(x) for x in xi]))
        return self.one_sided(xi)

    def support_boxes(self):
        box = tuple(self.spec.axis_ranges)
        if self.hermitian:
            return [box, tuple((-b, -a) for a, b in box)]
        return [box]

    def radial_range(self):
        return self.spec.radial_range()

    def to_dict(self):
        return {
            "name": self.name,
            "axis_ranges": [list(r) for r in self.spec.axis_ranges],
            "plateau_ranges": [list(r) for r in self.spec.plateau_ranges],
            "long_axis": self.spec.long_axis,
            "order": self.order,
            "kind": self.kind,
            "hermitian": self.hermitian,
        }

    @classmethod
    def from_dict(cls, data):
        spec = CuboidSpec(
            tuple(tuple(r) for r in data["axis_ranges"]),
            tuple(tuple(r) for r in data["plateau_ranges"]),
            int(data["long_axis"]),
        )
        return cls(spec, int(data.get("order", 7)), data.get("kind", "poly"), bool(data.get("hermitian", False)), data.get("name", ""))


def build_bump_profile(spec, smoothness=7, kind="poly", hermitian=False, name=""):
    """Plateau bump: 1 on the plateau box, 0 outside the range box, values in [0, 1]."""
    smoothstep(0.5, smoothness, kind)
    return BumpProfile(spec, int(smoothness), kind, bool(hermitian), name)


def companion_cutoff(d, lam, long_axis=1, smoothness=7, kind="poly"):
    """Wider cutoff equal to 1 on the psi-hat range box, supported in [1/2, 3] x [lam/2, 3 lam]^(d-1).

    Diagnostic only; its derivative bounds scale like lam^-k on the thin axes.
    """
    ranges, plateaus = [], []
    for i in range(d):
        s = 1.0 if i == long_axis else lam
        ranges.append((0.5 * s, 3.0 * s))
        plateaus.append((s, 2.0 * s))
    return build_bump_profile(CuboidSpec(tuple(ranges), tuple(plateaus), long_axis), smoothness, kind, name="psi_tilde")


def _one(xi, mask):
    return np.ones_like(mask, dtype=float)


def _neg_ratio(xi, mask):
    # -xi_2 / xi_1 evaluated on the bump support only; zero elsewhere.
    x0 = np.broadcast_to(np.asarray(xi[0], dtype=float), mask.shape)
    x1 = np.broadcast_to(np.asarray(xi[1], dtype=float), mask.shape)
    out = np.zeros(mask.shape)
    out[mask] = -x1[mask] / x0[mask]
    return out


def _zero(xi, mask):
    return np.zeros(mask.shape)


MULTIPLIERS = {"one": _one, "neg_ratio": _neg_ratio, "zero": _zero}

"""Spectral fields on a periodic lattice and the SFLD1 binary format.

Conventions
-----------
A field on the torus with period ``L_i`` per axis is stored through its
unnormalized Fourier coefficients

    c_k = integral over one period of f(x) exp(-i xi_k . x) dx,   xi_k = 2 pi k / L,

so that ``f(x) = (1 / volume) * sum_k c_k exp(i xi_k . x)``.  For a function
localized inside one period, ``c_k`` coincides with the whole-space transform
``f_hat(xi_k)`` taken with the same sign convention, and the physical values
agree with ``(2 pi)^-d * integral f_hat(xi) exp(i xi . x) dxi``.

Coefficient arrays have shape ``(components, n_1, ..., n_d)`` in numpy FFT
index order.
"""

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ResolutionError",
    "SpectralField",
    "write_sfld",
    "read_sfld",
    "SFLD_MAGIC",
]

SFLD_MAGIC = b"SFLD"
SFLD_VERSION = 1


class ResolutionError(ValueError):
    """The lattice cannot represent the requested frequencies without aliasing."""


@dataclass
class SpectralField:
    """Complex Fourier coefficients of a scalar or vector field on a torus.

    Parameters
    ----------
    coeffs : ndarray, complex, shape (components, *shape)
    period : tuple of float
        Physical period per axis.
    real : bool
        Flag declaring the field real-valued (Hermitian coefficients).
    divergence_free : bool
        Flag declaring a d-component vector field solenoidal.
    """

    coeffs: np.ndarray
    period: tuple
    real: bool = False
    divergence_free: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim < 2:
            raise ValueError("coeffs must have shape (components, *shape)")
        self.period = tuple(float(p) for p in np.broadcast_to(self.period, (self.dims,)))
        if any(p <= 0 for p in self.period):
            raise ValueError(f"periods must be positive, got {self.period}")

    # -- construction ---------------------------------------------------

    @classmethod
    def zeros(cls, shape, period, components=1, **flags):
        shape = tuple(int(n) for n in shape)
        return cls(np.zeros((components,) + shape, dtype=complex), period, **flags)

    @classmethod
    def from_physical(cls, values, period, **flags):
        """Build from grid samples, shape ``(components, *shape)``."""
        values = np.asarray(values)
        axes = tuple(range(1, values.ndim))
        shape = values.shape[1:]
        period = tuple(float(p) for p in np.broadcast_to(period, (len(shape),)))
        cell = np.prod([p / n for p, n in zip(period, shape)])
        coeffs = np.fft.fftn(values, axes=axes) * cell
        if "real" not in flags:
            flags["real"] = bool(np.isrealobj(values))
        return cls(coeffs, period, **flags)

    @classmethod
    def single_mode(cls, shape, period, k, amplitude=1.0, components=1, component=0):
        """The field ``amplitude * exp(i xi_k . x)`` in one component.

        ``k`` is the integer wavevector; ``amplitude`` is the physical amplitude.
        """
        f = cls.zeros(shape, period, components=components)
        idx = tuple(int(ki) % n for ki, n in zip(k, f.shape))
        f.coeffs[(component,) + idx] = amplitude * f.volume
        return f

    # -- geometry -------------------------------------------------------

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def dims(self):
        return self.coeffs.ndim - 1

    @property
    def component_count(self):
        return self.coeffs.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.period))

    def integer_wavenumbers(self):
        return [np.fft.fftfreq(n, d=1.0 / n) for n in self.shape]

    def wavevectors(self):
        """Per-axis angular frequencies ``2 pi k / L`` broadcastable to ``shape``."""
        if "kvec" not in self._cache:
            ks = []
            for axis, (n, L) in enumerate(zip(self.shape, self.period)):
                k = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
                view = [1] * self.dims
                view[axis] = n
                ks.append(k.reshape(view))
            self._cache["kvec"] = ks
        return self._cache["kvec"]

    def kmag(self):
        if "kmag" not in self._cache:
            self._cache["kmag"] = np.sqrt(sum(k**2 for k in self.wavevectors()))
        return self._cache["kmag"]

    def nyquist(self):
        """Smallest per-axis Nyquist angular frequency ``pi n / L``."""
        return min(np.pi * n / L for n, L in zip(self.shape, self.period))

    def with_coeffs(self, coeffs, **flags):
        kw = dict(real=self.real, divergence_free=self.divergence_free)
        kw.update(flags)
        out = SpectralField(coeffs, self.period, **kw)
        if out.shape == self.shape and "kvec" in self._cache:
            out._cache["kvec"] = self._cache["kvec"]
        return out

    # -- physical space -------------------------------------------------

    def to_physical(self, oversample=1):
        """Grid values, optionally on a zero-padded (finer) grid."""
        coeffs = self.coeffs
        if oversample != 1:
            coeffs = _zero_pad(coeffs, int(oversample))
        shape = coeffs.shape[1:]
        axes = tuple(range(1, coeffs.ndim))
        return np.fft.ifftn(coeffs, axes=axes) * (np.prod(shape) / self.volume)

    def grid(self, oversample=1):
        """Physical sample coordinates, one array per axis (ij indexing)."""
        axes = [np.arange(n * oversample) * (L / (n * oversample)) for n, L in zip(self.shape, self.period)]
        return np.meshgrid(*axes, indexing="ij")

    # -- diagnostics ----------------------------------------------------

    def support_mask(self, rel_tol=1e-14):
        mag = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))
        top = mag.max() if mag.size else 0.0
        if top == 0.0:
            return np.zeros(self.shape, dtype=bool)
        return mag > rel_tol * top

    def support_radii(self, rel_tol=1e-14):
        """(min, max) of |xi| over the non-negligible coefficients, or None."""
        mask = self.support_mask(rel_tol)
        if not mask.any():
            return None
        r = self.kmag()[mask]
        return float(r.min()), float(r.max())

    def touches_nyquist(self, rel_tol=1e-14):
        mask = self.support_mask(rel_tol)
        for axis, n in enumerate(self.shape):
            if n % 2 == 0 and np.take(mask, n // 2, axis=axis).any():
                return True
        return False

    def hermitian_residual(self):
        """max |c(-k) - conj(c(k))| relative to max |c|."""
        c = self.coeffs
        flipped = c
        for axis in range(1, c.ndim):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        top = np.abs(c).max()
        return float(np.abs(flipped - np.conj(c)).max() / top) if top > 0 else 0.0

    def divergence_residual(self):
        """max_k |k . c(k)| / |c(k)| over non-negligible modes (vector fields)."""
        if self.component_count != self.dims:
            raise ValueError("divergence needs a d-component field")
        div = sum(k * c for k, c in zip(self.wavevectors(), self.coeffs))
        mag = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0)) * np.maximum(self.kmag(), 1e-300)
        mask = self.support_mask()
        if not mask.any():
            return 0.0
        return float((np.abs(div)[mask] / mag[mask]).max())

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) / self.volume))

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs, real=self.real and other.real)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs, real=self.real and other.real)

    def scaled(self, factor):
        return self.with_coeffs(self.coeffs * factor)


def _check_compatible(a, b):
    if a.coeffs.shape != b.coeffs.shape or not np.allclose(a.period, b.period):
        raise ValueError("fields live on different lattices")


def _zero_pad(coeffs, factor):
    """Embed FFT-ordered coefficients into a grid ``factor`` times larger."""
    shape = coeffs.shape[1:]
    new_shape = tuple(n * factor for n in shape)
    out = np.zeros((coeffs.shape[0],) + new_shape, dtype=complex)
    slices_src = []
    slices_dst = []
    for n, m in zip(shape, new_shape):
        half = n // 2
        # non-negative frequencies 0..half-1 and negative -half..-1
        slices_src.append((slice(0, half), slice(n - half, n)))
        slices_dst.append((slice(0, half), slice(m - half, m)))
        if n % 2:
            slices_src[-1] = (slice(0, half + 1), slice(n - half, n))
            slices_dst[-1] = (slice(0, half + 1), slice(m - half, m))
    for choice in itertools.product((0, 1), repeat=len(shape)):
        src = (slice(None),) + tuple(slices_src[a][c] for a, c in enumerate(choice))
        dst = (slice(None),) + tuple(slices_dst[a][c] for a, c in enumerate(choice))
        out[dst] = coeffs[src]
    return out


# -- SFLD1 ----------------------------------------------------------------


def write_sfld(path, fld):
    """Write ``fld`` in the little-endian SFLD1 layout.

    Layout: magic ``b"SFLD"``, uint32 version (=1), uint32 d, d x uint64 extents,
    d x float64 periods, uint32 component count, uint8 real flag, then
    ``components * prod(shape)`` complex128 values (re, im interleaved) in
    row-major wavevector (FFT index) order.
    """
    d = fld.dims
    header = struct.pack("<4sII", SFLD_MAGIC, SFLD_VERSION, d)
    header += struct.pack(f"<{d}Q", *fld.shape)
    header += struct.pack(f"<{d}d", *fld.period)
    header += struct.pack("<IB", fld.component_count, 1 if fld.real else 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fld.coeffs, dtype="<c16").tobytes())


def read_sfld(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic, version, d = struct.unpack_from("<4sII", data, 0)
    if magic != SFLD_MAGIC:
        raise ValueError(f"not an SFLD file (magic {magic!r})")
    if version != SFLD_VERSION:
        raise ValueError(f"unsupported SFLD version {version}")
    off = 12
    shape = struct.unpack_from(f"<{d}Q", data, off)
    off += 8 * d
    period = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    ncomp, real = struct.unpack_from("<IB", data, off)
    off += 5
    count = ncomp * int(np.prod(shape))
    coeffs = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape((ncomp,) + tuple(shape))
    return SpectralField(coeffs.astype(complex), period, real=bool(real))

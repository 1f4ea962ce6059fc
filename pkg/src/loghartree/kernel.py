"""The 2D logarithmic convolution kernel k(z) = ln|z| / (2 pi).

Two discretisations of the same kernel are provided, both stored as a table
over the doubled ``2N x 2N`` displacement lattice and applied by zero-padded
(aperiodic) FFT convolution:

``"spectral"`` (default)
    Table obtained from the exact Fourier transform of the kernel truncated to
    a disc larger than the box diameter.  For smooth, resolved densities the
    resulting quadrature of the double integral is spectrally accurate, and in
    particular it reproduces the exact dilation law of the log kernel.

``"point"``
    Point values ln|z| / (2 pi) at nonzero displacements, the cell average of
    ln|z| / (2 pi) at zero displacement.  Second-order accurate; kept for
    cross-checking against brute-force double sums.

The split kernels k1 = ln(1 + |z|) / (2 pi) >= 0 and k2 = k1 - k are only used
for diagnostics and are built on first use.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import integrate as sint
from scipy.special import j0, j1

from .grid import GridSpec, integrate

TWO_PI = 2.0 * np.pi

# Truncation radius of the spectral kernel in units of the box diameter, and
# the oversampling of the periodic domain used to sample its transform.  The
# periodic domain must exceed truncation radius + box diameter.
TRUNCATION_FACTOR = 1.5
OVERSAMPLING = 4


# ----------------------------------------------------------- cell averages

def _radial_primitive_log(rho):
    # int_0^rho r ln r dr
    return 0.5 * rho**2 * np.log(rho) - 0.25 * rho**2


def _radial_primitive_log1p(rho):
    # int_0^rho r ln(1 + r) dr
    return 0.5 * (rho**2 - 1.0) * np.log1p(rho) - 0.25 * rho**2 + 0.5 * rho


def cell_average(h: float, which: str = "log") -> float:
    """(1/h^2) int over [-h/2, h/2]^2 of F(|z|) / (2 pi), F = ln or ln(1 + .).

    The square is split into 8 congruent triangles with a vertex at the
    origin; the radial integral is done in closed form and the angular one by
    adaptive Gauss-Kronrod quadrature.
    """
    prim = {"log": _radial_primitive_log, "log1p": _radial_primitive_log1p}[which]
    a = 0.5 * h
    val, _ = sint.quad(lambda th: prim(a / np.cos(th)), 0.0, np.pi / 4, epsabs=0.0, epsrel=1e-13, limit=200)
    return 8.0 * val / (h * h) / TWO_PI


def truncated_log_transform(k: np.ndarray, radius: float) -> np.ndarray:
    """Fourier transform of ln|z| / (2 pi) restricted to |z| < radius.

    Closed form  R ln R J1(kR) / k + (J0(kR) - 1) / k^2,  with the k = 0 limit
    R^2 ln R / 2 - R^2 / 4.
    """
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    nz = k > 0
    kk = k[nz]
    kr = kk * radius
    out[nz] = radius * np.log(radius) * j1(kr) / kk + (j0(kr) - 1.0) / kk**2
    out[~nz] = 0.5 * radius**2 * np.log(radius) - 0.25 * radius**2
    return out


def spectral_parameters(spec: GridSpec) -> tuple[float, int]:
    """(truncation radius, oversampled lattice size) for the spectral table."""
    diameter = 2.0 * np.sqrt(2.0) * spec.half_width
    return TRUNCATION_FACTOR * diameter, OVERSAMPLING * spec.n


def _displacements(spec: GridSpec) -> np.ndarray:
    """Integer displacements of the doubled lattice in FFT order."""
    m = np.arange(2 * spec.n)
    return np.where(m < spec.n, m, m - 2 * spec.n)


def _point_table(spec: GridSpec, which: str = "log") -> np.ndarray:
    d = _displacements(spec) * spec.h
    r = np.hypot(d[:, None], d[None, :])
    with np.errstate(divide="ignore"):
        tab = (np.log(r) if which == "log" else np.log1p(r)) / TWO_PI
    tab[0, 0] = cell_average(spec.h, which)
    return tab


def _spectral_table(spec: GridSpec) -> np.ndarray:
    radius, m = spectral_parameters(spec)
    k = TWO_PI * sfft.fftfreq(m, d=spec.h)
    ghat = truncated_log_transform(np.hypot(k[:, None], k[None, :]), radius)
    full = sfft.ifft2(ghat).real / spec.h**2
    idx = _displacements(spec) % m
    return np.ascontiguousarray(full[np.ix_(idx, idx)])


def spectral_table_direct(spec: GridSpec) -> np.ndarray:
    """Same table as the spectral method, summed explicitly (no FFT).

    Cost O(M^2 N); intended for small test grids only.
    """
    radius, m = spectral_parameters(spec)
    k = TWO_PI * sfft.fftfreq(m, d=spec.h)
    ghat = truncated_log_transform(np.hypot(k[:, None], k[None, :]), radius)
    d = _displacements(spec) * spec.h
    e = np.exp(1j * np.outer(d, k))
    return (e @ ghat @ e.T).real / (m * m * spec.h**2)


# ------------------------------------------------------------------ table

@dataclass(frozen=True, eq=False)
class KernelTable:
    spec: GridSpec
    method: str
    k: np.ndarray

    @cached_property
    def k_hat(self) -> np.ndarray:
        return sfft.rfft2(self.k)

    @cached_property
    def k1(self) -> np.ndarray:
        return _point_table(self.spec, "log1p")

    @cached_property
    def k2(self) -> np.ndarray:
        return self.k1 - self.k

    @cached_property
    def k1_hat(self) -> np.ndarray:
        return sfft.rfft2(self.k1)

    @cached_property
    def k2_hat(self) -> np.ndarray:
        return sfft.rfft2(self.k2)

    @cached_property
    def used_mask(self) -> np.ndarray:
        """Table entries reachable by displacements between grid nodes."""
        m = np.abs(_displacements(self.spec)) < self.spec.n
        return m[:, None] & m[None, :]


def build_kernel(spec: GridSpec, method: str = "spectral", split: bool = False) -> KernelTable:
    if method == "spectral":
        tab = _spectral_table(spec)
    elif method == "point":
        tab = _point_table(spec)
    else:
        raise ValueError(f"unknown kernel method {method!r}")
    table = KernelTable(spec, method, tab)
    table.k_hat
    if split:
        table.k1_hat, table.k2_hat
    return table


# ------------------------------------------------------------- convolution

def convolve(f: np.ndarray, table: KernelTable, which: str = "k") -> np.ndarray:
    """h^2 * sum_j K(x_i - y_j) f_j at the grid nodes (aperiodic)."""
    spec = table.spec
    n = spec.n
    khat = {"k": table.k_hat, "k1": table.k1_hat, "k2": table.k2_hat}[which]
    fk = sfft.rfft2(f, s=(2 * n, 2 * n))
    return sfft.irfft2(fk * khat, s=(2 * n, 2 * n))[:n, :n] * spec.h**2


def log_potential(f: np.ndarray, table: KernelTable) -> np.ndarray:
    """w_f = -(1/2 pi) ln|.| * f, so that -Laplacian w_f = f."""
    return -convolve(f, table)


def _form(f, g, table, which):
    if not f.any() or not g.any():
        return 0.0
    return integrate(table.spec, g * convolve(f, table, which))


def i0(f: np.ndarray, g: np.ndarray, table: KernelTable) -> float:
    return _form(f, g, table, "k")


def i1(f: np.ndarray, g: np.ndarray, table: KernelTable) -> float:
    return _form(f, g, table, "k1")


def i2(f: np.ndarray, g: np.ndarray, table: KernelTable) -> float:
    return _form(f, g, table, "k2")


# ------------------------------------------------------------------ oracles

MAX_ORACLE_N = 32


def direct_i0_oracle(f: np.ndarray, g: np.ndarray, spec: GridSpec, method: str = "point") -> float:
    """Brute-force h^4 sum_ij K(x_i - y_j) f_i g_j, no FFTs involved.

    ``method="point"`` evaluates ln|x - y| / (2 pi) pairwise with the exact cell
    average on the diagonal; ``method="spectral"`` sums the truncated-kernel
    Fourier series explicitly for every displacement.
    """
    if spec.n > MAX_ORACLE_N:
        raise ValueError(f"direct oracle refused for N={spec.n} > {MAX_ORACLE_N}")
    idx = np.arange(spec.n)
    di = (idx[:, None] - idx[None, :]).ravel()  # i - i'
    if method == "point":
        x = spec.coords
        d1 = (x[:, None] - x[None, :]).ravel()
        r = np.hypot(d1[:, None], d1[None, :])
        with np.errstate(divide="ignore"):
            kmat = np.log(r) / TWO_PI
        kmat[r == 0] = cell_average(spec.h)
    elif method == "spectral":
        tab = spectral_table_direct(spec)
        kmat = tab[np.ix_(di % (2 * spec.n), di % (2 * spec.n))]
    else:
        raise ValueError(f"unknown kernel method {method!r}")
    # kmat[(i, i'), (j, j')] = K(x_{i j} - x_{i' j'}); reorder to (i j) x (i' j')
    n = spec.n
    kmat = kmat.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
    fv, gv = f.ravel(), g.ravel()
    # symmetrised so that swapping the arguments is bitwise neutral
    return float(spec.h**4 * 0.5 * ((fv @ kmat) @ gv + (gv @ kmat) @ fv))


def potential_at(points: np.ndarray, f: np.ndarray, spec: GridSpec, chunk: int = 256) -> np.ndarray:
    """Direct quadrature of w_f at arbitrary points (ln|x - y| point values)."""
    x1, x2 = spec.mesh
    src = f.ravel() != 0
    y1, y2, fy = x1.ravel()[src], x2.ravel()[src], f.ravel()[src]
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk]
        r = np.hypot(p[:, :1] - y1[None, :], p[:, 1:] - y2[None, :])
        out[s:s + chunk] = -np.log(r) @ fy
    return out * spec.h**2 / TWO_PI


def farfield_check(f: np.ndarray, table: KernelTable, radii, n_angles: int = 64) -> list[tuple[float, float]]:
    """Defect |w_f(x) + (m / 2 pi) ln|x||, maximised over a circle of each radius."""
    spec = table.spec
    m = integrate(spec, f)
    theta = TWO_PI * (np.arange(n_angles) + 0.5) / n_angles
    rows = []
    for r in radii:
        if not 0 < r < spec.half_width:
            raise ValueError(f"radius {r} outside (0, L={spec.half_width})")
        pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        w = potential_at(pts, f, spec)
        rows.append((float(r), float(np.max(np.abs(w + m * np.log(r) / TWO_PI)))))
    return rows

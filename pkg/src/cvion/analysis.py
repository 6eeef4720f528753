"""Measurement layer: fidelity, Wigner quasi-probability, phonon statistics, leakage.

Wigner convention follows the package quadratures X = (a + a^dag)/sqrt(2),
P = i(a^dag - a)/sqrt(2): the vacuum is W(x, p) = exp(-x^2 - p^2)/pi and a
coherent state |alpha> peaks at (sqrt(2) Re alpha, sqrt(2) Im alpha).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .fock import DenseOperator, DensityMatrix, FockVector, LayoutMismatchError, ladder

QUADRATURE_CONVENTION = "X=(a+adag)/sqrt2, P=i(adag-a)/sqrt2, hbar=1"


@dataclass(frozen=True)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # shape (len(x_axis), len(p_axis))

    def integral(self) -> float:
        dx = float(self.x_axis[1] - self.x_axis[0])
        dp = float(self.p_axis[1] - self.p_axis[0])
        return float(self.values.sum() * dx * dp)

    def min_value(self) -> float:
        return float(self.values.min())

    def value_at(self, x: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.x_axis - x)))
        j = int(np.argmin(np.abs(self.p_axis - p)))
        return float(self.values[i, j])


def _as_density(state) -> np.ndarray:
    if isinstance(state, FockVector):
        if len(state.layout) != 1:
            raise LayoutMismatchError("single-mode state required (reduce first)")
        v = state.amplitudes
        return np.outer(v, v.conj())
    if isinstance(state, DensityMatrix):
        if len(state.layout) != 1:
            raise LayoutMismatchError("single-mode state required (reduce first)")
        return state.entries
    raise TypeError(f"unsupported state type {type(state)!r}")


def fidelity(a, b: FockVector) -> float:
    """|<a|b>|^2 for pure a, <b|rho_a|b> for mixed a; b must be pure."""
    if isinstance(a, FockVector):
        if a.layout != b.layout:
            raise LayoutMismatchError(f"{a.layout} vs {b.layout}")
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    if isinstance(a, DensityMatrix):
        if a.layout != b.layout:
            raise LayoutMismatchError(f"{a.layout} vs {b.layout}")
        val = np.vdot(b.amplitudes, a.entries @ b.amplitudes)
        return float(val.real)
    raise TypeError(f"unsupported state type {type(a)!r}")


def wigner(
    state,
    x_range: tuple[float, float] = (-5.0, 5.0),
    p_range: tuple[float, float] = (-5.0, 5.0),
    resolution: int = 201,
) -> WignerGrid:
    """W(x, p) from the Fock-basis density matrix via the Laguerre kernel."""
    rho = _as_density(state)
    n_dim = rho.shape[0]
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ps = np.linspace(p_range[0], p_range[1], resolution)
    xg, pg = np.meshgrid(xs, ps, indexing="ij")
    r2 = xg**2 + pg**2
    amp = xg - 1j * pg  # conjugated phase-space point, so coherent peaks land at +sqrt2 Re alpha
    envelope = np.exp(-r2) / math.pi
    w = np.zeros_like(r2)
    for m in range(n_dim):
        for n in range(m + 1):
            c = rho[m, n]
            if m != n and abs(c) < 1e-16:
                continue
            # <n| parity-displacement kernel |m> for m >= n
            pref = (-1.0) ** n * math.exp(
                0.5 * (math.log(2.0) * (m - n) + gammaln(n + 1) - gammaln(m + 1))
            )
            kern = pref * amp ** (m - n) * eval_genlaguerre(n, m - n, 2.0 * r2)
            term = c * kern
            if m == n:
                w += term.real
            else:
                w += 2.0 * term.real
    return WignerGrid(xs, ps, envelope * w)


def mean_phonon(state) -> float:
    """Expectation of the number operator on a single-mode state."""
    rho = _as_density(state)
    return float(np.real(np.trace(rho @ ladder(rho.shape[0], "number").entries)))


def leakage(state, top_fraction: float = 0.1) -> float:
    """Total population in the top ceil(fraction * N) Fock levels."""
    rho = _as_density(state)
    n_dim = rho.shape[0]
    k = max(1, math.ceil(top_fraction * n_dim))
    pops = np.real(np.diag(rho))
    return float(pops[n_dim - k:].sum())


def wigner_to_csv(grid: WignerGrid, path) -> None:
    """Serialize a grid as rows of (x, p, W)."""
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "p", "W"])
        for i, x in enumerate(grid.x_axis):
            for j, p in enumerate(grid.p_axis):
                writer.writerow([repr(float(x)), repr(float(p)), repr(float(grid.values[i, j]))])


def wigner_to_json(grid: WignerGrid, path, description: str = "") -> None:
    """JSON envelope with metadata; values row-major over (x, p)."""
    payload = {
        "schema_version": 1,
        "description": description,
        "convention": QUADRATURE_CONVENTION,
        "x_axis": [float(v) for v in grid.x_axis],
        "p_axis": [float(v) for v in grid.p_axis],
        "values": [[float(v) for v in row] for row in grid.values],
    }
    Path(path).write_text(json.dumps(payload))

"""Coupling-strength distributions, averaged spectra and background subtraction."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import find_peaks

from mpcspec.params import SystemParams
from mpcspec.steady import POSITIVITY_TOL, NPCR_CLAMP, normal_power, solve_steady

log = logging.getLogger(__name__)

WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class CouplingDistribution:
    """Discrete ``P(g)`` as ascending nodes with non-negative weights summing to one."""

    g: np.ndarray
    weights: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if g.ndim != 1 or g.shape != w.shape or len(g) == 0:
            raise ValueError("g and weights must be non-empty 1-D arrays of equal length")
        if np.any(g < 0) or np.any(np.diff(g) <= 0):
            raise ValueError("g nodes must be >= 0 and strictly ascending")
        if np.any(w < 0):
            raise ValueError("weights must be >= 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.g)

    def nodes(self) -> list[tuple[float, float]]:
        return list(zip(self.g.tolist(), self.weights.tolist()))


def _normalized(g, w, kind, metadata=None) -> CouplingDistribution:
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(g, kind="stable")
    g, w = g[order], w[order]
    w = w / w.sum()
    # absorb the last rounding ulp so the sum is 1 to machine precision
    w[-1] = 1.0 - w[:-1].sum()
    return CouplingDistribution(g, w, kind, dict(metadata or {}))


def pg_delta(g_f: float) -> CouplingDistribution:
    return CouplingDistribution(np.array([float(g_f)]), np.array([1.0]), "delta", {"g_f": g_f})


def pg_tem00(g_max: float, mask=(0.25, 1.0), waist: float = 1.0, wavelength: float = 1.0,
             node_count: int = 24, samples: int = 400) -> CouplingDistribution:
    """Coupling seen by an atom placed uniformly inside a rectangular mask.

    The mode function is ``g(x, y) = g_max cos(2 pi x / wavelength) exp(-y^2 / waist^2)``
    with ``x`` along the cavity axis (antinode at 0) and ``y`` transverse.
    ``mask = (x_half, y_half)`` bounds the atom positions; ``x_half`` must stay
    within the antinode region ``|x| <= wavelength / 4``.  Positions are sampled
    on a ``samples x samples`` midpoint grid, and the resulting couplings are
    binned into ``node_count`` equal bins on ``[0, g_max]``; each node sits at
    the mean coupling of its bin.
    """
    x_half, y_half = (float(v) for v in mask)
    if not g_max > 0:
        raise ValueError("g_max must be > 0")
    if not (x_half > 0 and y_half > 0):
        raise ValueError("mask is empty: both half-widths must be > 0")
    if x_half > wavelength / 4 * (1 + 1e-12):
        raise ValueError("mask extends beyond one standing-wave antinode region")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    meta = {"g_max": g_max, "mask": (x_half, y_half), "waist": waist, "wavelength": wavelength,
            "node_count": node_count, "samples": samples}
    unit = (np.arange(samples) + 0.5) / samples * 2 - 1
    x = x_half * unit
    y = y_half * unit
    gx = np.abs(np.cos(2 * np.pi * x / wavelength))
    gy = np.exp(-(y**2) / waist**2)
    gs = (g_max * np.outer(gx, gy)).ravel()
    edges = np.linspace(0.0, g_max, node_count + 1)
    which = np.clip(np.searchsorted(edges, gs, side="right") - 1, 0, node_count - 1)
    counts = np.bincount(which, minlength=node_count).astype(float)
    sums = np.bincount(which, weights=gs, minlength=node_count)
    nz = counts > 0
    return _normalized(sums[nz] / counts[nz], counts[nz], "tem00", meta)


def pg_table(path, warn_tol: float = WEIGHT_TOL) -> CouplingDistribution:
    """Read a two-column CSV of ``g, weight`` (``#`` comments and a header row allowed)."""
    gs, ws = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                g, w = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not gs:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: expected 'g, weight', got {row!r}") from None
            gs.append(g)
            ws.append(w)
    if not gs:
        raise ValueError(f"{path}: no (g, weight) rows")
    total = sum(ws)
    if not total > 0:
        raise ValueError(f"{path}: weights must have a positive sum")
    if abs(total - 1.0) > warn_tol:
        log.warning("%s: weights sum to %.9g; renormalizing", path, total)
    return _normalized(gs, ws, "tabulated", {"path": str(path)})


def mix(d1: CouplingDistribution, d2: CouplingDistribution, alpha: float) -> CouplingDistribution:
    """``alpha * d1 + (1 - alpha) * d2`` on the union of nodes."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    acc: dict[float, float] = {}
    for g, w in d1.nodes():
        acc[g] = acc.get(g, 0.0) + alpha * w
    for g, w in d2.nodes():
        acc[g] = acc.get(g, 0.0) + (1 - alpha) * w
    g = sorted(acc)
    return _normalized(g, [acc[x] for x in g], "mixture")


def parse_grid(spec: str | tuple) -> np.ndarray:
    """``"lo:hi:step"`` -> inclusive uniform grid rounded to 12 decimals."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like 'lo:hi:step', got {spec!r}")
        lo, hi, step = (float(x) for x in parts)
    else:
        lo, hi, step = (float(x) for x in spec)
    if not step > 0 or not hi >= lo:
        raise ValueError(f"invalid grid {spec!r}: need hi >= lo and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


class PointResult(NamedTuple):
    npcr: float
    rho00: float
    rho33pp: float
    flagged: bool


def solve_point(g: float, p: SystemParams, q: int) -> PointResult:
    """Steady-state observables at one coupling; q-truncation negativity is clamped and flagged."""
    sol = solve_steady(g, p, q)
    basis = sol.basis
    raw = float(np.real(np.trace(sol.rho0 @ normal_power(basis, p.N))))
    i = basis.index(p.N, 1)
    flagged = raw < -NPCR_CLAMP or not sol.positivity_ok
    return PointResult(
        npcr=max(raw, 0.0),
        rho00=float(sol.rho0[0, 0].real),
        rho33pp=float(sol.rho0[i, i].real),
        flagged=flagged,
    )


PointFn = Callable[[float, SystemParams, int], PointResult]


@dataclass
class Spectrum:
    delta3: np.ndarray
    npcr: np.ndarray
    rho00: np.ndarray
    rho33pp: np.ndarray
    flagged: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.delta3) > 1 and np.any(np.diff(self.delta3) <= 0):
            raise ValueError("spectrum grid must be strictly increasing")


@dataclass
class SpectrumSurface:
    delta3: np.ndarray
    g_tilde: np.ndarray
    npcr: np.ndarray
    rho00: np.ndarray
    rho33pp: np.ndarray
    flagged: np.ndarray
    provenance: dict = field(default_factory=dict)


@dataclass
class BackgroundSpectrum:
    """Four runs and their combination ``all - (E1=0) - (E2=0) + (E1=E2=0)``."""

    delta3: np.ndarray
    delta: np.ndarray
    runs: dict[str, Spectrum]
    provenance: dict = field(default_factory=dict)


BACKGROUND_RUNS = (
    ("all", {}, +1.0),
    ("E1=0", {"E1": 0.0}, -1.0),
    ("E2=0", {"E2": 0.0}, -1.0),
    ("E1=E2=0", {"E1": 0.0, "E2": 0.0}, +1.0),
)


def _row_task(delta: float, p: SystemParams, gs: tuple, ws: tuple, q: int, point_fn: PointFn):
    p_d = p.with_scan(delta)
    n = r0 = r33 = 0.0
    flagged = False
    for g, w in zip(gs, ws):
        res = point_fn(g, p_d, q)
        n += w * res.npcr
        r0 += w * res.rho00
        r33 += w * res.rho33pp
        flagged = flagged or res.flagged
    return n, r0, r33, flagged


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def average_spectrum(p: SystemParams, dist: CouplingDistribution, grid, q: int = 1,
                     workers: int = 1, point_fn: PointFn = solve_point) -> Spectrum:
    """``sum_i w_i <a^dag^N a^N>(g_i)`` (and rho00, rho33pp) over the scanned detunings."""
    grid = np.asarray(grid, dtype=float)
    task = partial(_row_task, p=p, gs=tuple(dist.g.tolist()), ws=tuple(dist.weights.tolist()),
                   q=q, point_fn=point_fn)
    rows = _pmap(task, grid.tolist(), workers)
    arr = np.array([r[:3] for r in rows], dtype=float).reshape(len(grid), 3)
    return Spectrum(
        delta3=grid,
        npcr=arr[:, 0],
        rho00=arr[:, 1],
        rho33pp=arr[:, 2],
        flagged=np.array([r[3] for r in rows], dtype=bool),
        provenance={"amps": p.amps, "distribution": dist.kind, "nodes": len(dist), "q": q},
    )


def background_subtracted(p: SystemParams, dist: CouplingDistribution, grid, q: int = 1,
                          workers: int = 1, point_fn: PointFn = solve_point) -> BackgroundSpectrum:
    grid = np.asarray(grid, dtype=float)
    runs = {}
    delta = np.zeros(len(grid))
    for name, off, sign in BACKGROUND_RUNS:
        spec = average_spectrum(p.with_amps(**off), dist, grid, q, workers, point_fn)
        runs[name] = spec
        delta = delta + sign * spec.npcr
    return BackgroundSpectrum(delta3=grid, delta=delta, runs=runs,
                              provenance={"amps": p.amps, "distribution": dist.kind, "q": q})


def _surface_task(item, p: SystemParams, q: int, point_fn: PointFn):
    g_tilde, delta = item
    return point_fn(g_tilde * p.g_f, p.with_scan(delta), q)


def surface(p: SystemParams, g_grid, d_grid, q: int = 1, workers: int = 1,
            point_fn: PointFn = solve_point) -> SpectrumSurface:
    """Single-coupling observables on the rectangular ``(g_tilde, delta_tilde)`` grid."""
    g_grid = np.asarray(g_grid, dtype=float)
    d_grid = np.asarray(d_grid, dtype=float)
    items = [(g, d) for g in g_grid.tolist() for d in d_grid.tolist()]
    res = _pmap(partial(_surface_task, p=p, q=q, point_fn=point_fn), items, workers)
    shape = (len(g_grid), len(d_grid))
    return SpectrumSurface(
        delta3=d_grid,
        g_tilde=g_grid,
        npcr=np.array([r.npcr for r in res]).reshape(shape),
        rho00=np.array([r.rho00 for r in res]).reshape(shape),
        rho33pp=np.array([r.rho33pp for r in res]).reshape(shape),
        flagged=np.array([r.flagged for r in res]).reshape(shape),
        provenance={"amps": p.amps, "q": q},
    )


class Extremum(NamedTuple):
    position: float
    value: float
    kind: str
    prominence: float


def find_extrema(values, grid, min_prominence: float = 0.0) -> list[Extremum]:
    """Interior local maxima ("peak") and minima ("dip") with at least ``min_prominence``."""
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if len(grid) > 2:
        steps = np.diff(grid)
        if np.ptp(steps) > 1e-6 * abs(steps.mean()):
            raise ValueError("find_extrema needs a uniform grid")
    out = []
    for kind, sig in (("peak", values), ("dip", -values)):
        idx, props = find_peaks(sig, prominence=min_prominence)
        for i, prom in zip(idx, props["prominences"]):
            if prom > min_prominence or (min_prominence == 0 and prom > 0):
                out.append(Extremum(float(grid[i]), float(values[i]), kind, float(prom)))
    out.sort(key=lambda e: e.position)
    return out


def nearest(extrema: list[Extremum], position: float, kind: str, tol: float) -> Extremum | None:
    """Most prominent extremum of ``kind`` within ``tol`` of ``position``."""
    cands = [e for e in extrema if e.kind == kind and abs(e.position - position) <= tol + 1e-9]
    return max(cands, key=lambda e: e.prominence) if cands else None

"""Ridge tracing, avoided crossings, quasi-BIC counting and the scaling fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from ..emission.purcell import _vertex
from .maps import PurcellMap

PROMINENCE = 1.5
DEDUP_NM = 50.0


class NoAnticrossingError(ValueError):
    pass


def row_peaks(wl, row, prominence: float = PROMINENCE):
    """Local maxima above ``prominence`` times the row median, refined by a
    three-point parabola: list of (wavelength, value)."""
    row = np.asarray(row, dtype=float)
    if not np.all(np.isfinite(row)):
        return []
    idx, _ = find_peaks(row, height=prominence * float(np.median(row)))
    out = []
    for i in idx:
        x, y = _vertex(wl[i - 1:i + 2], row[i - 1:i + 2])
        out.append((float(x), float(y)))
    return out


@dataclass
class Ridge:
    params: list = field(default_factory=list)
    wavelengths: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def add(self, p, wl, v):
        self.params.append(p)
        self.wavelengths.append(wl)
        self.values.append(v)

    def at(self, p):
        return self.wavelengths[self.params.index(p)]


    def predict(self, p):
        """Linear extrapolation of the ridge wavelength to parameter ``p``."""
        if len(self.params) < 2:
            return self.wavelengths[-1]
        (p0, p1), (w0, w1) = self.params[-2:], self.wavelengths[-2:]
        return w1 + (w1 - w0) * (p - p1) / (p1 - p0)


def trace_ridges(pmap: PurcellMap, prominence: float = PROMINENCE, max_jump_nm: float | None = None,
                 max_missing: int = 1):
    """Link per-row peaks into ridges.

    Each live ridge claims the peak nearest to its linear extrapolation,
    closest pairs first.  A ridge that finds no peak survives up to
    ``max_missing`` rows, so two lines that merge into one peak at a true
    crossing continue on their own sides.
    """
    m = pmap.sorted()
    wl = m.wavelengths_nm
    if max_jump_nm is None:
        max_jump_nm = 0.1 * (wl[-1] - wl[0])
    ridges: list[Ridge] = []
    live: list[tuple[Ridge, int]] = []
    for p, row, bad in zip(m.values, m.factor, m.failed):
        if bad:
            continue
        peaks = row_peaks(wl, row, prominence)
        pairs = sorted((abs(r.predict(p) - x), a, b) for a, (r, _) in enumerate(live)
                       for b, (x, _) in enumerate(peaks))
        used_r, used_p, nxt = set(), set(), []
        for dist, a, b in pairs:
            if a in used_r or b in used_p or dist > max_jump_nm:
                continue
            used_r.add(a)
            used_p.add(b)
            live[a][0].add(p, *peaks[b])
            nxt.append((live[a][0], 0))
        for a, (r, miss) in enumerate(live):
            if a not in used_r and miss < max_missing:
                nxt.append((r, miss + 1))
        for b, (x, v) in enumerate(peaks):
            if b not in used_p:
                r = Ridge()
                r.add(p, x, v)
                ridges.append(r)
                nxt.append((r, 0))
        live = nxt
    return ridges


@dataclass(frozen=True)
class AnticrossingReport:
    branches: tuple  # two Ridge objects, lower then upper wavelength
    center_param: float
    center_wavelength_nm: float
    gap_nm: float
    is_crossing: bool
    quasi_bic: tuple  # (param, wavelength_nm, purcell)

    def summary(self) -> str:
        p, l, f = self.quasi_bic
        kind = "crossing" if self.is_crossing else "anticrossing"
        return (f"{kind}: center_param={self.center_param:.4f} center_wavelength_nm="
                f"{self.center_wavelength_nm:.3f} gap_nm={self.gap_nm:.4f}\n"
                f"quasi_bic: param={p:.4f} wavelength_nm={l:.3f} purcell={f:.5g}\n")


def detect_avoided_crossing(pmap: PurcellMap, prominence: float = PROMINENCE,
                            crossing_tol_nm: float | None = None) -> AnticrossingReport:
    """Closest approach of two ridges.

    The pair of ridges (sharing at least three rows) with the smallest
    wavelength separation is taken as the two branches.  The centre is the
    parabolic minimum of their separation; a gap below ``crossing_tol_nm``
    (default: two wavelength samples), or rows where the two branches merge
    into one peak, flag a true crossing.  The quasi-BIC point is the highest
    ridge value among rows whose separation is within twice the gap.
    """
    m = pmap.sorted()
    wl = m.wavelengths_nm
    dwl = float(np.median(np.diff(wl)))
    tol = 2.0 * dwl if crossing_tol_nm is None else crossing_tol_nm
    ridges = trace_ridges(m, prominence)
    best = None
    for i in range(len(ridges)):
        for j in range(i + 1, len(ridges)):
            common = sorted(set(ridges[i].params) & set(ridges[j].params))
            if len(common) < 3:
                continue
            sep = np.array([abs(ridges[i].at(p) - ridges[j].at(p)) for p in common])
            k = int(np.argmin(sep))
            if best is None or sep[k] < best[0]:
                best = (float(sep[k]), i, j, common, sep, k)
    if best is None:
        raise NoAnticrossingError("no anticrossing in range")
    _, i, j, common, sep, k = best
    a, b = ridges[i], ridges[j]
    if np.mean([a.at(p) for p in common]) > np.mean([b.at(p) for p in common]):
        a, b = b, a
    params = np.array(common)
    if 0 < k < len(common) - 1:
        pc, gap = _vertex(params[k - 1:k + 2], -sep[k - 1:k + 2])
        gap = -gap
    else:
        pc, gap = params[k], sep[k]
    gap = max(float(gap), 0.0)
    center_wl = 0.5 * (a.at(common[k]) + b.at(common[k]))
    # rows inside the branches' span that hold a single merged peak
    lo, hi = max(a.params[0], b.params[0]), min(a.params[-1], b.params[-1])
    merged = any(lo < p < hi and p not in common for p, bad in zip(m.values, m.failed) if not bad)
    crossing = gap < tol or merged
    if merged:
        gap = 0.0
    near = [p for p, s in zip(common, sep) if s <= max(2.0 * sep[k], sep[k] + 2.0 * dwl)]
    cands = [(r.values[r.params.index(p)], p, r.at(p)) for r in (a, b) for p in near]
    f, p, l = max(cands)
    return AnticrossingReport((a, b), float(pc), float(center_wl), float(gap), bool(crossing),
                              (float(p), float(l), float(f)))


def count_quasi_bic(pmap: PurcellMap, window_nm, threshold: float, min_separation: float = DEDUP_NM):
    """Distinct local maxima of the map above ``threshold`` in a wavelength window.

    A cell counts when it is the largest of its 3x3 neighbourhood; maxima
    closer than ``min_separation`` along the swept axis are merged, keeping
    the highest.  Returns ``(count, [(param, wavelength_nm, purcell), ...])``.
    """
    m = pmap.sorted().window(*window_nm)
    f = np.where(np.isfinite(m.factor), m.factor, -np.inf)
    n, k = f.shape
    if n == 0 or k == 0:
        return 0, []
    pad = np.pad(f, 1, constant_values=-np.inf)
    is_max = np.ones_like(f, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= f >= pad[1 + di:1 + di + n, 1 + dj:1 + dj + k]
    is_max &= f > threshold
    cand = sorted(((f[i, j], m.values[i], m.wavelengths_nm[j]) for i, j in zip(*np.nonzero(is_max))),
                  reverse=True)
    kept = []
    for v, p, l in cand:
        if all(abs(p - q) >= min_separation for q, _, _ in kept):
            kept.append((float(p), float(l), float(v)))
    kept.sort()
    return len(kept), kept


@dataclass(frozen=True)
class ScalingFit:
    factors: np.ndarray
    peaks_nm: np.ndarray
    slope_nm: float
    intercept_nm: float
    rms_nm: float
    excluded: tuple = ()

    def wavelength(self, s):
        return self.slope_nm * np.asarray(s) + self.intercept_nm

    def factor_for(self, wavelength_nm):
        return (np.asarray(wavelength_nm) - self.intercept_nm) / self.slope_nm

    def summary(self) -> str:
        lines = [f"slope_nm={self.slope_nm:.6f}", f"intercept_nm={self.intercept_nm:.6f}",
                 f"rms_nm={self.rms_nm:.6g}", "# s\tpeak_nm"]
        lines += [f"{s:.6g}\t{p:.4f}" for s, p in zip(self.factors, self.peaks_nm)]
        if self.excluded:
            lines.append("# excluded (resonance not found in band): " + " ".join(f"{s:g}" for s in self.excluded))
        return "\n".join(lines) + "\n"


def fit_scaling(factors, peaks_nm, excluded=()) -> ScalingFit:
    s = np.asarray(factors, dtype=float)
    p = np.asarray(peaks_nm, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least two scale factors to fit a line")
    A = np.column_stack([s, np.ones_like(s)])
    (slope, icpt), *_ = np.linalg.lstsq(A, p, rcond=None)
    rms = float(math.sqrt(np.mean((A @ [slope, icpt] - p) ** 2)))
    return ScalingFit(s, p, float(slope), float(icpt), rms, tuple(excluded))


def scaling_from_map(pmap: PurcellMap, max_miss: float = 0.02) -> ScalingFit:
    """Peak wavelength of one resonance per scale factor and the line through them.

    The resonance is the strongest peak of the row nearest ``s = 1``.  Other
    rows contribute the peak closest to the proportional prediction
    ``lambda_1 * s / s_1``, so a neighbouring mode that happens to be
    stronger in some row is not mistaken for it.  Rows with no peak within
    ``max_miss`` (relative) of the prediction, e.g. because the resonance has
    left the band, are excluded.
    """
    wl = pmap.wavelengths_nm
    found = {}
    for v, row, bad in zip(pmap.values, pmap.factor, pmap.failed):
        pk = [] if bad else row_peaks(wl, row, prominence=1.0)
        found[float(v)] = pk
    usable = [v for v, pk in found.items() if pk]
    if not usable:
        return fit_scaling([], [], tuple(found))
    s1 = min(usable, key=lambda v: abs(v - 1.0))
    lam1 = max(found[s1], key=lambda p: p[1])[0]
    s, peaks, excluded = [], [], []
    for v, pk in found.items():
        guess = lam1 * v / s1
        best = min(pk, key=lambda p: abs(p[0] - guess), default=None)
        if best is None or abs(best[0] - guess) > max_miss * guess:
            excluded.append(v)
            continue
        s.append(v)
        peaks.append(best[0])
    return fit_scaling(s, peaks, excluded)

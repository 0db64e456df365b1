"""Effective-index curves over a diameter sweep."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .solver import GuideSpec, all_modes

JUMP_GUARD = 1e-3


@dataclass
class ModeDispersion:
    wavelength_nm: float
    curves: dict = field(default_factory=dict)  # label -> (diameters_nm, n_eff)

    def labels(self):
        return list(self.curves)

    def cutoff_nm(self, label: str) -> float:
        """First swept diameter at which the mode is guided."""
        return float(self.curves[label][0][0])

    def at(self, diameter_nm: float) -> dict:
        out = {}
        for lab, (d, n) in self.curves.items():
            hit = np.nonzero(np.isclose(d, diameter_nm, rtol=0, atol=1e-9))[0]
            if hit.size:
                out[lab] = float(n[hit[0]])
        return out


def _solve(guide: GuideSpec, d: float, families) -> dict:
    modes = all_modes(guide.with_diameter(d))
    return {m.label: m.n_eff for m in modes if m.family in families}


def _max_miss(prev: dict, lo: dict, hi: dict, t: float) -> float:
    """Largest distance between ``hi`` and the linear prediction from ``prev``, ``lo``."""
    worst = 0.0
    for k in set(lo) & set(hi):
        guess = lo[k] + (lo[k] - prev[k]) * t if k in prev else lo[k]
        worst = max(worst, abs(hi[k] - guess))
    return worst


def dispersion_sweep(guide: GuideSpec, diameters_nm, families=("HE", "EH", "TE", "TM"),
                     jump_guard: float = JUMP_GUARD, max_refine: int = 2) -> ModeDispersion:
    """n_eff of every mode guided anywhere in the sweep.

    Modes are followed by their (family, l, m) label, which is stable because
    radial orders never cross inside one family and azimuthal order.  Each
    step is checked against a linear continuation of the previous two
    samples; a miss larger than ``jump_guard`` bisects the interval (at most
    ``max_refine`` times).
    """
    d = np.asarray(diameters_nm, dtype=float)
    if d.ndim != 1 or d.size == 0 or np.any(d <= 0) or np.any(np.diff(d) <= 0):
        raise ValueError("diameters must be positive and ascending")
    families = tuple(families)
    pts = [(float(d[0]), _solve(guide, d[0], families))]
    for x in d[1:]:
        stack = [(float(x), 0)]
        while stack:
            hi, depth = stack[-1]
            lo_x, lo = pts[-1]
            sol = _solve(guide, hi, families)
            prev_x, prev = pts[-2] if len(pts) > 1 else (lo_x, {})
            t = (hi - lo_x) / (lo_x - prev_x) if lo_x > prev_x else 0.0
            if depth < max_refine and _max_miss(prev, lo, sol, t) > jump_guard:
                stack[-1] = (hi, depth + 1)
                stack.append((0.5 * (lo_x + hi), depth + 1))
                continue
            pts.append((hi, sol))
            stack.pop()
    curves: dict = {}
    for x, sol in pts:
        for lab, n in sol.items():
            curves.setdefault(lab, ([], []))
            curves[lab][0].append(x)
            curves[lab][1].append(n)
    out = ModeDispersion(guide.wavelength_nm)
    order = sorted(curves, key=lambda k: (curves[k][0][0], -curves[k][1][0]))
    for lab in order:
        out.curves[lab] = (np.array(curves[lab][0]), np.array(curves[lab][1]))
    return out


def write_dispersion(path, disp: ModeDispersion):
    with open(path, "w") as fh:
        fh.write(f"# wavelength_nm={disp.wavelength_nm:g}\n# mode\tdiameter_nm\tn_eff\n")
        for lab, (d, n) in disp.curves.items():
            for x, y in zip(d, n):
                fh.write(f"{lab}\t{x:.6f}\t{y:.12f}\n")


def read_dispersion(path) -> ModeDispersion:
    wl = float("nan")
    rows: dict = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("# wavelength_nm="):
                wl = float(line.split("=", 1)[1])
            if line.startswith("#") or not line.strip():
                continue
            lab, x, y = line.split("\t")
            rows.setdefault(lab, ([], []))
            rows[lab][0].append(float(x))
            rows[lab][1].append(float(y))
    out = ModeDispersion(wl)
    for lab, (x, y) in rows.items():
        out.curves[lab] = (np.array(x), np.array(y))
    return out

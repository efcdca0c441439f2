"""CSV, metadata and SVG emission for experiment results."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from cbopt.labkit.runner import ExperimentResult, SeriesStats

HEADER = ("preset", "algorithm", "t", "mean_gap", "stderr", "trials", "seed")

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def write_csv(result: ExperimentResult, path) -> None:
    """One row per (series, t); floats use ``repr`` so re-parsing is exact."""
    if not result.series:
        raise ValueError("nothing to write")
    spec = result.spec
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for label, st in result.series.items():
            for t in range(st.T):
                w.writerow((spec.name, label, t + 1, repr(float(st.mean[t])), repr(float(st.stderr[t])), st.trials, spec.seed))


def read_csv(path) -> dict:
    """Parse a results CSV back into ``{label: SeriesStats}``, in file order."""
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != HEADER:
            raise ValueError(f"unexpected header {header}")
        for preset, label, t, mean, se, trials, seed in r:
            rows.setdefault(label, []).append((int(t), float(mean), float(se), int(trials)))
    out = {}
    for label, items in rows.items():
        items.sort()
        ts = [i[0] for i in items]
        if ts != list(range(1, len(ts) + 1)):
            raise ValueError(f"series {label} has missing iterations")
        out[label] = SeriesStats(
            label,
            np.array([i[1] for i in items]),
            np.array([i[2] for i in items]),
            items[0][3],
        )
    return out


def write_meta(result: ExperimentResult, csv_path) -> Path:
    """Sidecar ``<csv>.meta.json`` with the spec, declared defaults and timings."""
    spec = result.spec
    meta = {
        "preset": spec.name,
        "seed": spec.seed,
        "T": spec.T,
        "trials_requested": result.trials_requested,
        "threads": result.threads,
        "declared": [{"value": d, "declared": True} for d in spec.declared],
        "spec": spec.to_dict(),
        "series": {
            label: {"trials": st.trials, "aborted": st.aborted, "wall_time_s": st.wall_time}
            for label, st in result.series.items()
        },
        "wall_time_s": result.wall_time,
        "python": platform.python_version(),
    }
    path = Path(str(csv_path) + ".meta.json")
    path.write_text(json.dumps(meta, indent=2, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

W, H = 720, 460
ML, MR, MT, MB = 70, 200, 30, 50
WHISKER_EVERY = 50


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_svg(result: ExperimentResult, path, title: str | None = None) -> None:
    """log10 mean gap against t, one polyline per series, stderr whiskers every 50 steps."""
    series = list(result.series.values())
    if not series:
        raise ValueError("nothing to plot")
    floor = 1e-12
    lo_vals, hi_vals = [], []
    for st in series:
        m = np.maximum(st.mean, floor)
        lo_vals.append(np.log10(np.maximum(st.mean - st.stderr, floor)).min())
        hi_vals.append(np.log10(m + st.stderr).max())
    ylo = math.floor(min(lo_vals))
    yhi = math.ceil(max(hi_vals))
    if yhi == ylo:
        yhi += 1
    T = max(st.T for st in series)
    pw, ph = W - ML - MR, H - MT - MB

    def px(t):
        return ML + pw * (t - 1) / max(T - 1, 1)

    def py(v):
        return MT + ph * (yhi - v) / (yhi - ylo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(ylo, yhi + 1):
        y = py(k)
        out.append(f'<line x1="{ML}" y1="{y:.2f}" x2="{ML + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{ML - 6}" y="{y + 4:.2f}" text-anchor="end">1e{k}</text>')
    step = max(1, 10 ** int(math.log10(T)) // 2) if T >= 10 else 1
    for t in list(range(step, T + 1, step)):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{MT + ph}" x2="{x:.2f}" y2="{MT + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MT + ph + 16}" text-anchor="middle">{t}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">iteration t</text>')
    out.append(
        f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {MT + ph / 2})">mean relative gap</text>'
    )
    if title is None:
        title = result.spec.name
    out.append(f'<text x="{ML + pw / 2}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>')

    for i, st in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        logm = np.log10(np.maximum(st.mean, floor))
        pts = " ".join(f"{px(t + 1):.2f},{py(v):.2f}" for t, v in enumerate(logm))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        for t in range(WHISKER_EVERY, st.T + 1, WHISKER_EVERY):
            m, se = st.mean[t - 1], st.stderr[t - 1]
            y1 = py(np.log10(max(m - se, floor)))
            y2 = py(np.log10(max(m + se, floor)))
            x = px(t)
            out.append(f'<line x1="{x:.2f}" y1="{y1:.2f}" x2="{x:.2f}" y2="{y2:.2f}" stroke="{colour}"/>')
            out.append(f'<line x1="{x - 3:.2f}" y1="{y1:.2f}" x2="{x + 3:.2f}" y2="{y1:.2f}" stroke="{colour}"/>')
            out.append(f'<line x1="{x - 3:.2f}" y1="{y2:.2f}" x2="{x + 3:.2f}" y2="{y2:.2f}" stroke="{colour}"/>')
        ly = MT + 14 * i + 8
        out.append(f'<line x1="{ML + pw + 10}" y1="{ly}" x2="{ML + pw + 30}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{ML + pw + 34}" y="{ly + 4}">{_esc(st.label)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")

"""Draw the report figures with matplotlib and write them to disk.

Rendering is deterministic for fixed inputs: the Agg backend is forced,
the SVG id salt is pinned, and per-format volatile metadata (dates,
producer strings) is suppressed, so rendering the same inputs twice gives
byte-identical files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .data import FigureSpec, figure_data  # noqa: E402
from .inputs import FigureError, read_ledger, read_series  # noqa: E402

_DPI = 150

_SAVE_METADATA = {
    ".png": {"Software": None},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None, "Producer": None, "Creator": None},
}


def render(spec: FigureSpec) -> dict:
    """Validate inputs, draw the figure, write the image, return its data.

    Nothing is written when any input fails validation or the figure's
    selection comes up empty.
    """
    suffix = os.path.splitext(spec.out_path)[1].lower()
    if suffix not in _SAVE_METADATA:
        raise FigureError(
            f"unsupported output suffix {suffix!r}; use .png, .svg, or .pdf")
    entries = read_ledger(spec.ledger_path)
    series_cols = read_series(spec.series_path) if spec.series_path else None
    data = figure_data(spec.figure_id, entries, series_cols)
    fig = _DRAWERS[spec.figure_id](data)
    try:
        with plt.rc_context({"svg.hashsalt": "v2xfigs"}):
            fig.savefig(spec.out_path, dpi=_DPI,
                        metadata=_SAVE_METADATA[suffix])
    finally:
        plt.close(fig)
    return data


def _draw_nash_floor(data: dict) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    lo, hi = data["identity"]
    pad = 0.05 * (hi - lo) if hi > lo else 0.05
    ax.plot([lo, hi + pad], [lo, hi + pad], ls="--", c="0.5", lw=1,
            label="analytical = empirical")
    for p in data["points"]:
        single = p["n_m0"] == 1
        ax.scatter(p["floor"], p["median_collision"], s=45, zorder=3,
                   facecolors="none" if single else "C0", edgecolors="C0")
        ax.annotate(f"N={p['n_vehicles']}",
                    (p["floor"], p["median_collision"]),
                    textcoords="offset points", xytext=(6, -3), fontsize=8)
    ax.scatter([], [], facecolors="none", edgecolors="C0", label="single M0")
    ax.scatter([], [], facecolors="C0", edgecolors="C0", label="two or more M0")
    ax.set_xlabel("analytical floor")
    ax.set_ylabel("median M0 collision rate")
    ax.set_title("Collision rate against the random-selection floor")
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    return fig


def _draw_twin_axis(data: dict) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    ms = [p["m_subchannels"] for p in data["points"]]
    ax.plot(ms, [p["median_m0_pdr"] for p in data["points"]],
            marker="o", c="C0", label="mean M0 PDR")
    ax.axhline(data["pdr_target"], ls=":", c="0.4", lw=1,
               label=f"{data['pdr_target']:.2f} target")
    ax.set_xlabel("subchannels")
    ax.set_ylabel("mean M0 PDR")
    ax.set_ylim(0.0, 1.05)
    right = ax.twinx()
    right.plot(ms, [p["median_p05"] for p in data["points"]],
               marker="^", ls="--", c="C3", label="5th-percentile PDR")
    right.set_ylabel("worst-TTI 5th-percentile PDR")
    right.set_ylim(0.0, 1.05)
    lines = ax.get_lines() + right.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], fontsize=8,
              loc="center right")
    ax.set_title(f"Supply sweep at N={data['n_vehicles']}")
    fig.tight_layout()
    return fig


def _draw_ceiling_2panel(data: dict) -> plt.Figure:
    fig, (a, b) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ms = [p["m_subchannels"] for p in data["points"]]
    a.plot(ms, [p["ceiling"] for p in data["points"]],
           marker="s", ls="--", c="0.5", label="analytical ceiling")
    a.plot(ms, [p["median_collision"] for p in data["points"]],
           marker="o", c="C0", label="empirical")
    a.set_xlabel("subchannels")
    a.set_ylabel("median M0 collision rate")
    a.set_ylim(0.0, 1.0)
    a.legend(fontsize=8)
    a.set_title("(a) collision vs supply")
    b.plot(ms, [p["median_m0_pdr"] for p in data["points"]],
           marker="o", c="C0")
    b.axhline(data["pdr_target"], ls=":", c="0.4", lw=1)
    b.set_xlabel("subchannels")
    b.set_ylabel("median mean M0 PDR")
    b.set_ylim(0.0, 1.05)
    b.set_title("(b) PDR vs supply")
    fig.suptitle(f"N={data['n_vehicles']} shared pool", fontsize=10)
    fig.tight_layout()
    return fig


_MODE_STYLE = {"0a": ("o", "C0", "per-class"), "0c": ("^", "C3", "per-vehicle")}


def _draw_ds_3panel(data: dict) -> plt.Figure:
    fig, (a, b, c) = plt.subplots(1, 3, figsize=(11.4, 3.4))
    overlay = sorted({(p["rho_pool"], p["ceiling"], p["pigeonhole"])
                      for pts in data["series"].values() for p in pts})
    rhos = [o[0] for o in overlay]
    a.plot(rhos, [o[1] for o in overlay], ls="--", c="0.5", lw=1,
           label="random ceiling")
    a.plot(rhos, [o[2] for o in overlay], ls=":", c="0.5", lw=1,
           label="pigeonhole minimum")
    for mode, pts in sorted(data["series"].items()):
        marker, color, label = _MODE_STYLE[mode]
        xs = [p["rho_pool"] for p in pts]
        a.plot(xs, [p["median_within"] for p in pts],
               marker=marker, c=color, label=label)
        b.plot(xs, [p["median_m0_pdr"] for p in pts],
               marker=marker, c=color, label=label)
        c.plot(xs, [p["median_m1_pdr"] for p in pts],
               marker=marker, c=color, label=label)
    if data["baseline"] is not None:
        b.axhline(data["baseline"]["m0_pdr"], ls="--", c="0.3", lw=1,
                  label="unseparated N=4")
        c.axhline(data["baseline"]["m1_pdr"], ls="--", c="0.3", lw=1,
                  label="unseparated N=4")
    for ax, title, ylab in ((a, "(a) within-pool collisions", "median rate"),
                            (b, "(b) M0 PDR", "median mean PDR"),
                            (c, "(c) M1 PDR", "median mean PDR")):
        ax.set_xlabel("pool pressure rho")
        ax.set_ylabel(ylab)
        ax.set_ylim(0.0, 1.05)
        ax.set_title(title)
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _draw_0a_vs_0c(data: dict) -> plt.Figure:
    fig, (a, b) = plt.subplots(1, 2, figsize=(8.8, 3.6))
    modes = [m for m in ("0a", "0c") if m in data["bars"]]
    width = 0.35
    offs = {m: (i - (len(modes) - 1) / 2) * width for i, m in enumerate(modes)}
    for m in modes:
        bar = data["bars"][m]
        color = _MODE_STYLE[m][1]
        a.bar([0 + offs[m], 1 + offs[m]],
              [bar["m0_pdr"], bar["m0_collision"]],
              width=width, color=color, label=f"mode {m}")
    if data["residual"] is not None:
        a.hlines(data["residual"], 1 - width, 1 + width, colors="0.2",
                 ls=":", lw=1.2)
        a.annotate(f"residual {data['residual']:.2f}",
                   (1, data["residual"]), textcoords="offset points",
                   xytext=(0, 5), ha="center", fontsize=8)
    a.set_ylim(0.0, 1.1)
    right = a.twinx()
    for m in modes:
        right.bar([2 + offs[m]], [data["bars"][m]["m0_sinr_db"]],
                  width=width, color=_MODE_STYLE[m][1])
    right.set_ylabel("M0 SINR (dB)")
    rng = max(abs(data["bars"][m]["m0_sinr_db"]) for m in modes)
    right.set_ylim(0.0, max(rng * 1.3, 1.0))
    a.set_xlim(-0.6, 2.6)
    a.set_xticks([0, 1, 2], ["M0 PDR", "M0 collision", "M0 SINR"])
    a.legend(fontsize=8, loc="upper left")
    a.set_title(f"(a) architectures at N={data['n_vehicles']}, "
                f"M={data['m_subchannels']}")
    if data["trajectory"] is not None:
        tr = data["trajectory"]
        b.plot(tr["episode"], tr["m0_pdr"], c="C0", lw=1, label="M0 PDR")
        b.set_xlabel("training episode")
        b.set_ylabel("M0 PDR")
        b.set_ylim(0.0, 1.05)
        r2 = b.twinx()
        r2.plot(tr["episode"], tr["m0_sinr_db"], c="C3", ls="--", lw=1,
                label="M0 SINR")
        r2.set_ylabel("M0 SINR (dB)")
        lines = b.get_lines() + r2.get_lines()
        b.legend(lines, [ln.get_label() for ln in lines], fontsize=8,
                 loc="lower right")
        b.set_title("(b) training trajectory")
    else:
        b.axis("off")
        b.text(0.5, 0.5, "no training series provided\n(pass --series)",
               ha="center", va="center", fontsize=9, color="0.4")
    fig.tight_layout()
    return fig


_DRAWERS = {
    "nash-floor": _draw_nash_floor,
    "twin-axis": _draw_twin_axis,
    "ceiling-2panel": _draw_ceiling_2panel,
    "ds-3panel": _draw_ds_3panel,
    "0a-vs-0c": _draw_0a_vs_0c,
}

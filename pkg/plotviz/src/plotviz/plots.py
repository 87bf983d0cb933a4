"""The four figure kinds, each returning the annotations it drew.

Every renderer works from parsed CSV tables alone: no solver or simulator
is ever re-run, and annotation values (gap ratios, z-scores) are computed
from the artifact's own full-precision numbers.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")  # headless by contract
import matplotlib.pyplot as plt
import numpy as np

from .tables import (
    SchemaError,
    classify,
    density_at,
    expect,
    grid_shape,
    read_table,
    snapshot_times,
)

_LOG_FLOOR = 1e-17  # display floor so exact zeros survive the log axis


def _finish(fig, out):
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_density(paths, out, title=None) -> dict:
    """Snapshot curves (1-d) or a final-time heatmap (2-d) of one density file."""
    if len(paths) != 1:
        raise SchemaError(f"density plot takes exactly one CSV, got {len(paths)}")
    table = read_table(paths[0])
    kind = classify(table)
    if kind not in ("trajectory", "limit"):
        expect(table, "trajectory", paths[0])
    times = snapshot_times(table)
    t_final = float(times[-1])
    dim, m = grid_shape(table, t_final)
    columns = ["u"] if kind == "trajectory" else ["a", "b"]

    fig, ax = plt.subplots(figsize=(7, 4.2))
    if dim == 1:
        for t in times:
            for col in columns:
                centers, vals = density_at(table, float(t), col)
                label = f"{col}, t={t:g}" if kind == "limit" else f"t={t:g}"
                ax.plot(centers[:, 0], vals, label=label)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.legend(fontsize=8)
    else:
        centers, vals = density_at(table, t_final, columns[0])
        img = vals.reshape(m, m)
        im = ax.imshow(img, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    _, final_vals = density_at(table, t_final, columns[0])
    ax.set_title(title or f"{kind} density ({dim}-d, m={m})")
    _finish(fig, out)
    return {
        "kind": "density",
        "table": kind,
        "dim": dim,
        "m": m,
        "times": [float(t) for t in times],
        "value_range": (float(np.min(final_vals)), float(np.max(final_vals))),
    }


def _bin_probs(centers, vals, dim, m, bins):
    h = 1.0 / m
    if m % bins != 0:
        raise SchemaError(f"bins={bins} must divide the grid resolution m={m}")
    f = m // bins
    if dim == 1:
        return vals.reshape(bins, f).sum(axis=1) * h
    # x-marginal: collapse y, then coarsen x
    arr = vals.reshape(m, m)  # [iy, ix]
    marginal = arr.sum(axis=0) * h * h
    return marginal.reshape(bins, f).sum(axis=1)


def render_overlay(paths, out, bins=16, title=None) -> dict:
    """Particle histogram against the solved density, with a 3 sigma band.

    Takes the ensemble CSV and a density CSV (either layout) in any order;
    limit densities are compared per label, fine-scale ones in total.  Two-
    dimensional inputs are compared through their x-marginals.
    """
    if len(paths) != 2:
        raise SchemaError(f"overlay takes the ensemble CSV and a density CSV, got {len(paths)}")
    tables = {p: read_table(p) for p in paths}
    kinds = {p: classify(t) for p, t in tables.items()}
    ens_path = [p for p, k in kinds.items() if k == "ensemble"]
    dens_path = [p for p, k in kinds.items() if k in ("trajectory", "limit")]
    if len(ens_path) != 1 or len(dens_path) != 1:
        raise SchemaError(
            f"overlay needs one ensemble table and one density table, got {sorted(kinds.values())}"
        )
    ens, dens = tables[ens_path[0]], tables[dens_path[0]]
    dkind = kinds[dens_path[0]]

    common = sorted(set(np.unique(ens["t"])) & set(np.unique(dens["t"])))
    if not common:
        raise SchemaError("ensemble and density share no snapshot time")
    t = float(common[-1])
    dim, m = grid_shape(dens, t)

    esel = ens["t"] == t
    x = ens["x"][esel]
    labels = ens["label"][esel] if "label" in ens else None
    n = int(x.size)
    edges = np.linspace(0.0, 1.0, bins + 1)
    centers_b = 0.5 * (edges[:-1] + edges[1:])

    series = []  # (name, observed freq, expected prob)
    if dkind == "trajectory":
        _, vals = density_at(dens, t, "u")
        probs = _bin_probs(None, vals, dim, m, bins)
        counts = np.histogram(np.clip(x, 0, np.nextafter(1, 0)), bins=edges)[0]
        series.append(("all particles", counts, probs, n))
    else:
        for name, col, lab in (("label 1 vs a", "a", 1), ("label 2 vs b", "b", 2)):
            _, vals = density_at(dens, t, col)
            probs = _bin_probs(None, vals, dim, m, bins)
            xs = x[labels == lab]
            counts = np.histogram(np.clip(xs, 0, np.nextafter(1, 0)), bins=edges)[0]
            series.append((name, counts, probs, n))

    fig, axes = plt.subplots(1, len(series), figsize=(6 * len(series), 4.2), squeeze=False)
    max_z = 0.0
    for ax, (name, counts, probs, ntot) in zip(axes[0], series):
        expected = ntot * probs
        sigma = np.sqrt(ntot * probs * np.maximum(1.0 - probs, 0.0))
        ax.fill_between(
            centers_b, expected - 3 * sigma, expected + 3 * sigma,
            alpha=0.25, label="3 sigma band", step="mid",
        )
        ax.step(centers_b, expected, where="mid", label="expected")
        ax.plot(centers_b, counts, "o", ms=4, label="observed")
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(sigma > 0, (counts - expected) / sigma, 0.0)
        max_z = max(max_z, float(np.max(np.abs(z))))
        ax.set_title(f"{name} (t={t:g})")
        ax.set_xlabel("x")
        ax.set_ylabel("particles per bin")
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    _finish(fig, out)
    return {
        "kind": "overlay",
        "t": t,
        "bins": bins,
        "n_particles": n,
        "max_z": max_z,
        "series": [s[0] for s in series],
    }


def _ratio(gaps: np.ndarray) -> float:
    first, last = float(gaps[0]), float(gaps[-1])
    return last / first if first != 0.0 else math.nan


def render_convergence(paths, out, column="gap_u", title=None) -> dict:
    """Log-log gap-vs-n curves, one per (family, test function), annotated
    with the end-to-end ratio taken from the artifact's own numbers."""
    if len(paths) != 1:
        raise SchemaError(f"convergence plot takes exactly one report CSV, got {len(paths)}")
    table = expect(read_table(paths[0]), "report", paths[0])
    if column not in ("gap_u", "gap_a", "gap_b"):
        raise SchemaError(f"unknown gap column {column!r}")

    fig, ax = plt.subplots(figsize=(7, 4.6))
    ratios = {}
    pairs = sorted(set(zip(table["family"], table["test_id"])))
    for family, tid in pairs:
        sel = (table["family"] == family) & (table["test_id"] == tid)
        ns = table["n"][sel]
        order = np.argsort(ns)
        ns = ns[order]
        gaps = table[column][sel][order]
        ratios[f"{family}:{tid}"] = _ratio(gaps)
        ax.loglog(ns, np.maximum(gaps, _LOG_FLOOR), "o-", ms=4, label=f"{family}:{tid}")
    ax.set_xlabel("refinement n")
    ax.set_ylabel(column)
    ax.set_title(title or "weak gap under refinement")
    ax.legend(fontsize=7)
    text = "\n".join(
        f"{k}: ratio {v:.3e}" if not math.isnan(v) else f"{k}: ratio n/a (zero gap)"
        for k, v in sorted(ratios.items())
    )
    ax.text(
        0.02, 0.02, text, transform=ax.transAxes, fontsize=6,
        va="bottom", family="monospace",
    )
    _finish(fig, out)
    return {"kind": "convergence", "column": column, "ratios": ratios}


def render_strips_compare(paths, out, title=None) -> dict:
    """The strip geometry's two candidate limits against phi = cos(pi y):
    the one that keeps the vertical diffusion converges, the other stalls."""
    if len(paths) != 1:
        raise SchemaError(f"strips-compare takes exactly one report CSV, got {len(paths)}")
    table = expect(read_table(paths[0]), "report", paths[0])
    present = set(table["family"])
    needed = {"strips", "strips_nodiffusion"}
    if not needed <= present:
        raise SchemaError(
            f"strips-compare needs rows for families {sorted(needed)}, "
            f"found {sorted(present)}; run the sweep on the strips family"
        )

    fig, ax = plt.subplots(figsize=(7, 4.6))
    out_ann = {"kind": "strips-compare", "test_id": "cos_pi_y"}
    for family, style, label in (
        ("strips", "o-", "with surviving diffusion"),
        ("strips_nodiffusion", "s--", "diffusion-free candidate"),
    ):
        sel = (table["family"] == family) & (table["test_id"] == "cos_pi_y")
        if not np.any(sel):
            raise SchemaError(f"report holds no cos_pi_y rows for family {family!r}")
        ns = table["n"][sel]
        order = np.argsort(ns)
        gaps = table["gap_u"][sel][order]
        out_ann["ratio_with" if family == "strips" else "ratio_without"] = _ratio(gaps)
        ax.loglog(ns[order], np.maximum(gaps, _LOG_FLOOR), style, label=label)
    ax.set_xlabel("refinement n")
    ax.set_ylabel("gap_u against cos(pi y)")
    ax.set_title(title or "full-height strips: why component diameters must vanish")
    ax.legend(fontsize=8)
    ax.text(
        0.02, 0.02,
        f"end-to-end ratio with: {out_ann['ratio_with']:.3e}\n"
        f"end-to-end ratio without: {out_ann['ratio_without']:.3f}",
        transform=ax.transAxes, fontsize=7, va="bottom", family="monospace",
    )
    _finish(fig, out)
    return out_ann


RENDERERS = {
    "density": render_density,
    "overlay": render_overlay,
    "convergence": render_convergence,
    "strips-compare": render_strips_compare,
}

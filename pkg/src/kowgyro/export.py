"""File formats: diagram CSV and SVG, singular-point JSON, trajectory CSV."""

from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .bifurcation import DiagramSample, SingularPoint
from .errors import IOFailure

CSV_COLUMNS = ("s", "branch", "g", "k", "dg_ds", "dk_ds")
TRAJ_COLUMNS = (
    "t",
    "omega1", "omega2", "omega3",
    "alpha1", "alpha2", "alpha3",
    "beta1", "beta2", "beta3",
    "h", "k", "g",
    "drift_h", "drift_k", "drift_g",
)  # fmt: skip

SVG_NS = "http://www.w3.org/2000/svg"
BRANCH_COLORS = {
    "gamma_plus": "#d62728",
    "gamma_minus": "#9467bd",
    "gamma1": "#1f77b4",
    "gamma2": "#2ca02c",
}
GLYPHS = {"cusp": "#000000", "double_point": "#ff7f0e", "intersection": "#e377c2", "s_zero_asymptote": "#7f7f7f"}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot open {path}: {exc}") from exc


def write_diagram_csv(samples: list[DiagramSample], path) -> None:
    try:
        with _open(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for d in samples:
                w.writerow([fmt(d.s), d.branch, fmt(d.g), fmt(d.k), fmt(d.dg_ds), fmt(d.dk_ds)])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def read_diagram_csv(path) -> list[DiagramSample]:
    with _open(path, "r") as fh:
        rows = list(csv.DictReader(fh))
    return [
        DiagramSample(float(r["s"]), r["branch"], float(r["g"]), float(r["k"]), float(r["dg_ds"]), float(r["dk_ds"]))
        for r in rows
    ]


def singular_to_json(points: list[SingularPoint]) -> list[dict]:
    return [{"kind": p.kind, "location": list(p.location), "parameters": p.parameters} for p in points]


def write_json(obj, path) -> None:
    try:
        with _open(path) as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


# --- SVG ---------------------------------------------------------------------


def _view_box(samples, singulars, clip: float):
    pts = [(d.g, d.k) for d in samples] + [p.location for p in singulars]
    arr = np.array([p for p in pts if all(math.isfinite(v) for v in p)], dtype=float).reshape(-1, 2)
    if arr.size == 0:
        return -1.0, 1.0, -1.0, 1.0
    # robust box: ignore the far ends of the s -> 0 tails
    lo = np.percentile(arr, 100 * (1 - clip), axis=0) if len(arr) > 20 else arr.min(axis=0)
    hi = np.percentile(arr, 100 * clip, axis=0) if len(arr) > 20 else arr.max(axis=0)
    for p in singulars:
        if p.kind != "s_zero_asymptote":
            lo = np.minimum(lo, p.location)
            hi = np.maximum(hi, p.location)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def diagram_svg(
    samples: list[DiagramSample],
    singulars: list[SingularPoint],
    title: str = "",
    width: int = 640,
    height: int = 480,
    clip: float = 0.9,
) -> ET.Element:
    """SVG tree: one polyline per connected branch piece, a circle per singular point, (g, k) axes."""
    ET.register_namespace("", SVG_NS)
    g0, g1, k0, k1 = _view_box(samples, singulars, clip)
    margin = 50
    sx = (width - 2 * margin) / (g1 - g0)
    sy = (height - 2 * margin) / (k1 - k0)

    def X(g):
        return margin + (g - g0) * sx

    def Y(k):
        return height - margin - (k - k0) * sy

    root = ET.Element(
        f"{{{SVG_NS}}}svg",
        {"width": str(width), "height": str(height), "viewBox": f"0 0 {width} {height}", "version": "1.1"},
    )
    if title:
        ET.SubElement(root, f"{{{SVG_NS}}}title").text = title
    axes = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "axes", "stroke": "#000000", "stroke-width": "1"})
    ET.SubElement(axes, f"{{{SVG_NS}}}rect", {"x": str(margin), "y": str(margin), "width": str(width - 2 * margin), "height": str(height - 2 * margin), "fill": "none"})
    for text, x, y in (("g", width / 2, height - 10), ("k", 12, height / 2)):
        ET.SubElement(axes, f"{{{SVG_NS}}}text", {"x": f"{x:.2f}", "y": f"{y:.2f}", "stroke": "none"}).text = text
    for text, x, y in (
        (f"{g0:.4g}", margin, height - margin + 15),
        (f"{g1:.4g}", width - margin, height - margin + 15),
        (f"{k0:.4g}", 5, height - margin),
        (f"{k1:.4g}", 5, margin),
    ):
        ET.SubElement(axes, f"{{{SVG_NS}}}text", {"x": f"{x:.2f}", "y": f"{y:.2f}", "font-size": "10", "stroke": "none"}).text = text

    curves = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "branches", "fill": "none", "stroke-width": "1.2"})
    for branch, piece in _pieces(samples):
        pts = " ".join(f"{X(d.g):.2f},{Y(d.k):.2f}" for d in piece)
        if branch in ("gamma_plus", "gamma_minus"):
            d = piece[0]
            ET.SubElement(curves, f"{{{SVG_NS}}}rect", {"class": branch, "x": f"{X(d.g) - 3:.2f}", "y": f"{Y(d.k) - 3:.2f}", "width": "6", "height": "6", "fill": BRANCH_COLORS[branch]})
            continue
        ET.SubElement(curves, f"{{{SVG_NS}}}polyline", {"class": branch, "stroke": BRANCH_COLORS.get(branch, "#000000"), "points": pts})
    marks = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "singular"})
    for p in singulars:
        if p.kind == "s_zero_asymptote":
            continue
        g, k = p.location
        if not (g0 <= g <= g1 and k0 <= k <= k1):
            continue
        ET.SubElement(marks, f"{{{SVG_NS}}}circle", {"class": p.kind, "cx": f"{X(g):.2f}", "cy": f"{Y(k):.2f}", "r": "3", "fill": GLYPHS[p.kind]})
    # clip the polylines to the frame
    defs = ET.SubElement(root, f"{{{SVG_NS}}}defs")
    cp = ET.SubElement(defs, f"{{{SVG_NS}}}clipPath", {"id": "frame"})
    ET.SubElement(cp, f"{{{SVG_NS}}}rect", {"x": str(margin), "y": str(margin), "width": str(width - 2 * margin), "height": str(height - 2 * margin)})
    curves.set("clip-path", "url(#frame)")
    return root


def _pieces(samples: list[DiagramSample]):
    """Split samples into connected runs: same branch, same sign of ``s``."""
    out = []
    for d in samples:
        if out and out[-1][0] == d.branch and d.branch in ("gamma1", "gamma2") and np.sign(out[-1][1][-1].s) == np.sign(d.s):
            out[-1][1].append(d)
        else:
            out.append((d.branch, [d]))
    return out


def write_svg(root: ET.Element, path) -> None:
    try:
        ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


_ALLOWED = {"svg", "title", "g", "rect", "text", "polyline", "circle", "defs", "clipPath"}


def validate_svg(path_or_text) -> list[str]:
    """Check the emitted profile: SVG root with size, known elements only, well-formed coordinates.

    Returns a list of problems (empty when valid).
    """
    try:
        if isinstance(path_or_text, (str, Path)) and Path(str(path_or_text)).exists():
            root = ET.parse(path_or_text).getroot()
        else:
            root = ET.fromstring(path_or_text)
    except ET.ParseError as exc:
        return [f"not well-formed: {exc}"]
    problems = []
    if root.tag != f"{{{SVG_NS}}}svg":
        problems.append(f"root element is {root.tag}")
    for attr in ("width", "height", "viewBox"):
        if attr not in root.attrib:
            problems.append(f"missing {attr}")
    for el in root.iter():
        name = el.tag.split("}")[-1]
        if name not in _ALLOWED:
            problems.append(f"unexpected element {name}")
        if name == "polyline":
            try:
                for pair in el.get("points", "").split():
                    x, y = (float(v) for v in pair.split(","))
                    if not (math.isfinite(x) and math.isfinite(y)):
                        raise ValueError(pair)
            except ValueError as exc:
                problems.append(f"bad polyline point {exc}")
        if name == "circle":
            for attr in ("cx", "cy", "r"):
                try:
                    float(el.get(attr, "nan"))
                except ValueError:
                    problems.append(f"bad circle {attr}")
    return problems


def write_trajectory_csv(traj, path) -> None:
    ints = traj.integrals
    drift = traj.drift
    try:
        with _open(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJ_COLUMNS)
            for i, t in enumerate(traj.times):
                g, k, h = ints[i]
                dg, dk, dh = drift[i]
                w.writerow([fmt(t), *(fmt(v) for v in traj.states[i]), fmt(h), fmt(k), fmt(g), fmt(dh), fmt(dk), fmt(dg)])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc

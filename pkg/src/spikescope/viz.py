"""CSV and SVG exports: spectrogram heat panel above a per-second relevance panel."""
from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET

import numpy as np

WIDTH, HEIGHT = 800, 400
MARGIN = 40


def spectrogram_csv(spec) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["freq_hz"] + [f"t{j * spec.frame_hop_seconds:.3f}" for j in range(spec.frames)])
    for f, row in zip(spec.freqs, spec.values):
        w.writerow([repr(float(f))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def relevance_csv(rel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["second_index", "relevance"])
    for i, r in enumerate(rel):
        w.writerow([i, repr(float(r))])
    return buf.getvalue()


def _gray(v: float) -> str:
    g = int(round(255 * (1.0 - float(np.clip(v, 0.0, 1.0)))))
    return f"rgb({g},{g},{g})"


def render_svg(spec, rel, title: str = "") -> str:
    rel = np.asarray(rel, dtype=np.float64)
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    if title:
        ET.SubElement(svg, "title").text = title
    plot_w = WIDTH - 2 * MARGIN
    top_h = (HEIGHT - 3 * MARGIN) * 0.6
    bot_h = (HEIGHT - 3 * MARGIN) - top_h

    top = ET.SubElement(svg, "g", id="spectrogram-panel", transform=f"translate({MARGIN},{MARGIN})")
    n_f, n_t = spec.values.shape
    cw, ch = plot_w / n_t, top_h / n_f
    for i in range(n_f):
        y = top_h - (i + 1) * ch  # low frequencies at the bottom
        for j in range(n_t):
            ET.SubElement(top, "rect", x=f"{j * cw:.2f}", y=f"{y:.2f}", width=f"{cw + 0.05:.2f}",
                          height=f"{ch + 0.05:.2f}", fill=_gray(spec.values[i, j]))
    ET.SubElement(top, "text", x="0", y="-6", **{"font-size": "12"}).text = (
        f"normalized spectrogram 0-{spec.freqs[-1]:g} Hz"
    )

    bot = ET.SubElement(svg, "g", id="relevance-panel",
                        transform=f"translate({MARGIN},{2 * MARGIN + top_h:.2f})")
    t = len(rel)
    bw = plot_w / t
    peak = rel.max() if t and rel.max() > 0 else 1.0
    points = []
    for i, r in enumerate(rel):
        h = bot_h * r / peak
        ET.SubElement(bot, "rect", x=f"{i * bw:.2f}", y=f"{bot_h - h:.2f}", width=f"{bw:.2f}",
                      height=f"{h:.2f}", fill=f"rgba(200,40,40,{0.15 + 0.85 * r / peak:.3f})")
        points.append(f"{(i + 0.5) * bw:.2f},{bot_h - h:.2f}")
    ET.SubElement(bot, "polyline", points=" ".join(points), fill="none", stroke="black",
                  **{"stroke-width": "1.5"})
    ET.SubElement(bot, "text", x="0", y="-6", **{"font-size": "12"}).text = "per-second relevance"
    return ET.tostring(svg, encoding="unicode", xml_declaration=True)

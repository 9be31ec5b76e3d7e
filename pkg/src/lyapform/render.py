"""Static plot emitters: SVG 1.1 cell overlays and heatmaps, binary PGM."""
from __future__ import annotations

import numpy as np

from .cubical_map import Grid
from .recurrence import RecurrenceReport
from .torus_flow import ClosedOneForm, TorusFlowSpec, pair_form_with_field

__all__ = ["overlay_svg", "overlay_pgm", "iota_heatmap_svg"]

_SVG_HEAD = ('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
             '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
             'width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n')


def _require_2d(grid: Grid):
    if grid.dim != 2:
        raise ValueError("plots are only produced for 2-D grids")


def _rows_cols(grid: Grid, cells):
    # x1 runs left to right, x2 bottom to top
    idx = grid.index_vectors(np.asarray(cells, dtype=np.int64))
    return grid.resolution[1] - 1 - idx[:, 1], idx[:, 0]


def _rects(grid: Grid, cells, fill: str, px: int) -> list[str]:
    rows, cols = _rows_cols(grid, cells)
    return [f'<rect x="{c * px}" y="{r * px}" width="{px}" height="{px}" fill="{fill}"/>'
            for r, c in zip(rows.tolist(), cols.tolist())]


def overlay_svg(grid: Grid, report: RecurrenceReport, px: int = 8) -> str:
    """R in gray, R_xi in black, C_xi in red on a white torus square."""
    _require_2d(grid)
    w, h = grid.resolution[0] * px, grid.resolution[1] * px
    parts = [_SVG_HEAD.format(w=w, h=h), f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>']
    parts += _rects(grid, report.R, "#999999", px)
    parts += _rects(grid, report.C_xi, "#d62728", px)
    parts += _rects(grid, report.R_xi, "#000000", px)
    parts.append("</svg>\n")
    return "\n".join(parts)


def overlay_pgm(grid: Grid, report: RecurrenceReport) -> bytes:
    """Binary graymap, one pixel per cell: white outside R, 128 on C_xi, black on R_xi."""
    _require_2d(grid)
    n1, n2 = grid.resolution
    img = np.full((n2, n1), 255, dtype=np.uint8)
    for cells, level in ((report.R, 192), (report.C_xi, 128), (report.R_xi, 0)):
        if len(cells):
            r, c = _rows_cols(grid, cells)
            img[r, c] = level
    return f"P5\n{n1} {n2}\n255\n".encode("ascii") + img.tobytes()


def _diverging(t: float) -> str:
    # t in [-1, 1]: blue (negative) through white to red (positive)
    t = max(-1.0, min(1.0, t))
    if t < 0:
        a = 1 + t
        rgb = (a, a, 1.0)
    else:
        a = 1 - t
        rgb = (1.0, a, a)
    return "#" + "".join(f"{round(255 * v):02x}" for v in rgb)


def iota_heatmap_svg(spec: TorusFlowSpec, form: ClosedOneForm, resolution: int = 64, px: int = 6) -> str:
    """Heatmap of omega(V) sampled at cell centres of a square lattice."""
    if spec.dim != 2:
        raise ValueError("plots are only produced for 2-D flows")
    grid = Grid.uniform(resolution, 2)
    vals = pair_form_with_field(form, spec, grid.centers())
    scale = float(np.max(np.abs(vals))) or 1.0
    rows, cols = _rows_cols(grid, np.arange(grid.n_cells))
    w = h = resolution * px
    parts = [_SVG_HEAD.format(w=w, h=h),
             f"<!-- omega(V) range [{float(vals.min()):.6g}, {float(vals.max()):.6g}] -->"]
    for r, c, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
        parts.append(f'<rect x="{c * px}" y="{r * px}" width="{px}" height="{px}" '
                     f'fill="{_diverging(v / scale)}"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)

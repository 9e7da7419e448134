"""Deterministic SVG drawings of webs: wire width follows tension, arrows show terminal forces."""

from __future__ import annotations

import numpy as np

from .core import INTERNAL, TerminalConfig, Web

PROJECTIONS = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}

_SIZE = 480.0
_PAD = 56.0
_ARROW = 40.0     # pixel length of the largest force arrow


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def project(points: np.ndarray, projection: str | None) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(len(points), -1)
    if points.shape[1] == 2:
        return points
    if projection not in PROJECTIONS:
        raise ValueError("3-d webs need a projection: one of xy, xz, yz")
    return points[:, list(PROJECTIONS[projection])]


def render_svg(web: Web, tensions=None, cfg: TerminalConfig | None = None, projection: str | None = None,
               max_width: float = 6.0) -> str:
    P = project(web.nodes, projection) if len(web.nodes) else np.zeros((0, 2))
    arrows = []
    if cfg is not None and len(P):
        F = project(cfg.forces, projection)
        fmax = float(np.linalg.norm(F, axis=1).max(initial=0.0))
        for k, v in web.terminal_nodes().items():
            if fmax > 0 and np.linalg.norm(F[k]) > 0:
                arrows.append((P[v], F[k] / fmax))
    if len(P):
        lo, hi = P.min(axis=0), P.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = max(float((hi - lo).max()), 1e-12)
    scale = (_SIZE - 2 * _PAD) / span

    def xy(p):
        return _PAD + (p[0] - lo[0]) * scale, _SIZE - _PAD - (p[1] - lo[1]) * scale

    t = np.ones(web.n_edges) if tensions is None else np.asarray(tensions, dtype=float)
    tmax = float(np.abs(t).max(initial=0.0)) or 1.0
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(_SIZE)}" height="{_f(_SIZE)}" '
        f'viewBox="0 0 {_f(_SIZE)} {_f(_SIZE)}">',
        '<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" '
        'orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#c0392b"/></marker></defs>',
        '<g id="wires" stroke="#1f3a5f" stroke-linecap="round">',
    ]
    for (a, b), s in zip(web.edges, t):
        (x1, y1), (x2, y2) = xy(P[a]), xy(P[b])
        w = max(0.25, max_width * abs(s) / tmax)
        out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke-width="{_f(w)}"/>')
    out.append("</g>")
    out.append('<g id="nodes">')
    for v, p in enumerate(P):
        x, y = xy(p)
        if web.roles[v] == INTERNAL:
            out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="1.5" fill="#1f3a5f"/>')
        else:
            out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3.5" fill="#ffffff" stroke="#1f3a5f"/>')
    out.append("</g>")
    out.append('<g id="forces" stroke="#c0392b" stroke-width="1.5" marker-end="url(#head)">')
    for a, d in arrows:
        x1, y1 = xy(a)
        x2, y2 = x1 + _ARROW * d[0], y1 - _ARROW * d[1]
        out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"

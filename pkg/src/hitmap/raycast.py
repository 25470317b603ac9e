"""Vectorized Amanatides-Woo grid traversal shared by the sensor and the mapper.

Cells are addressed by integer indices ``floor(coord / resolution)`` of an
unbounded grid whose origin is at (0, 0) of the frame the rays live in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TIE_EPS = 1e-12


@dataclass
class Traversal:
    """Per-beam cell sequences, shape (beams, steps).

    ``side_*`` hold the two cells flanking a corner crossing (only meaningful
    where ``corner`` is true).
    """

    ix: np.ndarray
    iy: np.ndarray
    t_entry: np.ndarray
    t_exit: np.ndarray
    corner: np.ndarray
    side_a: tuple
    side_b: tuple


def max_steps_for(max_range: float, resolution: float) -> int:
    return int(np.ceil(2.0 * max_range / resolution)) + 3


def traverse(origin, angles, max_range: float, resolution: float) -> Traversal:
    """Walk every ray from ``origin`` through the grid out to ``max_range``."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[0]
    x0, y0 = float(origin[0]), float(origin[1])
    dx, dy = np.cos(angles), np.sin(angles)
    # exact zeros keep axis-aligned beams from accumulating spurious steps
    dx[np.abs(dx) < 1e-15] = 0.0
    dy[np.abs(dy) < 1e-15] = 0.0
    # a ray of length L crosses at most L(|dx| + |dy|)/res cell faces
    reach = float((np.abs(dx) + np.abs(dy)).max()) if n else 0.0
    steps = min(int(np.ceil(max_range * reach / resolution)) + 3, max_steps_for(max_range, resolution))

    ix = np.full(n, int(np.floor(x0 / resolution)), dtype=np.int64)
    iy = np.full(n, int(np.floor(y0 / resolution)), dtype=np.int64)
    step_x = np.sign(dx).astype(np.int64)
    step_y = np.sign(dy).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        # zero increments on axis-parallel beams keep their t_max at inf
        t_delta_x = np.where(dx != 0, resolution / np.abs(dx), 0.0)
        t_delta_y = np.where(dy != 0, resolution / np.abs(dy), 0.0)
        next_x = (ix + (step_x > 0)) * resolution
        next_y = (iy + (step_y > 0)) * resolution
        t_max_x = np.where(dx != 0, (next_x - x0) / dx, np.inf)
        t_max_y = np.where(dy != 0, (next_y - y0) / dy, np.inf)
    tol = _TIE_EPS * max(1.0, max_range)

    out_ix = np.empty((steps, n), dtype=np.int64)
    out_iy = np.empty((steps, n), dtype=np.int64)
    t_in = np.empty((steps, n))
    t_out = np.empty((steps, n))
    ties = np.empty((steps, n), dtype=bool)

    t_cur = np.zeros(n)
    for s in range(steps):
        out_ix[s] = ix
        out_iy[s] = iy
        t_in[s] = t_cur
        diff = t_max_x - t_max_y
        tie = np.abs(diff) <= tol
        mx = (diff < 0) | tie
        my = (diff > 0) | tie
        t_cur = np.minimum(t_max_x, t_max_y)
        t_out[s] = t_cur
        ties[s] = tie
        ix = ix + step_x * mx
        iy = iy + step_y * my
        t_max_x = t_max_x + t_delta_x * mx
        t_max_y = t_max_y + t_delta_y * my

    out_ix, out_iy, t_in, t_out, ties = out_ix.T, out_iy.T, t_in.T, t_out.T, ties.T
    corner = np.zeros((n, steps), dtype=bool)
    corner[:, 1:] = ties[:, :-1]
    # flank cells of a corner crossing out of the previous cell
    sa_x = np.empty((n, steps), dtype=np.int64)
    sa_y = np.empty((n, steps), dtype=np.int64)
    sb_x = np.empty((n, steps), dtype=np.int64)
    sb_y = np.empty((n, steps), dtype=np.int64)
    sa_x[:, 0] = sb_x[:, 0] = out_ix[:, 0]
    sa_y[:, 0] = sb_y[:, 0] = out_iy[:, 0]
    sa_x[:, 1:] = out_ix[:, :-1] + step_x[:, None]
    sa_y[:, 1:] = out_iy[:, :-1]
    sb_x[:, 1:] = out_ix[:, :-1]
    sb_y[:, 1:] = out_iy[:, :-1] + step_y[:, None]
    return Traversal(out_ix, out_iy, t_in, t_out, corner, (sa_x, sa_y), (sb_x, sb_y))


def segment_cells(p0, p1, resolution: float):
    """Cells crossed by the segment p0->p1 as (ix, iy, t_entry) arrays (t in meters)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    length = float(np.hypot(d[0], d[1]))
    if length == 0.0:
        ix = int(np.floor(p0[0] / resolution))
        iy = int(np.floor(p0[1] / resolution))
        return np.array([ix]), np.array([iy]), np.array([0.0])
    tr = traverse(p0, np.array([np.arctan2(d[1], d[0])]), length, resolution)
    keep = tr.t_entry[0] < length
    return tr.ix[0][keep], tr.iy[0][keep], tr.t_entry[0][keep]

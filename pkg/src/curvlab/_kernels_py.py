"""Pure-numpy Morrey ball accumulation (reference and fallback)."""

from __future__ import annotations

import numpy as np

CENTER_CHUNK = 64


def ball_accumulate(centers, points, fw, radii, lf, lv):
    """Per-stratum sums of ``fw`` over balls ``B(centers[c], radii[j])``.

    ``lf[s]`` is the first radius index at which sample ``s`` stops being a
    face sample and ``lv[s]`` the first at which it qualifies as a vertex
    sample; the kind at index ``j`` is face for ``j < lf``, vertex for
    ``j >= max(lf, lv)`` and edge in between. Returns ``(C, 3, R)``.
    """
    centers = np.ascontiguousarray(centers, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    fw = np.ascontiguousarray(fw, dtype=float)
    radii = np.ascontiguousarray(radii, dtype=float)
    lf = np.asarray(lf, dtype=np.int64)
    lv = np.asarray(lv, dtype=np.int64)
    C, S, R = centers.shape[0], points.shape[0], radii.shape[0]
    out = np.zeros((C, 3, R))
    if S == 0 or C == 0:
        return out
    edge_end = np.maximum(lf, lv)
    width = 3 * (R + 1)
    for c0 in range(0, C, CENTER_CHUNK):
        cen = centers[c0 : c0 + CENTER_CHUNK]
        cc = cen.shape[0]
        diff = points[None, :, :] - cen[:, None, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        b = np.searchsorted(radii, dist, side="left")  # smallest j with dist <= r_j
        row = (np.arange(cc) * width)[:, None]
        # segment [start, end) of radius indices per kind
        segs = (
            (0, b, np.maximum(b, lf)),
            (1, np.maximum(b, lf), np.maximum(b, edge_end)),
            (2, np.maximum(b, edge_end), np.full_like(b, R)),
        )
        idx, wts = [], []
        for k, start, end in segs:
            live = start < end
            base = row + k * (R + 1)
            w = np.broadcast_to(fw, start.shape)
            idx.append((base + start)[live])
            wts.append(w[live])
            idx.append((base + end)[live])
            wts.append(-w[live])
        acc = np.bincount(np.concatenate(idx), np.concatenate(wts), minlength=cc * width)
        acc = acc.reshape(cc, 3, R + 1)
        out[c0 : c0 + cc] = np.cumsum(acc, axis=2)[:, :, :R]
    np.maximum(out, 0.0, out=out)
    return out

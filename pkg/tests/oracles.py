"""Closed-form fixtures shared by unit and acceptance tests."""

import math

import numpy as np


def tilted_patch(pitch, roll, half=0.5, n_side=7, outliers=(), center=(0.0, 0.0, 0.0)):
    """Grid patch on the plane whose normal leans by ``pitch`` in x and ``roll`` in y.

    The unit normal is ``(tan pitch, tan roll, 1) / norm`` so the closed-form
    tilt is ``max(|pitch|, |roll|)``. ``outliers`` is a list of
    ``(u, v, h)``: a point at grid coordinates (u, v) pushed ``h`` metres
    along the normal. Returns (points, plane, expected critics dict).
    """
    gx, gy = math.tan(pitch), math.tan(roll)
    norm = math.sqrt(gx * gx + gy * gy + 1.0)
    n = np.array([gx, gy, 1.0]) / norm
    cx, cy, cz = center
    d = -float(n @ np.array(center))
    u = np.linspace(-half, half, n_side)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    # on the plane: z = cz - gx (x - cx) - gy (y - cy)
    pts = np.column_stack([cx + uu, cy + vv, cz - gx * uu - gy * vv])
    extra = []
    for (ou, ov, h) in outliers:
        base = np.array([cx + ou, cy + ov, cz - gx * ou - gy * ov])
        extra.append(base + h * n)
    if extra:
        pts = np.vstack([pts, extra])
    hs = np.array([abs(h) for (_, _, h) in outliers])
    j = len(pts)
    # z range: grid corners give cz +- half(|gx| + |gy|); outliers added explicitly
    zs = [cz + half * (abs(gx) + abs(gy)), cz - half * (abs(gx) + abs(gy))]
    zs += [cz - gx * ou - gy * ov + h * n[2] for (ou, ov, h) in outliers]
    expected = {
        "tilt": max(abs(pitch), abs(roll)),
        "roughness": float(hs.sum() / j) if len(hs) else 0.0,
        "height_diff": max(zs) - min(zs),
        "ground_clearance": float(hs.max()) if len(hs) else 0.0,
    }
    return pts, (float(n[0]), float(n[1]), float(n[2]), d), expected


def patch_suite():
    """24 patches: six tilt settings, each with 0, 1, 2 and 3 outliers."""
    tilts = [(0.0, 0.0), (math.pi / 6, 0.0), (0.0, -0.3), (0.2, 0.35), (-0.4, 0.1), (0.05, -0.05)]
    outlier_sets = [(), ((0.1, 0.2, 0.3),), ((0.0, 0.0, 0.5), (-0.3, 0.4, -0.2)),
                    ((0.25, -0.25, 0.15), (0.5, 0.5, 0.4), (-0.5, 0.1, -0.35))]
    out = []
    for k, (p, r) in enumerate(tilts):
        for m, outs in enumerate(outlier_sets):
            out.append(tilted_patch(p, r, outliers=outs, center=(k, m, 0.1 * k)))
    return out


# ------------------------------------------------------------ Dubins oracle

TWO_PI = 2 * math.pi


def _m2p(a):
    v = a % TWO_PI
    return 0.0 if v > TWO_PI - 1e-9 or v < 1e-9 else v


def _ang(v):
    return math.atan2(v[1], v[0])


def dubins_candidates(a, b, rho):
    """Every feasible word from circle-centre / tangent-line geometry.

    Returns ``[(word, (s1, s2, s3))]`` with segment lengths in metres. Built
    independently of the library's normalised closed forms.
    """
    x0, y0, t0 = a
    x1, y1, t1 = b
    left = lambda x, y, t: np.array([x - rho * math.sin(t), y + rho * math.cos(t)])
    right = lambda x, y, t: np.array([x + rho * math.sin(t), y - rho * math.cos(t)])
    out = []
    # outer tangents
    c1, c2 = left(x0, y0, t0), left(x1, y1, t1)
    d = np.linalg.norm(c2 - c1)
    psi = _ang(c2 - c1) if d > 1e-12 else t0
    out.append(("LSL", (rho * _m2p(psi - t0), d, rho * _m2p(t1 - psi))))
    c1, c2 = right(x0, y0, t0), right(x1, y1, t1)
    d = np.linalg.norm(c2 - c1)
    psi = _ang(c2 - c1) if d > 1e-12 else t0
    out.append(("RSR", (rho * _m2p(t0 - psi), d, rho * _m2p(psi - t1))))
    # inner tangents
    c1, c2 = left(x0, y0, t0), right(x1, y1, t1)
    dd = np.linalg.norm(c2 - c1)
    if dd >= 2 * rho:
        ln = math.sqrt(max(dd * dd - 4 * rho * rho, 0.0))
        psi = _ang(c2 - c1) + math.atan2(2 * rho, ln)
        out.append(("LSR", (rho * _m2p(psi - t0), ln, rho * _m2p(psi - t1))))
    c1, c2 = right(x0, y0, t0), left(x1, y1, t1)
    dd = np.linalg.norm(c2 - c1)
    if dd >= 2 * rho:
        ln = math.sqrt(max(dd * dd - 4 * rho * rho, 0.0))
        psi = _ang(c2 - c1) - math.atan2(2 * rho, ln)
        out.append(("RSL", (rho * _m2p(t0 - psi), ln, rho * _m2p(t1 - psi))))
    # three arcs: middle circle tangent to both end circles
    for word, end_circle, sgn in (("LRL", left, 1.0), ("RLR", right, -1.0)):
        c1, c3 = end_circle(x0, y0, t0), end_circle(x1, y1, t1)
        dd = np.linalg.norm(c3 - c1)
        if dd > 4 * rho or dd < 1e-12:
            continue
        h = math.acos(dd / (4 * rho))
        base = _ang(c3 - c1)
        for side in (h, -h):
            c2 = c1 + 2 * rho * np.array([math.cos(base + side), math.sin(base + side)])
            psi1 = _ang(c2 - c1) + sgn * math.pi / 2
            psi2 = _ang(c2 - c3) + sgn * math.pi / 2
            if sgn > 0:
                segs = (_m2p(psi1 - t0), _m2p(psi1 - psi2), _m2p(t1 - psi2))
            else:
                segs = (_m2p(t0 - psi1), _m2p(psi2 - psi1), _m2p(psi2 - t1))
            out.append((word, tuple(rho * s for s in segs)))
    return out


def rk4_integrate(starts, words, segs, rho, steps=400):
    """Integrate unit-speed unicycle controls for a batch of Dubins candidates.

    ``starts`` (n, 3), ``words`` list of n strings, ``segs`` (n, 3) metres.
    Returns end poses (n, 3).
    """
    state = np.array(starts, dtype=float)
    segs = np.asarray(segs, dtype=float)
    for k in range(3):
        curv = np.array([{"L": 1.0, "R": -1.0, "S": 0.0}[w[k]] / rho for w in words])
        h = segs[:, k] / steps

        def f(s):
            return np.column_stack([np.cos(s[:, 2]), np.sin(s[:, 2]), curv])

        for _ in range(steps):
            k1 = f(state)
            k2 = f(state + 0.5 * h[:, None] * k1)
            k3 = f(state + 0.5 * h[:, None] * k2)
            k4 = f(state + h[:, None] * k3)
            state = state + h[:, None] / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return state


def pose_error(p, q):
    dyaw = np.abs((p[..., 2] - q[..., 2] + np.pi) % TWO_PI - np.pi)
    return np.maximum(np.hypot(p[..., 0] - q[..., 0], p[..., 1] - q[..., 1]), dyaw)


def exhaustive_dubins_lengths(pairs, rho, steps=400):
    """Shortest candidate length per (a, b) pair, keeping only candidates whose
    integrated endpoint actually reaches b."""
    starts, goals, words, segs, owner = [], [], [], [], []
    for i, (a, b) in enumerate(pairs):
        for word, s in dubins_candidates(a, b, rho):
            starts.append(a)
            goals.append(b)
            words.append(word)
            segs.append(s)
            owner.append(i)
    ends = rk4_integrate(starts, words, segs, rho, steps)
    ok = pose_error(ends, np.asarray(goals)) < 1e-6
    best = np.full(len(pairs), np.inf)
    for i, s, good in zip(owner, segs, ok):
        if good:
            best[i] = min(best[i], sum(s))
    return best

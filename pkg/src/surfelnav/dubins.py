"""Dubins shortest paths for a forward-only car with minimum turning radius.

Uses the normalised (alpha, beta, d) closed forms for the six words
LSL, RSR, LSR, RSL, RLR, LRL. Segment parameters are stored normalised by
the turning radius, so a straight segment of parameter ``p`` is ``p * rho``
metres long and an arc of parameter ``t`` turns by ``t`` radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_SNAP = 1e-7  # turns this close to 0 or 2*pi are float noise on a straight or arc
_EPS = 1e-10  # slack on existence tests; pure arcs sit exactly on the boundary


def mod2pi(theta: float) -> float:
    v = theta - TWO_PI * math.floor(theta / TWO_PI)
    # values a hair below 2*pi are numerically zero turns
    if v > TWO_PI - _SNAP or v < _SNAP:
        return 0.0
    return v


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    v = math.remainder(theta, TWO_PI)
    return math.pi if v == -math.pi else v


def _word_params(word: str, alpha: float, beta: float, d: float):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    c_ab = math.cos(alpha - beta)
    if word == "LSL":
        tmp0 = d + sa - sb
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sa - sb)
        if p_sq < -_EPS:
            return None
        p_sq = max(p_sq, 0.0)
        tmp1 = math.atan2(cb - ca, tmp0)
        return mod2pi(tmp1 - alpha), math.sqrt(p_sq), mod2pi(beta - tmp1)
    if word == "RSR":
        tmp0 = d - sa + sb
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sb - sa)
        if p_sq < -_EPS:
            return None
        p_sq = max(p_sq, 0.0)
        tmp1 = math.atan2(ca - cb, tmp0)
        return mod2pi(alpha - tmp1), math.sqrt(p_sq), mod2pi(tmp1 - beta)
    if word == "LSR":
        p_sq = -2 + d * d + 2 * c_ab + 2 * d * (sa + sb)
        if p_sq < -_EPS:
            return None
        p_sq = max(p_sq, 0.0)
        p = math.sqrt(p_sq)
        tmp2 = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return mod2pi(tmp2 - alpha), p, mod2pi(tmp2 - beta)
    if word == "RSL":
        p_sq = d * d - 2 + 2 * c_ab - 2 * d * (sa + sb)
        if p_sq < -_EPS:
            return None
        p_sq = max(p_sq, 0.0)
        p = math.sqrt(p_sq)
        tmp2 = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return mod2pi(alpha - tmp2), p, mod2pi(beta - tmp2)
    if word == "RLR":
        tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sa - sb)) / 8.0
        if abs(tmp) > 1 + _EPS:
            return None
        tmp = min(max(tmp, -1.0), 1.0)
        p = mod2pi(TWO_PI - math.acos(tmp))
        t = mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        return t, p, mod2pi(alpha - beta - t + p)
    if word == "LRL":
        tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sb - sa)) / 8.0
        if abs(tmp) > 1 + _EPS:
            return None
        tmp = min(max(tmp, -1.0), 1.0)
        p = mod2pi(TWO_PI - math.acos(tmp))
        t = mod2pi(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
        return t, p, mod2pi(beta - alpha - t + p)
    raise ValueError(f"unknown Dubins word {word!r}")


@dataclass(frozen=True)
class DubinsPath:
    start: tuple[float, float, float]
    rho: float
    word: str
    params: tuple[float, float, float]

    @property
    def length(self) -> float:
        return sum(self.params) * self.rho

    @property
    def segment_lengths(self) -> tuple[float, float, float]:
        return tuple(p * self.rho for p in self.params)

    def sample(self, s) -> np.ndarray:
        """Poses ``(x, y, yaw)`` at arc lengths ``s`` (scalar or array), clamped to the path."""
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=np.float64)), 0.0, self.length)
        u = s / self.rho  # normalised arc length
        x0, y0, th0 = self.start
        out = np.empty((len(u), 3))
        x = np.full(len(u), 0.0)
        y = np.full(len(u), 0.0)
        th = np.full(len(u), th0)
        consumed = 0.0
        # integrate in the frame translated to the start, scaled by rho
        for seg, p in zip(self.word, self.params):
            step = np.clip(u - consumed, 0.0, p)
            x, y, th = _advance(seg, x, y, th, step)
            consumed += p
        out[:, 0] = x0 + x * self.rho
        out[:, 1] = y0 + y * self.rho
        out[:, 2] = np.remainder(th + np.pi, TWO_PI) - np.pi
        return out

    def end_pose(self) -> tuple[float, float, float]:
        return tuple(self.sample(self.length)[0])


def _advance(seg: str, x, y, th, step):
    if seg == "L":
        return x + np.sin(th + step) - np.sin(th), y - np.cos(th + step) + np.cos(th), th + step
    if seg == "R":
        return x - np.sin(th - step) + np.sin(th), y + np.cos(th - step) - np.cos(th), th - step
    return x + step * np.cos(th), y + step * np.sin(th), th


def _normalise(a, b, rho):
    dx, dy = b[0] - a[0], b[1] - a[1]
    d = math.hypot(dx, dy) / rho
    theta = mod2pi(math.atan2(dy, dx)) if d > 0 else 0.0
    return mod2pi(a[2] - theta), mod2pi(b[2] - theta), d


def dubins_shortest_path(a, b, rho: float) -> DubinsPath:
    """Shortest of the six Dubins words from pose ``a`` to pose ``b``."""
    if not rho > 0:
        raise ValueError("turning radius must be positive")
    a = tuple(float(v) for v in a[:3])
    b = tuple(float(v) for v in b[:3])
    if math.hypot(b[0] - a[0], b[1] - a[1]) < 1e-12 and abs(wrap_angle(b[2] - a[2])) < 1e-12:
        return DubinsPath(a, rho, "LSL", (0.0, 0.0, 0.0))
    alpha, beta, d = _normalise(a, b, rho)
    best = None
    for word in WORDS:
        params = _word_params(word, alpha, beta, d)
        if params is None:
            continue
        cost = sum(params)
        if best is None or cost < best[0]:
            best = (cost, word, params)
    return DubinsPath(a, rho, best[1], best[2])


def dubins_path_for_word(a, b, rho: float, word: str) -> DubinsPath | None:
    alpha, beta, d = _normalise(tuple(a[:3]), tuple(b[:3]), rho)
    params = _word_params(word, alpha, beta, d)
    return None if params is None else DubinsPath(tuple(float(v) for v in a[:3]), rho, word, params)


def dubins_length(a, b, rho: float) -> float:
    return dubins_shortest_path(a, b, rho).length


# ----------------------------------------------------------- vectorised form

def _vmod2pi(v):
    r = np.remainder(v, TWO_PI)
    return np.where((r > TWO_PI - _SNAP) | (r < _SNAP), 0.0, r)


def dubins_lengths(a, targets, rho: float, reverse: bool = False) -> np.ndarray:
    """Dubins lengths from pose ``a`` to every row of ``targets`` (n, 3).

    With ``reverse=True`` the lengths are from each target to ``a`` instead.
    """
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    a = np.asarray(a, dtype=np.float64)[:3]
    if reverse:
        src = t
        dst = np.broadcast_to(a, t.shape)
    else:
        src = np.broadcast_to(a, t.shape)
        dst = t
    dx = dst[:, 0] - src[:, 0]
    dy = dst[:, 1] - src[:, 1]
    d = np.hypot(dx, dy) / rho
    theta = np.where(d > 0, _vmod2pi(np.arctan2(dy, dx)), 0.0)
    alpha = _vmod2pi(src[:, 2] - theta)
    beta = _vmod2pi(dst[:, 2] - theta)
    sa, sb, ca, cb = np.sin(alpha), np.sin(beta), np.cos(alpha), np.cos(beta)
    c_ab = np.cos(alpha - beta)
    inf = np.inf
    with np.errstate(invalid="ignore"):
        # LSL
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sa - sb)
        tmp1 = np.arctan2(cb - ca, d + sa - sb)
        lsl = np.where(p_sq >= -_EPS, _vmod2pi(tmp1 - alpha) + np.sqrt(np.maximum(p_sq, 0)) + _vmod2pi(beta - tmp1), inf)
        # RSR
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sb - sa)
        tmp1 = np.arctan2(ca - cb, d - sa + sb)
        rsr = np.where(p_sq >= -_EPS, _vmod2pi(alpha - tmp1) + np.sqrt(np.maximum(p_sq, 0)) + _vmod2pi(tmp1 - beta), inf)
        # LSR
        p_sq = -2 + d * d + 2 * c_ab + 2 * d * (sa + sb)
        p = np.sqrt(np.maximum(p_sq, 0))
        tmp2 = np.arctan2(-ca - cb, d + sa + sb) - np.arctan2(-2.0, p)
        lsr = np.where(p_sq >= -_EPS, _vmod2pi(tmp2 - alpha) + p + _vmod2pi(tmp2 - beta), inf)
        # RSL
        p_sq = d * d - 2 + 2 * c_ab - 2 * d * (sa + sb)
        p = np.sqrt(np.maximum(p_sq, 0))
        tmp2 = np.arctan2(ca + cb, d - sa - sb) - np.arctan2(2.0, p)
        rsl = np.where(p_sq >= -_EPS, _vmod2pi(alpha - tmp2) + p + _vmod2pi(beta - tmp2), inf)
        # RLR
        tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sa - sb)) / 8.0
        p = _vmod2pi(TWO_PI - np.arccos(np.clip(tmp, -1, 1)))
        tt = _vmod2pi(alpha - np.arctan2(ca - cb, d - sa + sb) + p / 2.0)
        rlr = np.where(np.abs(tmp) <= 1 + _EPS, tt + p + _vmod2pi(alpha - beta - tt + p), inf)
        # LRL
        tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sb - sa)) / 8.0
        p = _vmod2pi(TWO_PI - np.arccos(np.clip(tmp, -1, 1)))
        tt = _vmod2pi(-alpha - np.arctan2(ca - cb, d + sa - sb) + p / 2.0)
        lrl = np.where(np.abs(tmp) <= 1 + _EPS, tt + p + _vmod2pi(beta - alpha - tt + p), inf)
    best = np.minimum.reduce([lsl, rsr, lsr, rsl, rlr, lrl]) * rho
    same = (np.hypot(dx, dy) < 1e-12) & (np.abs(np.remainder(dst[:, 2] - src[:, 2] + np.pi, TWO_PI) - np.pi) < 1e-12)
    return np.where(same, 0.0, best)

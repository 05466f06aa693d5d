"""Convex localization bodies inside the unit ball.

A :class:`ConvexBody` is ``{s : |s| <= 1, <g_i, s> <= b_i}`` with unit
normals ``g_i``. Support values are computed exactly (up to rounding) by an
incremental LP-type solver; centroids of cylindrifications are estimated by
hit-and-run sampling.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import InternalError, ProtocolViolation

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Unit ball intersected with halfspaces ``G s <= b`` (rows of ``G`` unit)."""

    d: int
    G: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    def __post_init__(self):
        G = np.asarray(self.G, dtype=np.float64).reshape(-1, self.d)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if G.shape[0] != b.shape[0]:
            raise ValueError("normals and offsets differ in count")
        G = np.ascontiguousarray(G)
        b = np.ascontiguousarray(b)
        G.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "b", b)

    @classmethod
    def ball(cls, d: int) -> "ConvexBody":
        return cls(d, np.zeros((0, d)), np.zeros(0))

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x @ x > (1.0 + tol) ** 2:
            return False
        return bool(np.all(self.G @ x <= self.b + tol))

    def contains_many(self, X, tol: float = 1e-12) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        ok = np.einsum("ij,ij->i", X, X) <= (1.0 + tol) ** 2
        if self.n_constraints:
            ok &= np.all(X @ self.G.T <= self.b + tol, axis=1)
        return ok

    def to_json(self) -> str:
        """Debug dump: ``{"d", "normals", "offsets"}`` with full float precision."""
        return json.dumps({"d": self.d, "normals": self.G.tolist(), "offsets": self.b.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ConvexBody":
        doc = json.loads(text)
        return cls(int(doc["d"]), np.array(doc["normals"], dtype=np.float64).reshape(-1, doc["d"]), doc["offsets"])


def _unit(w, name="w") -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    n = math.sqrt(w @ w)
    if abs(n - 1.0) > NORM_TOL:
        raise ValueError(f"{name} must be a unit vector (norm {n!r})")
    return w


def argmax_point(body: ConvexBody, w) -> np.ndarray:
    """A maximiser of ``<s, w>`` over the body."""
    w = np.asarray(w, dtype=np.float64)
    ok, x = _accel.maximize(body.G, body.b, w)
    if not ok:
        raise InternalError(f"support query on an empty body: {body.to_json()}")
    return x


def support(body: ConvexBody, w) -> float:
    """``max_{s in body} <s, w>`` for a unit vector ``w``."""
    w = _unit(w)
    return float(argmax_point(body, w) @ w)


def projected_diameter(body: ConvexBody, w) -> float:
    """Width of the body along the unit direction ``w``."""
    w = _unit(w)
    return support(body, w) + support(body, -w)


def widths(body: ConvexBody, W) -> np.ndarray:
    """Widths of the body along each unit row of ``W`` (batched)."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    if W.shape[0] and np.max(np.abs(np.linalg.norm(W, axis=1) - 1.0)) > NORM_TOL:
        raise ValueError("width directions must be unit vectors")
    out = _accel.widths(body.G, body.b, W)
    if np.isnan(out).any():
        raise InternalError(f"width query on an empty body: {body.to_json()}")
    return out


def _min_value(body: ConvexBody, w: np.ndarray) -> float:
    ok, x = _accel.maximize(body.G, body.b, -w)
    if not ok:
        raise InternalError(f"query on an empty body: {body.to_json()}")
    return float(x @ w)


def prune(body: ConvexBody) -> ConvexBody:
    """Drop halfspaces that the ball and the remaining halfspaces already imply."""
    keep = np.ones(body.n_constraints, dtype=bool)
    for i in range(body.n_constraints):
        keep[i] = False
        idx = np.flatnonzero(keep)
        ok, x = _accel.maximize(body.G[idx], body.b[idx], body.G[i])
        if not ok:
            raise InternalError(f"pruning met an empty body: {body.to_json()}")
        if body.G[i] @ x > body.b[i] + 1e-12:
            keep[i] = True
    return ConvexBody(body.d, body.G[keep], body.b[keep])


def cut(body: ConvexBody, w, b: float, keep_side: str = "le", prune_above: int | None = None) -> ConvexBody:
    """Intersect with ``<s, w> <= b`` (``keep_side="le"``) or ``>= b`` (``"ge"``).

    The halfspace is stored with a unit normal. A halfspace that the body
    already satisfies leaves the body unchanged (the same object is
    returned). A cut that leaves no interior raises
    :class:`ProtocolViolation`. Constraints are pruned once their count
    exceeds ``prune_above`` (default ``64 d``).
    """
    w = np.asarray(w, dtype=np.float64)
    n = math.sqrt(w @ w)
    if not n > 0:
        raise ValueError("cut normal must be nonzero")
    if keep_side == "le":
        g, off = w / n, b / n
    elif keep_side == "ge":
        g, off = -w / n, -b / n
    else:
        raise ValueError(f"keep_side must be 'le' or 'ge', got {keep_side!r}")
    if support(body, g) <= off:
        return body
    if _min_value(body, g) >= off:
        raise ProtocolViolation(
            f"cut <s, {g.tolist()}> <= {off!r} leaves no interior; body was {body.to_json()}"
        )
    out = ConvexBody(body.d, np.vstack([body.G, g[None, :]]), np.append(body.b, off))
    limit = 64 * body.d if prune_above is None else prune_above
    if out.n_constraints > limit:
        out = prune(out)
    return out


# ---------------------------------------------------------------------------
# projections, sampling and centroids


def _as_basis(V, d: int) -> np.ndarray:
    if V is None:
        return np.zeros((0, d))
    if isinstance(V, DirectionBasis):
        return V.V
    return np.asarray(V, dtype=np.float64).reshape(-1, d)


def complement_basis(V: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal rows spanning the orthogonal complement of the rows of ``V``."""
    if V.shape[0] == 0:
        return np.eye(d)
    _, _, vt = np.linalg.svd(V, full_matrices=True)
    return vt[V.shape[0]:]


def _chord(body: ConvexBody, x: np.ndarray, u: np.ndarray, V: np.ndarray) -> tuple[float, float]:
    """Extent of the projected body along ``x + r u``; ``u`` is in ``V^perp``."""
    U = np.column_stack([u, V.T]) if V.shape[0] else u[:, None]
    c = x - u * (u @ x)
    ok1, p1 = _accel.maximize(body.G, body.b, u, c, U)
    ok2, p2 = _accel.maximize(body.G, body.b, -u, c, U)
    if not (ok1 and ok2):
        return 0.0, 0.0
    return float(u @ p2 - u @ x), float(u @ p1 - u @ x)


def interior_point(body: ConvexBody, V=None, margin: float = 1e-12, max_moves: int = 64) -> np.ndarray:
    """A point strictly inside the projection of the body onto ``V^perp``.

    Starts from the mean of maximisers along the coordinate directions of
    ``V^perp`` and, while some coordinate chord through the point is
    one-sided, moves the point to the midpoint of a chord (alternating the
    coordinate directions with random ones). The midpoint of a chord that is
    not contained in a face is interior, so this terminates quickly on any
    body with nonempty interior.
    """
    d = body.d
    V = _as_basis(V, d)
    B = complement_basis(V, d)
    P = B.T @ B
    x = P @ np.mean([argmax_point(body, u) for u in np.vstack([B, -B])], axis=0)
    rng = np.random.default_rng(0)
    spans = []
    for move in range(max_moves + 1):
        spans = [_chord(body, x, u, V) for u in B]
        if all(lo < -margin and hi > margin for lo, hi in spans):
            return x
        if move % 2 == 0:
            k = (move // 2) % B.shape[0]
            u = B[k]
            lo, hi = spans[k]
        else:
            u = rng.standard_normal(B.shape[0]) @ B
            u /= np.linalg.norm(u)
            lo, hi = _chord(body, x, u, V)
        x = x + u * ((lo + hi) / 2)
    raise InternalError(
        f"no strictly interior start point found for the projected body; last point {x.tolist()} "
        f"with coordinate chords {spans}; body {body.to_json()}"
    )


def sample_projected(body: ConvexBody, V, rng: np.random.Generator, n_samples: int, burn_in: int = 200, thin: int = 1, x0=None) -> np.ndarray:
    """Hit-and-run samples from the projection of the body onto ``V^perp``."""
    d = body.d
    V = _as_basis(V, d)
    if V.shape[0] >= d:
        return np.zeros((n_samples, d))
    if x0 is None:
        x0 = interior_point(body, V)
    return _accel.hit_and_run(body.G, body.b, x0, V, rng, n_samples, burn_in=burn_in, thin=thin)


def interval_midpoints(body: ConvexBody, V) -> np.ndarray:
    """Midpoints of the body's extent along each row of ``V``."""
    V = _as_basis(V, body.d)
    return np.array([(support(body, v) - support(body, -v)) / 2 for v in V])


def centroid_cyl(
    body: ConvexBody,
    V,
    rng: np.random.Generator,
    n_samples: int = 4096,
    burn_in: int = 200,
    thin: int = 8,
    return_samples: bool = False,
):
    """Approximate centroid of the cylindrification of the body along ``V``.

    Along each direction of ``V`` the coordinate is the midpoint of the
    body's extent; in ``V^perp`` it is the mean of hit-and-run samples of the
    projected body, keeping every ``thin``-th step of the chain.
    """
    d = body.d
    V = _as_basis(V, d)
    samples = sample_projected(body, V, rng, n_samples, burn_in, thin)
    c = samples.mean(axis=0)
    if V.shape[0]:
        c = c + interval_midpoints(body, V) @ V
    return (c, samples) if return_samples else c


def in_cylindrification(body: ConvexBody, V, X, tol: float = 1e-9) -> np.ndarray:
    """Whether each row of ``X`` lies in the cylindrification, block by block.

    The ``V^perp`` component must lie in the projected body and every
    coordinate along ``V`` inside the body's extent in that direction.
    """
    d = body.d
    V = _as_basis(V, d)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    ok = np.ones(X.shape[0], dtype=bool)
    if V.shape[0]:
        hi = np.array([support(body, v) for v in V])
        lo = -np.array([support(body, -v) for v in V])
        coords = X @ V.T
        ok &= np.all((coords >= lo - tol) & (coords <= hi + tol), axis=1)
        X = X - coords @ V
    if V.shape[0] == 0:
        return ok & body.contains_many(X, tol)
    ok &= np.einsum("ij,ij->i", X, X) <= (1 + tol) ** 2
    ok &= _accel.fibres_feasible(body.G, body.b + tol, X, V.T)
    return ok


# ---------------------------------------------------------------------------
# thin directions


@dataclass(frozen=True, eq=False)
class DirectionBasis:
    """Orthonormal directions (rows of ``V``) along which the body is thin."""

    V: np.ndarray
    delta: float

    @classmethod
    def empty(cls, d: int, delta: float) -> "DirectionBasis":
        return cls(np.zeros((0, d)), float(delta))

    def __len__(self) -> int:
        return self.V.shape[0]


def small_direction_threshold(T: int, d: int) -> float:
    """``1 / (16 T^2 d (d+1)^2)``."""
    return 1.0 / (16.0 * T * T * d * (d + 1) ** 2)


def update_small_directions(
    body: ConvexBody,
    basis: DirectionBasis,
    rng: np.random.Generator | None = None,
    samples: np.ndarray | None = None,
    n_samples: int = 1024,
) -> DirectionBasis:
    """Greedily add directions of ``V^perp`` along which the body is ``delta``-thin.

    Candidates are the least-variance principal axes of samples from the
    projected body; a candidate is accepted only if its exact width is at
    most ``delta``. ``samples`` (points of the projected body) may be passed
    to reuse an existing chain.
    """
    d = body.d
    V = basis.V.copy()
    while V.shape[0] < d:
        B = complement_basis(V, d)
        if B.shape[0] == 1:
            v = B[0]
        else:
            if samples is None:
                if rng is None:
                    rng = np.random.default_rng(0)
                samples = sample_projected(body, V, rng, n_samples)
            Y = samples @ B.T
            cov = np.cov(Y, rowvar=False)
            evals, evecs = np.linalg.eigh(cov)
            v = B.T @ evecs[:, 0]
        v = v - V.T @ (V @ v) if V.shape[0] else v
        v = v / np.linalg.norm(v)
        if projected_diameter(body, v) > basis.delta:
            break
        V = np.vstack([V, v[None, :]])
        if samples is not None:
            samples = samples - np.outer(samples @ v, v)
    return DirectionBasis(V, basis.delta)

"""Simplices, halfspaces, ellipsoids and composite bodies.

Points are plain numpy vectors: length ``d`` in Cartesian form, length
``d + 1`` in barycentric form (all barycentric entries are stored
explicitly, including the zeroth one).  The unit simplex in Cartesian
form is the convex hull of the origin and the d standard basis vectors.

Everything here is immutable after construction and safe to share
between threads.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DataError

# Slack for membership tests: double-precision accumulation over up to
# ~100-term dot products.
CONTAINS_TOL = 1e-9

_BARY_TOL = 1e-12


def check_barycentric(lam: np.ndarray, tol: float = _BARY_TOL) -> np.ndarray:
    """Validate a barycentric coordinate vector (sums to 1, entries >= 0)."""
    lam = np.asarray(lam, dtype=float)
    if abs(lam.sum() - 1.0) > max(tol, tol * lam.size):
        raise ValueError(f"barycentric coordinates sum to {lam.sum()!r}, not 1")
    if (lam < -tol).any():
        raise ValueError("barycentric coordinates must be nonnegative")
    return lam


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + shift, with the inverse solved from a cached LU."""

    matrix: np.ndarray
    shift: np.ndarray
    _lu: tuple = field(repr=False, default=None)
    det_abs: float = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        s = np.asarray(self.shift, dtype=float)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", s)
        if self._lu is None:
            try:
                object.__setattr__(self, "_lu", lu_factor(m))
            except Exception as exc:
                raise ValueError(f"affine matrix is singular: {exc}") from exc
        if self.det_abs is None:
            lu, _ = self._lu
            object.__setattr__(self, "det_abs", float(abs(np.prod(np.diag(lu)))))
        if not np.isfinite(self.det_abs) or self.det_abs < 1e-300:
            raise ValueError("affine matrix is singular (|det| ~ 0)")

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.shift

    def invert(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return lu_solve(self._lu, (y - self.shift).T).T


@dataclass(frozen=True)
class Simplex:
    """A full-dimensional simplex given by its d+1 vertices in R^d."""

    vertices: np.ndarray  # (d+1, d), rows v_0 .. v_d

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise ValueError(f"vertices must have shape (d+1, d); got {v.shape}")
        object.__setattr__(self, "vertices", v)
        self.map  # force the singularity check at construction

    @classmethod
    def unit(cls, d: int) -> "Simplex":
        if d < 1:
            raise ValueError("dimension must be >= 1")
        return cls(np.vstack([np.zeros(d), np.eye(d)]))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_unit(self) -> bool:
        d = self.dim
        ref = np.vstack([np.zeros(d), np.eye(d)])
        return np.array_equal(self.vertices, ref)

    @property
    def map(self) -> AffineMap:
        """AffineMap u -> v0 + M u with M = [v1-v0 ... vd-v0]."""
        cached = getattr(self, "_map_cache", None)
        if cached is None:
            v = self.vertices
            m = (v[1:] - v[0]).T
            cached = AffineMap(m, v[0].copy())
            object.__setattr__(self, "_map_cache", cached)
        return cached

    @property
    def volume(self) -> float:
        """|det M| / d!"""
        import math

        return self.map.det_abs / math.factorial(self.dim)


@dataclass(frozen=True)
class Halfspace:
    """{x : normal . x <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.ndim != 1 or not np.any(n):
            raise ValueError("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, x: np.ndarray) -> np.ndarray:
        """normal . x - offset; <= 0 inside."""
        return np.asarray(x, dtype=float) @ self.normal - self.offset


@dataclass(frozen=True)
class HyperplaneFamily:
    """Parallel hyperplanes normal . x = z_i with strictly increasing offsets."""

    normal: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        z = np.asarray(self.offsets, dtype=float)
        if n.ndim != 1 or not np.any(n):
            raise ValueError("family normal must be a nonzero vector")
        if z.ndim != 1 or z.size == 0:
            raise ValueError("family needs at least one offset")
        if not np.all(np.diff(z) > 0):
            raise ValueError("family offsets must be strictly increasing")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offsets", z)

    def values(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal


@dataclass(frozen=True)
class Ellipsoid:
    """Quadratic constraint  (x-center)^T Q (x-center) + linear.(x-center) <= level.

    Two flavours are used:

    * plain Cartesian ellipsoid: ``matrix`` is d x d SPD, ``linear`` is zero;
    * barycentric form (``barycentric=True``): ``matrix`` is (d+1) x (d+1)
      SPD and membership of a Cartesian point x in the unit-simplex frame is
      evaluated through lambda = (1 - sum x, x); `restrict` turns this into
      an equivalent Cartesian constraint with a linear term.
    """

    matrix: np.ndarray
    level: float
    center: np.ndarray = None
    linear: np.ndarray = None
    barycentric: bool = False

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("ellipsoid matrix must be square")
        if not np.allclose(q, q.T, atol=1e-12 * max(1.0, np.abs(q).max())):
            raise ValueError("ellipsoid matrix must be symmetric")
        # Positive definiteness; eigvalsh is cheap at the sizes used here.
        w = np.linalg.eigvalsh(0.5 * (q + q.T))
        if w.min() <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "matrix", 0.5 * (q + q.T))
        object.__setattr__(self, "level", float(self.level))
        n = q.shape[0] - (1 if self.barycentric else 0)
        center = np.zeros(n) if self.center is None else np.asarray(self.center, dtype=float)
        linear = np.zeros(n) if self.linear is None else np.asarray(self.linear, dtype=float)
        if self.barycentric and (np.any(center) or np.any(linear)):
            raise ValueError("barycentric ellipsoids are centered at the origin")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "linear", linear)

    @property
    def dim(self) -> int:
        """Cartesian dimension the constraint applies to."""
        return self.matrix.shape[0] - (1 if self.barycentric else 0)

    def value(self, x: np.ndarray) -> np.ndarray:
        """Quadratic value; inside means value <= level.

        For the barycentric form, x is a Cartesian point of the unit-simplex
        frame and is lifted to lambda = (1 - sum x, x) first.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if self.barycentric:
            lam = np.empty((pts.shape[0], pts.shape[1] + 1))
            lam[:, 0] = 1.0 - pts.sum(axis=1)
            lam[:, 1:] = pts
            vals = np.einsum("ni,ij,nj->n", lam, self.matrix, lam)
        else:
            y = pts - self.center
            vals = np.einsum("ni,ij,nj->n", y, self.matrix, y) + y @ self.linear
        return vals[0] if single else vals

    def restrict(self, simplex: Simplex) -> "Ellipsoid":
        """See :func:`restrict_ellipsoid`."""
        return restrict_ellipsoid(self, simplex)


@dataclass(frozen=True)
class Body:
    """Intersection of a simplex with halfspaces and ellipsoid constraints.

    ``ellipsoids`` is a list of (Ellipsoid, side) with side "inside" or
    "outside".  A body with any "outside" constraint is non-convex and must
    be a shell: one inside and one outside ellipsoid sharing the quadratic
    form, plus at most one pair of parallel halfspaces.

    ``simplex=None`` drops the simplex bounds (used for ball-like test
    bodies in the walk module); JSON bodies always carry a simplex.
    """

    simplex: Simplex | None
    halfspaces: tuple = ()
    ellipsoids: tuple = ()
    dim: int = None

    def __post_init__(self):
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        object.__setattr__(self, "ellipsoids", tuple(self.ellipsoids))
        d = self.dim
        if self.simplex is not None:
            d = self.simplex.dim
        elif d is None:
            if self.halfspaces:
                d = self.halfspaces[0].normal.size
            elif self.ellipsoids:
                d = self.ellipsoids[0][0].dim
            else:
                raise ValueError("empty body: no simplex, halfspaces or ellipsoids")
        object.__setattr__(self, "dim", d)
        for h in self.halfspaces:
            if h.normal.size != d:
                raise ValueError("halfspace dimension mismatch")
        for e, side in self.ellipsoids:
            if side not in ("inside", "outside"):
                raise ValueError(f"ellipsoid side must be inside/outside, got {side!r}")
            if e.dim != d:
                raise ValueError("ellipsoid dimension mismatch")
        if not self.convex:
            self._check_shell_form()

    @property
    def convex(self) -> bool:
        return all(side == "inside" for _, side in self.ellipsoids)

    def _check_shell_form(self):
        inside = [e for e, s in self.ellipsoids if s == "inside"]
        outside = [e for e, s in self.ellipsoids if s == "outside"]
        if len(inside) != 1 or len(outside) != 1:
            raise ValueError(
                "non-convex bodies must have exactly one inside and one outside ellipsoid"
            )
        outer, inner = inside[0], outside[0]
        ratio = outer.level / inner.level
        if not (
            outer.barycentric == inner.barycentric
            and np.allclose(outer.matrix, inner.matrix)
            and np.allclose(outer.center, inner.center)
            and np.allclose(outer.linear, inner.linear)
            and ratio > 1.0
        ):
            raise ValueError(
                "shell ellipsoids must be concentric, share the quadratic form, "
                "and satisfy inner level < outer level"
            )
        if len(self.halfspaces) > 2:
            raise ValueError("shell bodies allow at most one parallel halfspace pair")
        if len(self.halfspaces) == 2:
            a, b = self.halfspaces
            cross = np.outer(a.normal, b.normal) - np.outer(b.normal, a.normal)
            if np.abs(cross).max() > 1e-9 * np.abs(a.normal).max() * np.abs(b.normal).max():
                raise ValueError("shell halfspaces must be parallel")


def barycentric_to_cartesian(lam: np.ndarray, simplex: Simplex) -> np.ndarray:
    """Map barycentric coordinates to the Cartesian point sum lambda_i v_i."""
    lam = check_barycentric(lam)
    if lam.size != simplex.dim + 1:
        raise ValueError(
            f"expected {simplex.dim + 1} barycentric coordinates, got {lam.size}"
        )
    return simplex.map.apply(lam[1:])


def cartesian_to_barycentric(x: np.ndarray, simplex: Simplex) -> np.ndarray:
    """Inverse of :func:`barycentric_to_cartesian`; works for any x in R^d."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != simplex.dim:
        raise ValueError(f"expected points in R^{simplex.dim}, got shape {x.shape}")
    single = x.ndim == 1
    u = np.atleast_2d(simplex.map.invert(x))
    lam = np.empty((u.shape[0], u.shape[1] + 1))
    lam[:, 0] = 1.0 - u.sum(axis=1)
    lam[:, 1:] = u
    return lam[0] if single else lam


def restrict_ellipsoid(full: Ellipsoid, simplex: Simplex) -> Ellipsoid:
    """Restrict a barycentric (d+1)-dim quadratic to the simplex hyperplane.

    For lambda = P u + t with u = M^{-1}(x - v0), P = [[-1^T],[I]] and
    t = e_0, the constraint lambda^T C lambda <= c becomes

        (x-v0)^T  M^{-T} P^T C P M^{-1}  (x-v0)
            + (2 t^T C P M^{-1}) (x-v0)  <=  c - C_00.

    Returns a Cartesian Ellipsoid with matrix, linear term and constant such
    that a point x in the simplex satisfies it iff its barycentric image
    satisfies the original constraint.
    """
    if not full.barycentric:
        raise ValueError("restrict_ellipsoid expects a barycentric ellipsoid")
    d = simplex.dim
    if full.matrix.shape[0] != d + 1:
        raise ValueError("ellipsoid matrix must be (d+1) x (d+1)")
    c_mat = full.matrix
    p = np.vstack([-np.ones((1, d)), np.eye(d)])  # (d+1, d)
    minv = np.linalg.inv(simplex.map.matrix)
    pm = p @ minv
    quad = pm.T @ c_mat @ pm
    lin = 2.0 * (c_mat[0] @ pm)
    const = full.level - c_mat[0, 0]
    return Ellipsoid(
        matrix=quad, level=const, center=simplex.vertices[0].copy(), linear=lin
    )


def standardize(simplex: Simplex, halfspaces=(), ellipsoids=()) -> tuple[Body, float]:
    """Map a region over an arbitrary simplex into the unit-simplex frame.

    Returns (body over the unit simplex, scale) with
    vol(original region) = scale * vol(unit-frame region) and membership
    preserved pointwise: x is inside the original constraints iff
    u = M^{-1}(x - v0) is inside the returned body.
    """
    amap = simplex.map
    m = amap.matrix
    v0 = amap.shift
    new_halfspaces = []
    for h in halfspaces:
        new_halfspaces.append(Halfspace(m.T @ h.normal, h.offset - h.normal @ v0))
    new_ellipsoids = []
    for e, side in ellipsoids:
        if e.barycentric:
            e = restrict_ellipsoid(e, simplex)
        # (x - c) = M (u - c') with c' = M^{-1}(c - v0)
        c_new = amap.invert(e.center)
        q_new = m.T @ e.matrix @ m
        lin_new = m.T @ e.linear
        new_ellipsoids.append(
            (Ellipsoid(matrix=q_new, level=e.level, center=c_new, linear=lin_new), side)
        )
    body = Body(Simplex.unit(simplex.dim), tuple(new_halfspaces), tuple(new_ellipsoids))
    return body, amap.det_abs


def contains(body: Body, x: np.ndarray, tol: float = CONTAINS_TOL) -> bool:
    """True iff x satisfies the simplex bounds and every constraint."""
    return bool(contains_many(body, np.asarray(x, dtype=float)[None, :], tol=tol)[0])


def contains_many(body: Body, points: np.ndarray, tol: float = CONTAINS_TOL) -> np.ndarray:
    """Vectorized membership over an (n, d) array of points."""
    pts = np.asarray(points, dtype=float)
    ok = np.ones(pts.shape[0], dtype=bool)
    if body.simplex is not None:
        if body.simplex.is_unit:
            u = pts
        else:
            u = body.simplex.map.invert(pts)
        ok &= (u >= -tol).all(axis=1)
        ok &= u.sum(axis=1) <= 1.0 + tol
    for h in body.halfspaces:
        ok &= h.value(pts) <= tol * max(1.0, abs(h.offset))
    for e, side in body.ellipsoids:
        vals = e.value(pts)
        slack = tol * max(1.0, abs(e.level))
        if side == "inside":
            ok &= vals <= e.level + slack
        else:
            ok &= vals >= e.level - slack
    return ok


# ---------------------------------------------------------------------------
# Body definition files
# ---------------------------------------------------------------------------
#
# JSON schema:
#   {
#     "simplex": "unit:5" | [[...d+1 vertex rows...]],
#     "halfspaces": [{"normal": [...], "offset": z}, ...],
#     "ellipsoids": [{"matrix": [[...]], "level": c, "side": "inside",
#                     "center": [...]?, "linear": [...]?,
#                     "barycentric": false?}, ...]
#   }
# Numbers round-trip losslessly (shortest-repr floats).


def body_to_dict(body: Body) -> dict:
    if body.simplex is None:
        raise ValueError("only simplex-bounded bodies can be serialized")
    if body.simplex.is_unit:
        simplex = f"unit:{body.simplex.dim}"
    else:
        simplex = body.simplex.vertices.tolist()
    out = {
        "simplex": simplex,
        "halfspaces": [
            {"normal": h.normal.tolist(), "offset": h.offset} for h in body.halfspaces
        ],
        "ellipsoids": [],
    }
    for e, side in body.ellipsoids:
        entry = {"matrix": e.matrix.tolist(), "level": e.level, "side": side}
        if e.barycentric:
            entry["barycentric"] = True
        else:
            if np.any(e.center):
                entry["center"] = e.center.tolist()
            if np.any(e.linear):
                entry["linear"] = e.linear.tolist()
        out["ellipsoids"].append(entry)
    return out


def body_from_dict(data: dict) -> Body:
    try:
        simplex_spec = data["simplex"]
        if isinstance(simplex_spec, str):
            kind, _, dim = simplex_spec.partition(":")
            if kind != "unit":
                raise DataError(f"unknown simplex spec {simplex_spec!r}")
            simplex = Simplex.unit(int(dim))
        else:
            simplex = Simplex(np.asarray(simplex_spec, dtype=float))
        halfspaces = tuple(
            Halfspace(np.asarray(h["normal"], dtype=float), float(h["offset"]))
            for h in data.get("halfspaces", [])
        )
        ellipsoids = []
        for e in data.get("ellipsoids", []):
            ellipsoids.append(
                (
                    Ellipsoid(
                        matrix=np.asarray(e["matrix"], dtype=float),
                        level=float(e["level"]),
                        center=e.get("center"),
                        linear=e.get("linear"),
                        barycentric=bool(e.get("barycentric", False)),
                    ),
                    e.get("side", "inside"),
                )
            )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed body definition: {exc}") from exc
    return Body(simplex, halfspaces, tuple(ellipsoids))


def save_body(body: Body, path: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(body_to_dict(body), f, indent=2)
        f.write("\n")
    os.replace(tmp, path)


def load_body(path: str) -> Body:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise DataError(f"cannot read body file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"body file {path} is not valid JSON: {exc}") from exc
    return body_from_dict(data)

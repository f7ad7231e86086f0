"""Domain vocabulary: seeds, directions, subspaces, convex bodies and densities.

Points are plain ``numpy`` vectors. Bodies expose three oracles used by the
rest of the package:

* ``contains(x)``     membership, inclusive with ``BOUNDARY_SLACK``
* ``chord(x, d)``     the interval of ``t`` with ``x + t d`` inside the body
* ``bounding_radius`` a radius ``R`` with ``body ⊆ R · Dⁿ``

``chord`` and ``contains`` accept a single point (1-D) or a stack of points
(2-D, one per row); hit-and-run calls them on whole populations of chains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

BOUNDARY_SLACK = 1e-12
ORTHONORMAL_TOL = 1e-10
DIRECTION_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when a point, direction or frame has the wrong dimension."""


class ChordError(ValueError):
    """Raised when a chord is requested from outside the body or is unbounded."""


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RandomSeed:
    """A ``(seed, stream_id)`` pair that fully determines a generator.

    Generators are Philox (counter based) keyed through ``SeedSequence`` with
    ``spawn_key = (stream_id, *extra)``, so any sub-stream such as a chunk
    index or a worker index gets its own independent sequence.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not (0 <= int(value) < 2**64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def generator(self, *extra: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, extra)))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, offset: int) -> "RandomSeed":
        return RandomSeed(self.seed, (self.stream_id + offset) % 2**64)

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}

    @classmethod
    def coerce(cls, value) -> "RandomSeed":
        if isinstance(value, RandomSeed):
            return value
        if isinstance(value, dict):
            return cls(int(value["seed"]), int(value.get("stream_id", 0)))
        return cls(int(value))


# ---------------------------------------------------------------------------
# directions and subspaces


def as_point(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite entries")
    return x


def as_direction(theta, dim: int | None = None) -> np.ndarray:
    """Validate a unit vector (norm within ``DIRECTION_TOL`` of one)."""
    theta = as_point(theta, dim)
    if abs(np.linalg.norm(theta) - 1.0) > DIRECTION_TOL:
        raise ValueError(f"direction must have unit norm, got {np.linalg.norm(theta)!r}")
    return theta


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class Subspace:
    """A k-dimensional subspace of ℝⁿ stored as a k×n frame with orthonormal rows."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float, ndmin=2)
        k, n = basis.shape
        if not 1 <= k <= n:
            raise DimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
        gram_err = np.max(np.abs(basis @ basis.T - np.eye(k)))
        if gram_err > ORTHONORMAL_TOL:
            raise ValueError(f"frame rows are not orthonormal (max Gram deviation {gram_err:.3g})")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    def project(self, x) -> np.ndarray:
        """Coordinates of ``Proj_E(x)`` in the frame; works row-wise on 2-D input."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise DimensionError(f"expected last dimension {self.ambient_dim}, got {x.shape[-1]}")
        return x @ self.basis.T

    def embed(self, y) -> np.ndarray:
        """Map frame coordinates back to ℝⁿ (the inverse of ``project`` on E)."""
        y = np.asarray(y, dtype=float)
        return y @ self.basis


def project(sub: Subspace, x) -> np.ndarray:
    return sub.project(x)


# ---------------------------------------------------------------------------
# bodies


def _quadratic_chord(a, b, c):
    """Roots of ``a t² + 2 b t + c = 0`` as (lo, hi); ``a == 0`` gives the whole line."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    disc = np.maximum(b * b - a * c, 0.0)
    root = np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        # numerically stable pair of roots
        q = -(b + np.copysign(root, b))
        lo = np.where(q != 0, c / q, 0.0)
        hi = q / a
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    flat = a <= 0
    lo = np.where(flat, -np.inf, lo)
    hi = np.where(flat, np.inf, hi)
    return lo, hi


def _halfspace_chord(normals, offsets, x, d):
    """Chord of ``{y : normals @ y <= offsets}`` through rows of ``x`` along rows of ``d``."""
    slack = offsets - x @ normals.T
    rate = d @ normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = slack / rate
    hi = np.min(np.where(rate > 0, t, np.inf), axis=-1)
    lo = np.max(np.where(rate < 0, t, -np.inf), axis=-1)
    return lo, hi


class Body:
    """Common surface of the convex-body variants."""

    kind = "body"
    dim: int

    def contains(self, x) -> bool | np.ndarray:
        x = self._check(x)
        return self._contains(x)

    def chord(self, x, d, check: bool = True):
        """Return ``(t_lo, t_hi)`` with ``{x + t d} ∩ K = [t_lo, t_hi]``.

        With ``check=False`` the interior test and boundedness test are
        skipped; the samplers use that path on whole populations.
        """
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if check:
            x = self._check(x)
            if x.shape != d.shape:
                raise DimensionError(f"point shape {x.shape} and direction shape {d.shape} differ")
            if not np.all(self._contains(x)):
                raise ChordError("chord requested from a point outside the body")
        lo, hi = self._chord(np.atleast_2d(x), np.atleast_2d(d))
        if check and not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ChordError("unbounded chord: the body description is not bounded")
        if x.ndim == 1:
            return float(lo[0]), float(hi[0])
        return lo, hi

    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"body lives in dimension {self.dim}, point has {x.shape[-1]}")
        return x

    def to_dict(self) -> dict:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Cube(Body):
    dim: int
    half_side: float = math.sqrt(3.0)
    kind = "cube"

    def __post_init__(self):
        if self.dim < 1 or self.half_side <= 0:
            raise ValueError("cube needs dim >= 1 and half_side > 0")

    def _contains(self, x):
        return np.all(np.abs(x) <= self.half_side + BOUNDARY_SLACK, axis=-1)

    def _chord(self, x, d):
        h = self.half_side
        # d_i == 0 gives ±inf for interior x, which the reductions ignore
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            a = (-h - x) * inv
            b = (h - x) * inv
        return np.minimum(a, b).max(axis=-1), np.maximum(a, b).min(axis=-1)

    @property
    def bounding_radius(self) -> float:
        return math.sqrt(self.dim) * self.half_side

    def to_dict(self):
        return {"type": "cube", "dim": self.dim, "half_side": self.half_side}


@dataclass(frozen=True, eq=False)
class Ball(Body):
    dim: int
    radius: float | None = None  # None means the isotropic radius √(n+2)
    kind = "ball"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("ball needs dim >= 1")
        if self.radius is None:
            object.__setattr__(self, "radius", math.sqrt(self.dim + 2.0))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def _contains(self, x):
        return np.linalg.norm(x, axis=-1) <= self.radius + BOUNDARY_SLACK

    def _chord(self, x, d):
        return _quadratic_chord(
            np.einsum("ij,ij->i", d, d),
            np.einsum("ij,ij->i", x, d),
            np.einsum("ij,ij->i", x, x) - self.radius**2,
        )

    @property
    def bounding_radius(self) -> float:
        return float(self.radius)

    def to_dict(self):
        return {"type": "ball", "dim": self.dim, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Ellipsoid(Body):
    """``{x : xᵀ A⁻¹ x <= 1}``, i.e. the image of the unit ball under ``A^{1/2}``."""

    shape: np.ndarray
    kind = "ellipsoid"

    def __post_init__(self):
        a = np.array(self.shape, dtype=float, ndmin=2)
        if a.shape[0] != a.shape[1]:
            raise DimensionError("ellipsoid shape matrix must be square")
        if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, np.max(np.abs(a))):
            raise ValueError("ellipsoid shape matrix must be symmetric")
        evals, evecs = np.linalg.eigh(a)
        if evals[0] <= 1e-12 * evals[-1]:
            raise ValueError("ellipsoid shape matrix must be positive definite")
        a.setflags(write=False)
        object.__setattr__(self, "shape", a)
        object.__setattr__(self, "_precision", (evecs / evals) @ evecs.T)
        object.__setattr__(self, "_root", (evecs * np.sqrt(evals)) @ evecs.T)

    @property
    def dim(self) -> int:
        return self.shape.shape[0]

    @property
    def root(self) -> np.ndarray:
        """Symmetric square root ``A^{1/2}``."""
        return self._root

    def _contains(self, x):
        return np.einsum("...i,ij,...j->...", x, self._precision, x) <= 1.0 + BOUNDARY_SLACK

    def _chord(self, x, d):
        pd = d @ self._precision
        return _quadratic_chord(
            np.einsum("ij,ij->i", d, pd),
            np.einsum("ij,ij->i", x, pd),
            np.einsum("ij,jk,ik->i", x, self._precision, x) - 1.0,
        )

    @property
    def bounding_radius(self) -> float:
        return float(math.sqrt(np.linalg.eigvalsh(self.shape)[-1]))

    def to_dict(self):
        return {"type": "ellipsoid", "shape": self.shape.tolist()}


@dataclass(frozen=True, eq=False)
class HPolytope(Body):
    """``{x : aᵢ·x <= bᵢ}`` with a caller-supplied strictly interior point."""

    normals: np.ndarray
    offsets: np.ndarray
    interior: np.ndarray
    kind = "hpolytope"

    def __post_init__(self):
        a = np.array(self.normals, dtype=float, ndmin=2)
        b = np.array(self.offsets, dtype=float, ndmin=1)
        p = np.array(self.interior, dtype=float, ndmin=1)
        if a.shape[0] != b.shape[0] or a.shape[1] != p.shape[0]:
            raise DimensionError("normals, offsets and interior point disagree in shape")
        if not np.all(a @ p < b):
            raise ValueError("interior point violates or touches a facet")
        for arr in (a, b, p):
            arr.setflags(write=False)
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "interior", p)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def interior_point(self):
        return self.interior.copy()

    def _contains(self, x):
        return np.all(x @ self.normals.T <= self.offsets + BOUNDARY_SLACK, axis=-1)

    def _chord(self, x, d):
        return _halfspace_chord(self.normals, self.offsets, x, d)

    @property
    def bounding_radius(self) -> float:
        from scipy.optimize import linprog

        # coordinate box of the polytope; its corner norm bounds every point
        extent = np.empty(self.dim)
        for i in range(self.dim):
            reach = 0.0
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = -sign
                res = linprog(c, A_ub=self.normals, b_ub=self.offsets, bounds=[(None, None)] * self.dim)
                if res.status == 3:
                    raise ChordError("polytope is unbounded")
                if not res.success:
                    raise ValueError(f"could not bound polytope: {res.message}")
                reach = max(reach, abs(res.x[i]))
            extent[i] = reach
        return float(np.linalg.norm(extent)) * (1 + 1e-9)

    def to_dict(self):
        return {
            "type": "hpolytope",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
            "interior": self.interior.tolist(),
        }


class Simplex(HPolytope):
    """The standard simplex ``{x >= 0, Σxᵢ <= 1}``.

    ``standardize`` asks the sampler to whiten draws into isotropic position;
    the oracles always describe the raw simplex.
    """

    kind = "simplex"

    def __init__(self, dim: int, standardize: bool = False):
        if dim < 1:
            raise ValueError("simplex needs dim >= 1")
        object.__setattr__(self, "standardize", bool(standardize))
        super().__init__(
            np.vstack([-np.eye(dim), np.ones((1, dim))]),
            np.concatenate([np.zeros(dim), [1.0]]),
            np.full(dim, 1.0 / (dim + 1)),
        )

    def __repr__(self):
        return f"Simplex(dim={self.dim}, standardize={self.standardize})"

    @property
    def bounding_radius(self) -> float:
        return 1.0

    def to_dict(self):
        return {"type": "simplex", "dim": self.dim, "standardize": self.standardize}


@dataclass(frozen=True, eq=False)
class ProductBody(Body):
    parts: tuple
    kind = "product"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("product body needs at least one factor")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "_splits", np.cumsum([p.dim for p in parts])[:-1])

    @property
    def dim(self) -> int:
        return int(sum(p.dim for p in self.parts))

    def blocks(self, x):
        return np.split(np.asarray(x), self._splits, axis=-1)

    def interior_point(self):
        return np.concatenate([p.interior_point() for p in self.parts])

    def _contains(self, x):
        return np.logical_and.reduce([p._contains(b) for p, b in zip(self.parts, self.blocks(x))])

    def _chord(self, x, d):
        lo = np.full(x.shape[0], -np.inf)
        hi = np.full(x.shape[0], np.inf)
        for part, xb, db in zip(self.parts, self.blocks(x), self.blocks(d)):
            plo, phi = part._chord(xb, db)
            lo = np.maximum(lo, plo)
            hi = np.minimum(hi, phi)
        return lo, hi

    @property
    def bounding_radius(self) -> float:
        return float(math.sqrt(sum(p.bounding_radius**2 for p in self.parts)))

    def to_dict(self):
        return {"type": "product", "parts": [p.to_dict() for p in self.parts]}


def membership(body: Body, x) -> bool:
    x = as_point(x)
    return bool(body.contains(x))


def chord(body: Body, x, d) -> tuple[float, float]:
    return body.chord(as_point(x), as_direction(d))


def bounding_radius(body: Body) -> float:
    return body.bounding_radius


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True, eq=False)
class UniformOn:
    body: Body

    @property
    def dim(self) -> int:
        return self.body.dim

    def to_dict(self):
        return {"type": "uniform_on", "body": self.body.to_dict()}


@dataclass(frozen=True)
class Gaussian:
    dim: int
    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("gaussian variance must be positive")

    def to_dict(self):
        return {"type": "gaussian", "dim": self.dim, "variance": self.variance}


@dataclass(frozen=True)
class Product1D:
    """Independent coordinates, each drawn from a named 1-D log-concave law."""

    labels: tuple

    def __post_init__(self):
        from .logconcave1d import NAMED_DENSITIES

        labels = tuple(self.labels)
        unknown = [lab for lab in labels if lab not in NAMED_DENSITIES]
        if unknown or not labels:
            raise ValueError(f"unknown 1-D density labels {unknown}; choose from {sorted(NAMED_DENSITIES)}")
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def to_dict(self):
        return {"type": "product_1d", "labels": list(self.labels)}


Density = UniformOn | Gaussian | Product1D

BODY_TYPES = ("cube", "ball", "simplex", "hpolytope", "ellipsoid", "product")
DENSITY_TYPES = ("uniform_on", "gaussian", "product_1d") + BODY_TYPES


def body_from_dict(spec: dict, dim: int | None = None) -> Body:
    """Build a body from its JSON form; ``dim`` fills in a missing ``"dim"``."""
    kind = spec.get("type")
    d = spec.get("dim", dim)
    if kind == "cube":
        return Cube(int(d), float(spec.get("half_side", math.sqrt(3.0))))
    if kind == "ball":
        radius = spec.get("radius")
        return Ball(int(d), None if radius is None else float(radius))
    if kind == "simplex":
        return Simplex(int(d), bool(spec.get("standardize", False)))
    if kind == "hpolytope":
        return HPolytope(np.asarray(spec["normals"]), np.asarray(spec["offsets"]), np.asarray(spec["interior"]))
    if kind == "ellipsoid":
        if "shape" in spec:
            return Ellipsoid(np.asarray(spec["shape"]))
        axes = np.asarray(spec["axes"], dtype=float)
        if d is not None and len(axes) != d:
            axes = np.resize(axes, int(d))
        return Ellipsoid(np.diag(axes**2))
    if kind == "product":
        parts = spec["parts"]
        if d is not None and all("dim" not in p and p.get("type") not in ("ellipsoid", "hpolytope") for p in parts):
            # split dim as evenly as possible among dimensionless factors
            sizes = [len(a) for a in np.array_split(np.arange(int(d)), len(parts))]
            return ProductBody(tuple(body_from_dict(p, s) for p, s in zip(parts, sizes)))
        return ProductBody(tuple(body_from_dict(p) for p in parts))
    raise ValueError(f"unknown body type {kind!r}; expected one of {BODY_TYPES}")


def density_from_dict(spec: dict, dim: int | None = None):
    kind = spec.get("type")
    if kind == "uniform_on":
        return UniformOn(body_from_dict(spec["body"], spec.get("dim", dim)))
    if kind == "gaussian":
        return Gaussian(int(spec.get("dim", dim)), float(spec.get("variance", 1.0)))
    if kind == "product_1d":
        labels = spec["labels"]
        d = spec.get("dim", dim)
        if isinstance(labels, str):
            labels = [labels]
        if len(labels) == 1 and d is not None:
            labels = list(labels) * int(d)
        if d is not None and len(labels) != int(d):
            raise DimensionError(f"product_1d has {len(labels)} labels but dimension {d}")
        return Product1D(tuple(labels))
    if kind in BODY_TYPES:
        return UniformOn(body_from_dict(spec, dim))
    raise ValueError(f"unknown density type {kind!r}; expected one of {DENSITY_TYPES}")


def density_dim(density) -> int:
    return density.dim


def is_unconditional(density) -> bool:
    """True when the density is invariant under every coordinate reflection."""
    symmetric_1d = {"gaussian", "uniform", "two_sided_exp"}
    if isinstance(density, Gaussian):
        return True
    if isinstance(density, Product1D):
        return all(lab in symmetric_1d for lab in density.labels)
    body = density.body

    def check(b: Body) -> bool:
        if isinstance(b, (Cube, Ball)):
            return True
        if isinstance(b, Ellipsoid):
            return bool(np.allclose(b.shape, np.diag(np.diag(b.shape))))
        if isinstance(b, ProductBody):
            return all(check(p) for p in b.parts)
        return False

    return check(body)


def to_json_ready(obj: Any) -> Any:
    """Recursively convert numpy containers into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_ready(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


__all__: Sequence[str] = [
    "RandomSeed", "Subspace", "Cube", "Ball", "Ellipsoid", "HPolytope", "Simplex", "ProductBody",
    "UniformOn", "Gaussian", "Product1D", "membership", "chord", "bounding_radius", "project",
    "as_direction", "as_point", "normalize", "body_from_dict", "density_from_dict", "is_unconditional",
    "DimensionError", "ChordError",
]

"""Grids, domain masks, coefficient fields, and closed-form effective limits.

Everything downstream works on a uniform Cartesian grid over the truncation
box [-R, R]^dim, either with periodic identification or with an implicit zero
exterior beyond the box.  Coefficients are sampled at nodes (collocation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

INTERIOR = 0
EXTERIOR = 1
HOLE = 2


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform grid with nodes x_i = -R + i*h per axis, h = 2R/N."""

    dim: int
    R: float
    N: int
    boundary_mode: str  # 'periodic' | 'zero-exterior'

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.N < 4 or self.N % 2 != 0:
            raise ValueError(f"N must be even and >= 4, got {self.N}")
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.boundary_mode not in ("periodic", "zero-exterior"):
            raise ValueError(f"unknown boundary_mode {self.boundary_mode!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.N

    @property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.R + self.h * np.arange(self.N)

    @property
    def n_nodes(self) -> int:
        return self.N**self.dim

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (n_nodes, dim), C order."""
        x = self.axis
        if self.dim == 1:
            return x[:, None]
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def to_dict(self) -> dict:
        return {"dim": self.dim, "R": self.R, "N": self.N,
                "boundary_mode": self.boundary_mode}

    @classmethod
    def from_dict(cls, d: dict) -> "CartesianGrid":
        return cls(d["dim"], d["R"], d["N"], d["boundary_mode"])


def build_grid(dim: int, R: float, N: int, boundary_mode: str) -> CartesianGrid:
    """Build a uniform Cartesian grid over [-R, R]^dim."""
    return CartesianGrid(dim, R, N, boundary_mode)


# ---------------------------------------------------------------------------
# coefficient profiles, 1-periodic in the fast variable

@dataclass(frozen=True)
class ScalarProfile:
    """A named 1-periodic scalar profile a(y) bounded away from zero."""

    kind: str  # 'constant' | 'sin1d'
    value: float = 1.0
    m: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "sin1d"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "sin1d" and self.m <= 1.0:
            raise ValueError(f"sin1d requires m > 1 for ellipticity, got m={self.m}")
        if self.kind == "constant" and self.value <= 0.0:
            raise ValueError(f"constant profile must be positive, got {self.value}")

    def __call__(self, y):
        if self.kind == "constant":
            return np.full_like(np.asarray(y, dtype=float), self.value)
        return self.m + np.sin(2.0 * np.pi * np.asarray(y, dtype=float))

    @property
    def bounds(self) -> tuple[float, float]:
        """(min, max) of the profile over one period."""
        if self.kind == "constant":
            return (self.value, self.value)
        return (self.m - 1.0, self.m + 1.0)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "sin1d", "m": self.m}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalarProfile":
        if d["kind"] == "constant":
            return cls("constant", value=d["value"])
        return cls("sin1d", m=d["m"])


def constant_profile(value: float = 1.0) -> ScalarProfile:
    return ScalarProfile("constant", value=value)


def sin_profile(m: float = 2.0) -> ScalarProfile:
    return ScalarProfile("sin1d", m=m)


@dataclass(frozen=True)
class CoefficientField:
    """Node samples of a symmetric coefficient with an ellipticity certificate.

    For dim=1 `diag` has shape (N,).  For dim=2 the field is diagonal,
    `diag` has shape (N, N, 2) with per-axis entries.  `lam` certifies
    lam^-1 |xi|^2 <= xi . A(x) xi <= lam |xi|^2 at every node.
    """

    grid: CartesianGrid
    diag: np.ndarray
    lam: float

    def eigen_range(self) -> tuple[float, float]:
        """(min, max) eigenvalue over all node samples (diagonal fields)."""
        return (float(self.diag.min()), float(self.diag.max()))


def periodic_coefficient(profile, eps: float, grid: CartesianGrid) -> CoefficientField:
    """Sample A_eps(x) = A(x/eps) at grid nodes from a 1-periodic profile.

    `profile` is a ScalarProfile (any dim, isotropic) or a pair of
    ScalarProfiles (ax, ay) for a 2D laminate diag(ax(x1/eps), ay(x1/eps))
    varying in the first coordinate only.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = grid.axis
    if isinstance(profile, ScalarProfile):
        vals = profile(x / eps)
        lo, hi = profile.bounds
        if grid.dim == 1:
            diag = vals
        else:
            col = np.broadcast_to(vals[:, None], (grid.N, grid.N))
            diag = np.stack([col, col], axis=-1)
    else:
        ax, ay = profile
        if grid.dim != 2:
            raise ValueError("laminate coefficient requires a 2D grid")
        vx, vy = ax(x / eps), ay(x / eps)
        cx = np.broadcast_to(vx[:, None], (grid.N, grid.N))
        cy = np.broadcast_to(vy[:, None], (grid.N, grid.N))
        diag = np.stack([cx, cy], axis=-1)
        lo = min(ax.bounds[0], ay.bounds[0])
        hi = max(ax.bounds[1], ay.bounds[1])
    lam = max(hi, 1.0 / lo)
    return CoefficientField(grid, np.ascontiguousarray(diag, dtype=float), lam)


# ---------------------------------------------------------------------------
# masks and holes

@dataclass(frozen=True)
class HoleFamily:
    """Periodic lattice of small pinned holes inside the interior region.

    Centers sit at odd multiples of spacing/2, so adjacent holes are
    `spacing` apart and the count inside (-1,1) is 2/spacing.  The radius
    rule gives the hole half-width a at the family's spacing.
    """

    dim: int
    spacing: float  # center-to-center distance, the swept parameter
    radius_rule: tuple  # ('power', c, alpha) -> c*eps^alpha | ('exponential', c, beta) -> exp(-c/eps^beta)

    def radius(self, eps: float | None = None) -> float:
        if eps is None:
            eps = self.spacing
        kind = self.radius_rule[0]
        if kind == "power":
            _, c, alpha = self.radius_rule
            a = c * eps**alpha
        elif kind == "exponential":
            _, c, beta = self.radius_rule
            a = math.exp(-c / eps**beta)
        else:
            raise ValueError(f"unknown radius rule {kind!r}")
        if a <= 0:
            raise ValueError("hole radius must be strictly positive")
        return a

    def centers(self, interior: tuple) -> np.ndarray:
        """Hole centers strictly inside the interior region, shape (n, dim)."""
        half = 0.5 * self.spacing
        axes = []
        for lo, hi in _as_box(interior, self.dim):
            k_lo = math.floor(lo / half)
            ks = np.arange(k_lo, math.ceil(hi / half) + 1)
            ks = ks[ks % 2 != 0]
            c = ks * half
            axes.append(c[(c > lo) & (c < hi)])
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def to_dict(self) -> dict:
        return {"dim": self.dim, "spacing": self.spacing,
                "radius_rule": list(self.radius_rule)}

    @classmethod
    def from_dict(cls, d: dict) -> "HoleFamily":
        return cls(d["dim"], d["spacing"], tuple(d["radius_rule"]))


def _as_box(interior, dim: int) -> list[tuple[float, float]]:
    """Normalize an interval or box spec to a list of per-axis (lo, hi)."""
    arr = np.asarray(interior, dtype=float)
    if arr.shape == (2,):
        return [(float(arr[0]), float(arr[1]))] * dim
    if arr.shape == (dim, 2):
        return [tuple(map(float, row)) for row in arr]
    raise ValueError(f"interior spec {interior!r} not an interval or box")


@dataclass(frozen=True)
class DomainMask:
    """Per-node labels: interior unknowns, exterior data nodes, hole nodes."""

    grid: CartesianGrid
    labels: np.ndarray  # int8 per node, flattened C order
    interior: tuple
    holes: HoleFamily | None = None

    @property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labels == INTERIOR)

    @property
    def exterior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labels == EXTERIOR)

    @property
    def hole_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labels == HOLE)

    @property
    def pinned_idx(self) -> np.ndarray:
        """Exterior and hole nodes together, where values are prescribed."""
        return np.flatnonzero(self.labels != INTERIOR)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(),
                "interior": [list(b) for b in _as_box(self.interior, self.grid.dim)],
                "holes": self.holes.to_dict() if self.holes else None}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainMask":
        grid = CartesianGrid.from_dict(d["grid"])
        holes = HoleFamily.from_dict(d["holes"]) if d["holes"] else None
        interior = tuple(tuple(b) for b in d["interior"])
        if len(interior) == 1 or grid.dim == 1:
            interior = tuple(interior[0])
        return mask_domain(grid, interior, holes)


def mask_domain(grid: CartesianGrid, interior, holes: HoleFamily | None = None) -> DomainMask:
    """Label every node interior, exterior, or hole.

    Hole nodes are the nodes within the hole radius of a center; holes
    smaller than half a cell snap to the single nearest node so that
    pinning survives any resolution.
    """
    box = _as_box(interior, grid.dim)
    for lo, hi in box:
        if lo >= hi:
            raise ValueError(f"empty interior interval ({lo}, {hi})")
        if lo <= -grid.R or hi >= grid.R:
            raise ValueError("interior region must be strictly inside the truncation box")
    pts = grid.nodes()
    inside = np.ones(len(pts), dtype=bool)
    for d, (lo, hi) in enumerate(box):
        inside &= (pts[:, d] > lo) & (pts[:, d] < hi)
    labels = np.where(inside, INTERIOR, EXTERIOR).astype(np.int8)
    if holes is not None:
        if holes.dim != grid.dim:
            raise ValueError("hole family dimension does not match the grid")
        a = holes.radius()
        centers = holes.centers(interior)
        for c in centers:
            if a < grid.h / 2:
                j = int(np.argmin(np.sum((pts - c) ** 2, axis=1)))
                hit = np.array([j])
            else:
                hit = np.flatnonzero(np.sum((pts - c) ** 2, axis=1) <= a * a)
            ok = labels[hit] == INTERIOR
            labels[hit[ok]] = HOLE
    return DomainMask(grid, labels, tuple(map(tuple, box)) if grid.dim == 2 else tuple(box[0]), holes)


def hole_measure(mask: DomainMask) -> float:
    """Lebesgue measure removed by the holes, as counted on the grid."""
    return float(np.count_nonzero(mask.labels == HOLE)) * mask.grid.h**mask.grid.dim


# ---------------------------------------------------------------------------
# closed-form effective limits for the supported periodic families

def h_limit_1d(profile, breakpoints: tuple = ()) -> float:
    """Effective coefficient of a 1-periodic scalar profile, the harmonic mean.

    `profile` is any callable on [0, 1]; `breakpoints` lists interior
    discontinuities for the quadrature.
    """
    f = lambda y: 1.0 / float(profile(y))
    val, err = quad(f, 0.0, 1.0, points=list(breakpoints) or None,
                    epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise RuntimeError(f"harmonic-mean quadrature did not converge (err={err:.2e})")
    return 1.0 / val


def arithmetic_mean(profile, breakpoints: tuple = ()) -> float:
    """Period average of a 1-periodic scalar profile."""
    val, err = quad(lambda y: float(profile(y)), 0.0, 1.0,
                    points=list(breakpoints) or None, epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise RuntimeError(f"mean quadrature did not converge (err={err:.2e})")
    return val


def h_limit_laminate(profile_x, profile_y) -> np.ndarray:
    """Effective 2x2 diagonal matrix of a laminate varying in x1 only.

    The normal component homogenizes to the harmonic mean, the tangential
    one to the arithmetic mean.
    """
    return np.diag([h_limit_1d(profile_x), arithmetic_mean(profile_y)])


def to_json(obj) -> str:
    return json.dumps(obj.to_dict(), indent=2, sort_keys=True)

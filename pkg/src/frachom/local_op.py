"""Discrete local elliptic operator -div(A grad) and the classical solve.

Finite-difference flux form: the face conductivity between two nodes is the
harmonic mean of the node samples, which is exact for piecewise-constant
1D coefficients and consistent with the harmonic-mean effective limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import CartesianGrid, CoefficientField, DomainMask


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric sparse operator on grid nodes, entries in 1/length^2 units."""

    grid: CartesianGrid
    L: sp.csr_matrix
    kind: str = "local elliptic"

    @property
    def n(self) -> int:
        return self.L.shape[0]


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def assemble_stiffness(grid: CartesianGrid, coeff: CoefficientField) -> DiscreteOperator:
    """Assemble -div(A grad) with harmonic face averaging.

    Periodic mode wraps; zero-exterior mode couples boundary nodes to an
    implicit zero just outside the box through the boundary sample itself.
    """
    if coeff.grid is not grid and coeff.grid != grid:
        raise ValueError("coefficient field does not share the grid")
    h2 = grid.h**2
    if grid.dim == 1:
        a = coeff.diag
        N = grid.N
        if grid.boundary_mode == "periodic":
            face = _harmonic(a, np.roll(a, -1))  # face between i and i+1 mod N
            i = np.arange(N)
            rows = np.concatenate([i, i, (i + 1) % N, (i + 1) % N])
            cols = np.concatenate([i, (i + 1) % N, (i + 1) % N, i])
            vals = np.concatenate([face, -face, face, -face]) / h2
            L = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
        else:
            face = _harmonic(a[:-1], a[1:])
            main = np.zeros(N)
            main[:-1] += face
            main[1:] += face
            main[0] += a[0]     # face to the zero exterior, constant extension
            main[-1] += a[-1]
            L = sp.diags([-face / h2, main / h2, -face / h2], [-1, 0, 1], format="csr")
        L = ((L + L.T) * 0.5).tocsr()
        return DiscreteOperator(grid, L)

    # dim == 2: five-point flux form, per-axis diagonal entries
    N = grid.N
    n = N * N
    ax = coeff.diag[..., 0]
    ay = coeff.diag[..., 1]
    rows, cols, vals = [], [], []
    main = np.zeros((N, N))

    def add_faces(a: np.ndarray, axis: int) -> None:
        I, J = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        if grid.boundary_mode == "periodic":
            face = _harmonic(a, np.roll(a, -1, axis=axis))
            here = (I * N + J).ravel()
            if axis == 0:
                there = (((I + 1) % N) * N + J).ravel()
            else:
                there = (I * N + (J + 1) % N).ravel()
            f = face.ravel()
            rows.extend([here, there])
            cols.extend([there, here])
            vals.extend([-f, -f])
            main_flat = main.ravel()
            np.add.at(main_flat, here, f)
            np.add.at(main_flat, there, f)
        else:
            sl_lo = [slice(None)] * 2
            sl_hi = [slice(None)] * 2
            sl_lo[axis] = slice(0, N - 1)
            sl_hi[axis] = slice(1, N)
            face = _harmonic(a[tuple(sl_lo)], a[tuple(sl_hi)])
            here = (I * N + J)[tuple(sl_lo)].ravel()
            there = (I * N + J)[tuple(sl_hi)].ravel()
            f = face.ravel()
            rows.extend([here, there])
            cols.extend([there, here])
            vals.extend([-f, -f])
            main_flat = main.ravel()
            np.add.at(main_flat, here, f)
            np.add.at(main_flat, there, f)
            # boundary faces to the implicit zero exterior
            for side in (0, N - 1):
                sl = [slice(None)] * 2
                sl[axis] = side
                edge = (I * N + J)[tuple(sl)].ravel()
                np.add.at(main_flat, edge, a[tuple(sl)].ravel())

    add_faces(ax, 0)
    add_faces(ay, 1)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(main.ravel())
    L = sp.coo_matrix(
        (np.concatenate(vals) / h2, (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    L = ((L + L.T) * 0.5).tocsr()
    return DiscreteOperator(grid, L)


def apply(op: DiscreteOperator, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product L v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (op.n,):
        raise ValueError(f"vector length {v.shape} does not match operator size {op.n}")
    return op.L @ v


def split_interior(values: np.ndarray, idx: np.ndarray, n: int, name: str) -> np.ndarray:
    """Normalize data given either on all nodes or only on the indexed subset."""
    values = np.asarray(values, dtype=float)
    if values.shape == (n,):
        return values[idx]
    if values.shape == (len(idx),):
        return values
    raise ValueError(f"{name} must have length {n} or {len(idx)}, got {values.shape}")


def solve_local_dirichlet(op: DiscreteOperator, mask: DomainMask,
                          f: np.ndarray, g: np.ndarray,
                          rtol: float = 1e-10) -> np.ndarray:
    """Solve L u = f on interior nodes with u = g pinned elsewhere.

    Conjugate gradients on the interior block, relative residual `rtol`.
    """
    I = mask.interior_idx
    P = mask.pinned_idx
    if len(I) == 0:
        raise ValueError("mask has no interior nodes")
    fI = split_interior(f, I, op.n, "f")
    gP = split_interior(g, P, op.n, "g")
    u = np.zeros(op.n)
    u[P] = gP
    A = op.L[I][:, I].tocsr()
    rhs = fI - op.L[I][:, P] @ gP
    M = sp.diags(1.0 / A.diagonal())
    uI, info = spla.cg(A, rhs, rtol=rtol, atol=0.0, M=M, maxiter=10 * len(I))
    if info != 0:
        res = np.linalg.norm(A @ uI - rhs) / max(np.linalg.norm(rhs), 1e-300)
        raise RuntimeError(f"interior solve did not converge (cg info={info}, residual={res:.2e})")
    u[I] = uI
    return u


def export_coo(op: DiscreteOperator) -> str:
    """Coordinate-triplet text dump (row, col, value) of the sparse matrix."""
    c = op.L.tocoo()
    lines = [f"{i} {j} {v:.17g}" for i, j, v in zip(c.row, c.col, c.data)]
    return "\n".join(lines) + "\n"

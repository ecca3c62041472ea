"""Singular-integral route to the fractional Laplacian on 1D grids.

The kernel K^s is the subordinated heat kernel

    K^s(x, z) = (1 / (2 |Gamma(-s)|)) int_0^inf W_t(x, z) dt / t^{1+s},

which for A = I reduces in closed form to (c_{n,s}/2) |x-z|^{-n-2s} with
c_{n,s} = Gamma(n/2+s)/|Gamma(-s)| * 4^s / pi^{n/2}.  The bilinear form

    B^s(u, v) = (c_{1,s}/2) iint (u(x)-u(z))(v(x)-v(z)) |x-z|^{-1-2s} dx dz

is assembled over piecewise-linear nodal hats.  Touching element pairs use
exact antiderivatives of the singular integrals; separated pairs use tensor
Gauss quadrature, one local matrix per translation distance.  The periodic
variant replaces the kernel by its image sum, written with the Hurwitz zeta
function.  The convention carries the factor 1/2 in the double integral so
that B^s(v, v) matches the spectral quadratic form.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gammaln, zeta

from .domain import CartesianGrid


def abs_gamma_neg(s: float) -> float:
    """|Gamma(-s)| for s in (0,1), via Gamma(-s) = Gamma(1-s)/(-s)."""
    return np.exp(gammaln(1.0 - s)) / s


def c_ns(n: int, s: float) -> float:
    """Normalizing constant of the fractional Laplacian."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return float(np.exp(gammaln(n / 2 + s) - gammaln(1.0 - s)) * s
                 * 4.0**s / np.pi ** (n / 2))


def gaussian_heat_kernel(t: float, x, z, n: int) -> float:
    """Heat kernel W_t(x, z) = (4 pi t)^{-n/2} exp(-|x-z|^2 / 4t) for A = I."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    dx = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(z, dtype=float))
    r2 = float(np.sum(dx * dx))
    return float((4.0 * np.pi * t) ** (-n / 2) * np.exp(-r2 / (4.0 * t)))


@dataclass(frozen=True)
class HeatBounds:
    """Two-sided heat kernel bound constants.

    c1 t^{-n/2} e^{-|x-z|^2/(c2 t)} <= W_t <= c3 t^{-n/2} e^{-|x-z|^2/(c4 t)}.
    Defaults are the Gaussian equality case, where both induced kernel
    bounds collapse onto the closed form.
    """

    c1: float | None = None
    c2: float = 4.0
    c3: float | None = None
    c4: float = 4.0

    def resolved(self, n: int) -> tuple[float, float, float, float]:
        g = (4.0 * np.pi) ** (-n / 2)
        return (self.c1 if self.c1 is not None else g, self.c2,
                self.c3 if self.c3 is not None else g, self.c4)


def kernel_bounds(r: float, s: float, n: int,
                  bounds: HeatBounds = HeatBounds()) -> tuple[float, float]:
    """Pointwise lower/upper bounds for K^s at distance r from the heat bounds."""
    c1, c2, c3, c4 = bounds.resolved(n)
    gs = np.exp(gammaln(n / 2 + s))
    base = gs / (2.0 * abs_gamma_neg(s) * r ** (n + 2.0 * s))
    return (c1 * c2 ** (n / 2 + s) * base, c3 * c4 ** (n / 2 + s) * base)


def kernel_Ks(x, z, s: float, n: int = 1) -> float:
    """K^s(x, z) by adaptive quadrature of the subordination integral."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    dx = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(z, dtype=float))
    r2 = float(np.sum(dx * dx))
    if r2 == 0.0:
        raise ValueError("kernel is singular at x = z")

    # substitute t = r^2 tau so the integrand peaks at an r-independent scale
    def integrand(tau):
        return (4.0 * np.pi * tau) ** (-n / 2) * np.exp(-1.0 / (4.0 * tau)) * tau ** (-1.0 - s)

    val, err = quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    if not np.isfinite(val) or (val > 0 and err / val > 1e-8):
        raise RuntimeError(f"kernel quadrature failed (value={val}, err={err})")
    return val * r2 ** (-(n / 2) - s) / (2.0 * abs_gamma_neg(s))


def kernel_closed_form(r: float, s: float, n: int) -> float:
    """(c_{n,s}/2) r^{-n-2s}, the A = I reduction of the kernel integral."""
    return 0.5 * c_ns(n, s) * r ** (-n - 2.0 * s)


# ---------------------------------------------------------------------------
# element integrals for hat functions on a uniform 1D mesh

def _Ek(k: float, sig: float) -> float:
    """int_1^2 w^{k-1-sig} dw, with the log branch at k = sig."""
    if abs(k - sig) < 1e-12:
        return float(np.log(2.0))
    return (2.0 ** (k - sig) - 1.0) / (k - sig)


def _P20(sig: float) -> float:
    """iint_{[0,1]^2} a^2 (a+b)^{-1-sig} da db."""
    C2 = _Ek(3, sig) - 2.0 * _Ek(2, sig) + _Ek(1, sig)
    return (1.0 / (3.0 - sig) - C2) / sig


def _P11(sig: float) -> float:
    """iint_{[0,1]^2} a b (a+b)^{-1-sig} da db."""
    if abs(sig - 1.0) < 1e-12:
        return float(np.log(2.0)) - 0.5
    D1 = _Ek(3, sig) - _Ek(2, sig)
    C2 = _Ek(3, sig) - 2.0 * _Ek(2, sig) + _Ek(1, sig)
    return (D1 - 1.0 / (3.0 - sig)) / (1.0 - sig) + (C2 - 1.0 / (3.0 - sig)) / sig


def _I0(sig: float) -> float:
    """iint_{[0,1]^2} |a-b|^{1-sig} da db."""
    return 2.0 / ((2.0 - sig) * (3.0 - sig))


_GQ = 8
_gx, _gw = leggauss(_GQ)
_gx = 0.5 * (_gx + 1.0)
_gw = 0.5 * _gw
_GX, _GZ = np.meshgrid(_gx, _gx, indexing="ij")
_GW = np.outer(_gw, _gw)


def _local_same(sig: float, h: float, rho=None) -> np.ndarray:
    """2x2 local matrix of one element against itself, nodes (p, p+1)."""
    i0 = _I0(sig) * h ** (1.0 - sig)
    M = i0 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    if rho is not None:
        Rv = rho(np.abs(_GX - _GZ) * h)
        d = [_GZ - _GX, _GX - _GZ]  # hat differences over the element, unit coords
        M = M + h * h * np.array([[np.sum(_GW * d[a] * d[b] * Rv)
                                   for b in range(2)] for a in range(2)])
    return M


def _local_adjacent(sig: float, h: float, rho=None) -> np.ndarray:
    """3x3 local matrix of one adjacent element pair, nodes (p, p+1, p+2).

    One-sided (x in the left element, z in the right); callers double it.
    """
    S = h ** (1.0 - sig)
    p20, p11 = _P20(sig) * S, _P11(sig) * S
    M = np.array([
        [p20, p11 - p20, -p11],
        [p11 - p20, 2.0 * (p20 - p11), p11 - p20],
        [-p11, p11 - p20, p20]])
    if rho is not None:
        U, V = _GX, _GZ  # u = distance into left element, v into right
        Rv = rho((U + V) * h)
        d = [U, V - U, -V]
        M = M + h * h * np.array([[np.sum(_GW * d[a] * d[b] * Rv)
                                   for b in range(3)] for a in range(3)])
    return M


def _local_far(k: int, sig: float, h: float, rho=None) -> np.ndarray:
    """4x4 local matrix of elements (e_p, e_{p+k}), k >= 2, one-sided."""
    r = np.abs(_GX - _GZ - k) * h
    Kv = r ** (-1.0 - sig)
    if rho is not None:
        Kv = Kv + rho(r)
    hl = [1.0 - _GX, _GX]
    hr = [1.0 - _GZ, _GZ]
    M = np.zeros((4, 4))
    for a in range(2):
        for b in range(2):
            M[a, b] = np.sum(_GW * hl[a] * hl[b] * Kv)
            M[2 + a, 2 + b] = np.sum(_GW * hr[a] * hr[b] * Kv)
            M[a, 2 + b] = -np.sum(_GW * hl[a] * hr[b] * Kv)
            M[2 + b, a] = M[a, 2 + b]
    return M * h * h


@dataclass(frozen=True)
class KernelMatrix:
    """Assembled nonlocal form over nodal hats, plus the exterior tail.

    `B` is the form over the node hull with constants in its kernel.  For
    zero-exterior grids `tail` carries the coupling to the region beyond
    the hull where the function continues constantly; `tail_left` and
    `tail_right` are the row sums of the two one-sided tail parts, used to
    move the constant continuation values to the right-hand side.
    """

    grid: CartesianGrid
    s: float
    B: np.ndarray
    tail: np.ndarray | None = None
    tail_left: np.ndarray | None = None
    tail_right: np.ndarray | None = None
    assembly_tol: float = 1e-10

    def form_matrix(self) -> np.ndarray:
        """B plus the tail block, the full zero-exterior quadratic form."""
        return self.B if self.tail is None else self.B + self.tail


def assemble_fraclap_form(grid: CartesianGrid, s: float) -> KernelMatrix:
    """Assemble B^s over the grid's nodal hat functions.

    Zero-exterior grids get the plain kernel over the node hull plus the
    analytic tail correction; periodic grids get the image-sum kernel and
    no tail.
    """
    if grid.dim != 1:
        raise ValueError("kernel assembly supports 1D grids only")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    sig = 2.0 * s
    h = grid.h
    N = grid.N
    c = c_ns(1, s)
    B = np.zeros((N, N))

    if grid.boundary_mode == "periodic":
        twoR = 2.0 * grid.R

        def rho(r):
            q = np.asarray(r) / twoR
            return twoR ** (-1.0 - sig) * (zeta(1.0 + sig, 1.0 - q)
                                           + zeta(1.0 + sig, 1.0 + q))

        Ms = _local_same(sig, h, rho)
        Ma = 2.0 * _local_adjacent(sig, h, rho)
        p = np.arange(N)
        _accumulate(B, Ms, [p, (p + 1) % N])
        _accumulate(B, Ma, [p, (p + 1) % N, (p + 2) % N])
        for d in range(2, N // 2 + 1):
            mult = 2.0 if 2 * d != N else 1.0
            Mf = mult * _local_far(d, sig, h, rho)
            q = (p + d) % N
            _accumulate(B, Mf, [p, (p + 1) % N, q, (q + 1) % N])
        B *= 0.5 * c
        return KernelMatrix(grid, s, B)

    nel = N - 1  # elements of the node hull [x_0, x_{N-1}]
    Ms = _local_same(sig, h)
    Ma = 2.0 * _local_adjacent(sig, h)
    p = np.arange(nel)
    _accumulate(B, Ms, [p, p + 1])
    p = np.arange(nel - 1)
    _accumulate(B, Ma, [p, p + 1, p + 2])
    for d in range(2, nel):
        Mf = 2.0 * _local_far(d, sig, h)
        p = np.arange(nel - d)
        _accumulate(B, Mf, [p, p + 1, p + d, p + d + 1])
    B *= 0.5 * c

    tail_L, tail_R = _tail_matrices(grid, s)
    return KernelMatrix(grid, s, B, tail=tail_L + tail_R,
                        tail_left=tail_L @ np.ones(N),
                        tail_right=tail_R @ np.ones(N))


def _accumulate(B: np.ndarray, local: np.ndarray, nodes: list[np.ndarray]) -> None:
    """Add a translation-invariant local matrix over all element positions."""
    m = len(nodes)
    for a in range(m):
        for b in range(m):
            np.add.at(B, (nodes[a], nodes[b]), local[a, b])


def _tail_matrices(grid: CartesianGrid, s: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided couplings to the constant continuation beyond the hull.

    The left tail adds c * int (u(x) - u_0)(v(x) - v_0) t_L(x) dx to the form,
    with t_L(x) the kernel mass of the half-line beyond x_0.  Writing
    u - u_0 in the hats of nodes 1..N-1 keeps every entry finite: the hull-end
    singularity of t_L is only ever integrated against hats vanishing there.
    The matrices returned act on absolute nodal values; the subtraction of the
    end value appears as a negative column at the end node.
    """
    sig = 2.0 * s
    h = grid.h
    N = grid.N
    c = c_ns(1, s)
    x0 = -grid.R
    xN = x0 + (N - 1) * h
    TL = np.zeros((N, N))
    TR = np.zeros((N, N))
    hl, hr = 1.0 - _gx, _gx
    # end-element closed form: int_0^h (xi/h)^2 xi^{-sig} dxi / sig
    end = c * h ** (1.0 - sig) / (sig * (3.0 - sig))
    TL[1, 1] += end
    TR[N - 2, N - 2] += end
    for p in range(N - 1):
        xq = x0 + (p + _gx) * h
        if p > 0:
            t = (xq - x0) ** (-sig) / sig
            TL[p, p] += c * h * np.sum(_gw * hl * hl * t)
            TL[p + 1, p + 1] += c * h * np.sum(_gw * hr * hr * t)
            v = c * h * np.sum(_gw * hl * hr * t)
            TL[p, p + 1] += v
            TL[p + 1, p] += v
        if p < N - 2:
            t = (xN - xq) ** (-sig) / sig
            TR[p, p] += c * h * np.sum(_gw * hl * hl * t)
            TR[p + 1, p + 1] += c * h * np.sum(_gw * hr * hr * t)
            v = c * h * np.sum(_gw * hl * hr * t)
            TR[p, p + 1] += v
            TR[p + 1, p] += v
    # relative form: subtracting the end value moves the row sums into the
    # end-node column
    TL[:, 0] -= TL @ np.ones(N)
    TR[:, N - 1] -= TR @ np.ones(N)
    return TL, TR


def bilinear_eval(K: KernelMatrix, v: np.ndarray, w: np.ndarray) -> float:
    """Quadratic form v^T B w of the hull assembly."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != (K.B.shape[0],) or w.shape != (K.B.shape[0],):
        raise ValueError("vector length does not match the assembled form")
    return float(v @ K.B @ w)


def export_binary(K: KernelMatrix) -> bytes:
    """Dense row-major dump: 8-byte node count, 8-byte s, then float64 entries."""
    return struct.pack("<qd", K.B.shape[0], K.s) + K.B.astype("<f8").tobytes()


def export_csv(K: KernelMatrix) -> str:
    lines = ["i,j,value"]
    N = K.B.shape[0]
    for i in range(N):
        for j in range(N):
            lines.append(f"{i},{j},{K.B[i, j]:.17g}")
    return "\n".join(lines) + "\n"

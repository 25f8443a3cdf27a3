"""Linearized and mode-family operators on the grid.

Dense assembly realizes a Fourier multiplier as a circulant matrix
(first column = ifft of the symbol) plus a diagonal potential; that
keeps eigensolves simple and robust at desk scale (N <= 4096). For the
very fine grids needed near the small-alpha existence threshold a
matrix-free path (FFT matvecs + Lanczos / MINRES) covers the low end of
the spectrum and the kernel-orthogonal inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import grid as gs
from .errors import (
    AmbiguousKernel,
    AsymmetricInput,
    DegenerateRhs,
    IllConditioned,
    ParamsForbidden,
)
from .grid import Field, Grid, SymbolSpec, apply_multiplier, derivative, power, resolvent_dx
from .waves import FBBM, NORM_PDE, WaveProfile

DENSE_LIMIT = 4096


@dataclass
class OperatorMatrix:
    matrix: np.ndarray
    grid: Grid
    tag: str
    symmetric: bool
    params: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.grid.N


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    morse_index: int
    kernel_dim: int
    kernel_basis: list
    smallest_pair: tuple  # (eigenvalue, Field)
    kernel_tol: float
    ambiguous_kernel: bool = False

    def to_dict(self):
        return {
            "morse_index": self.morse_index,
            "kernel_dim": self.kernel_dim,
            "kernel_tol": self.kernel_tol,
            "ambiguous_kernel": self.ambiguous_kernel,
            "eigenvalues": [float(v) for v in self.eigenvalues[:32]],
        }


def multiplier_matrix(grid: Grid, sym: SymbolSpec) -> np.ndarray:
    """Dense matrix of the Fourier multiplier: circulant in the samples."""
    sv = np.asarray(sym.values(grid.xi), dtype=complex)
    if not sym.real_even:
        sv = sv.copy()
        sv[grid.nyquist] = 0.0
    col = np.fft.ifft(sv)
    mat = scipy.linalg.circulant(col)
    if np.max(np.abs(mat.imag)) <= 1e-13 * max(np.max(np.abs(mat.real)), 1.0):
        mat = mat.real.copy()
    return mat


def potential_values(w: WaveProfile) -> np.ndarray:
    """Diagonal potential of the linearized operator (derivative of n)."""
    p = w.params
    if p.family == FBBM:
        return -(2.0 / p.c) * w.values
    return -(p.p + 1) * p.nu * w.values**p.p


def assemble_linearized(w: WaveProfile) -> OperatorMatrix:
    """L_c = M + m - n'(phi_c): self-adjoint linearization about the wave.

    fkdv: D^alpha + c - (p+1) nu phi_c^p; fbbm: D^alpha + (1-1/c) - (2/c) psi_c.
    """
    p = w.params
    g = w.grid
    mat = multiplier_matrix(g, p.dispersion())
    mat[np.diag_indices_from(mat)] += p.mass_shift + potential_values(w)
    return OperatorMatrix(mat, g, "linearized", True, {"family": p.family, "alpha": p.alpha, "c": p.c})


def linearized_operator(w: WaveProfile) -> spla.LinearOperator:
    """Matrix-free L_c for grids too fine for dense work."""
    p = w.params
    g = w.grid
    sym = p.dispersion().values(np.abs(2 * np.pi * np.fft.rfftfreq(g.N, g.dx)))
    sym = np.asarray(sym).real + p.mass_shift
    pot = potential_values(w)

    def mv_real(v):
        return np.fft.irfft(sym * np.fft.rfft(v), n=g.N) + pot * v

    def mv(v):
        v = np.asarray(v)
        if np.iscomplexobj(v):
            return mv_real(v.real) + 1j * mv_real(v.imag)
        return mv_real(v.astype(float, copy=False))

    return spla.LinearOperator((g.N, g.N), matvec=mv, dtype=float)


def apply_operator(op: OperatorMatrix, f: Field) -> Field:
    return Field(op.grid, op.matrix @ f.values)


def _check_symmetric(op: OperatorMatrix):
    if not op.symmetric:
        raise AsymmetricInput(f"operator {op.tag!r} is not tagged symmetric")
    m = op.matrix
    scale = np.max(np.abs(m)) or 1.0
    defect = np.max(np.abs(m - m.T)) / scale
    if defect > 1e-10:
        raise AsymmetricInput(f"matrix asymmetry {defect:.2e} exceeds 1e-10")


def symmetric_spectrum(op: OperatorMatrix, kernel_tol: float | None = None) -> SpectralReport:
    """Full symmetric eigendecomposition with Morse index / kernel counts.

    kernel_tol defaults to 1e-6 * spectral radius; the kernel band gets a
    gap sanity check (next eigenvalue at least 10x the threshold),
    otherwise the report is flagged ambiguous.
    """
    _check_symmetric(op)
    m = 0.5 * (op.matrix + op.matrix.T)
    vals, vecs = scipy.linalg.eigh(m)
    radius = float(np.max(np.abs(vals))) or 1.0
    tol = kernel_tol if kernel_tol is not None else 1e-6 * radius
    neg = int(np.sum(vals < -tol))
    ker = int(np.sum(np.abs(vals) <= tol))
    ambiguous = False
    outside = np.abs(vals)[np.abs(vals) > tol]
    if ker and outside.size and outside.min() < 10 * tol:
        ambiguous = True
    # quadrature-orthonormal kernel basis
    kb = []
    scale = 1.0 / np.sqrt(op.grid.weight)
    for idx in np.where(np.abs(vals) <= tol)[0]:
        kb.append(Field(op.grid, vecs[:, idx] * scale))
    i0 = int(np.argmin(np.abs(vals)))
    report = SpectralReport(
        eigenvalues=vals,
        morse_index=neg,
        kernel_dim=ker,
        kernel_basis=kb,
        smallest_pair=(float(vals[i0]), Field(op.grid, vecs[:, i0] * scale)),
        kernel_tol=tol,
        ambiguous_kernel=ambiguous,
    )
    return report


def lowest_spectrum(w: WaveProfile, k: int = 6, tol: float = 0.0) -> np.ndarray:
    """Lowest k eigenvalues of L_c by Lanczos on the matrix-free operator.

    The discrete spectrum of interest (one negative direction, the
    translation kernel, a few trapped modes) sits well below the
    essential threshold m = c, so a small-k Lanczos run suffices even on
    million-point grids.
    """
    A = linearized_operator(w)
    v0 = w.values / np.linalg.norm(w.values)
    vals = spla.eigsh(A, k=k, which="SA", return_eigenvectors=False, tol=tol, v0=v0)
    return np.sort(vals)


def solve_inverse_on_orthogonal(op: OperatorMatrix, rhs: Field) -> tuple[Field, float]:
    """Solve op sol = rhs restricted to the kernel-orthogonal complement.

    Returns (sol, <sol, rhs>) with the quadrature-weighted pairing. A rhs
    living inside the kernel raises DegenerateRhs; a restricted system
    with condition number above 1e12 raises IllConditioned.
    """
    _check_symmetric(op)
    m = 0.5 * (op.matrix + op.matrix.T)
    vals, vecs = scipy.linalg.eigh(m)
    radius = float(np.max(np.abs(vals))) or 1.0
    tol = 1e-6 * radius
    keep = np.abs(vals) > tol
    if not np.any(keep):
        raise IllConditioned("operator is numerically zero")
    cond = radius / float(np.min(np.abs(vals[keep])))
    if cond > 1e12:
        raise IllConditioned(f"restricted system condition number {cond:.2e}")
    coeff = vecs.T @ rhs.values
    kept_norm = float(np.linalg.norm(coeff[keep]))
    if kept_norm <= 1e-10 * (float(np.linalg.norm(coeff)) or 1.0):
        raise DegenerateRhs("rhs lies in the kernel; nothing to solve")
    sol_coeff = np.zeros_like(coeff)
    sol_coeff[keep] = coeff[keep] / vals[keep]
    sol = Field(op.grid, vecs @ sol_coeff)
    pairing = gs.inner(sol, rhs)
    return sol, pairing


def inverse_pairing(w: WaveProfile, rhs: Field | None = None) -> float:
    """<L_c^{-1} rhs, rhs> with rhs defaulting to the wave itself.

    Dense eigensolve on moderate grids; on finer grids, preconditioned
    MINRES with the even-parity restriction (the translation kernel is
    odd, so an even rhs never meets it).
    """
    if rhs is None:
        rhs = w.field
    g = w.grid
    if g.N <= DENSE_LIMIT:
        _, pairing = solve_inverse_on_orthogonal(assemble_linearized(w), rhs)
        return pairing
    p = w.params
    sym = p.dispersion().values(np.abs(2 * np.pi * np.fft.rfftfreq(g.N, g.dx)))
    sym = np.asarray(sym).real + p.mass_shift
    pot = potential_values(w)

    def even(v):
        return 0.5 * (v + np.roll(v[::-1], 1))

    def mv(v):
        v = even(np.asarray(v, dtype=float))
        return even(np.fft.irfft(sym * np.fft.rfft(v), n=g.N) + pot * v)

    def pc(v):
        v = np.asarray(v, dtype=float)
        return np.fft.irfft(np.fft.rfft(v) / sym, n=g.N)

    A = spla.LinearOperator((g.N, g.N), matvec=mv, dtype=float)
    M = spla.LinearOperator((g.N, g.N), matvec=pc, dtype=float)
    b = even(np.asarray(rhs.values, dtype=float))
    sol, info = spla.minres(A, b, M=M, rtol=1e-10, maxiter=2000)
    if info != 0:
        raise IllConditioned(f"minres failed to converge (info={info})")
    return gs.inner(Field(g, sol), rhs)


# ---------------------------------------------------------------------------
# mode families

def assemble_mode_family(w: WaveProfile, lam: float) -> OperatorMatrix:
    """A^lam (fkdv/gfkdv) or B^lam (fbbm): the growing-mode detector family.

    fkdv: A^lam v = c v + R_lam [c (phi_c v - M v)], R_lam = d/dx (lam - c d/dx)^{-1}.
    fbbm: B^lam v = (1 + D^alpha) v + R_lam [v + 2 psi_c v].
    A nontrivial kernel of the family at some lam > 0 is a growing mode.
    """
    if lam <= 0:
        raise ParamsForbidden(f"mode-family parameter must be positive, got {lam}")
    p = w.params
    g = w.grid
    R = multiplier_matrix(g, resolvent_dx(lam, p.c)).astype(complex)
    if p.family == FBBM:
        mat = multiplier_matrix(g, gs.bbm_mass(p.alpha)).astype(complex)
        mat += R @ (np.eye(g.N) + np.diag(2.0 * w.values))
        tag = "bbm_mode_family"
    else:
        M = multiplier_matrix(g, p.dispersion())
        nu_fac = (p.p + 1) * p.nu  # derivative of the nonlinearity
        mat = p.c * np.eye(g.N, dtype=complex)
        mat += R @ (p.c * (np.diag(nu_fac * w.values**p.p) - M))
        tag = "kdv_mode_family"
    return OperatorMatrix(mat, g, tag, False, {"lam": lam, "family": p.family})


def assemble_evolution_generator(w: WaveProfile) -> OperatorMatrix:
    """The linearized-evolution generator whose Re > 0 spectrum is instability.

    fkdv: d/dx L_c (Hamiltonian form of the linearization in the moving
    frame); fbbm: (1 + D^alpha)^{-1} [c d/dx (1 + D^alpha) - d/dx (1 + 2 psi_c)],
    obtained by clearing the resolvent from the B^lam kernel condition.
    """
    p = w.params
    g = w.grid
    D1 = multiplier_matrix(g, derivative())
    if p.family == FBBM:
        B = multiplier_matrix(g, gs.bbm_mass(p.alpha))
        Binv = multiplier_matrix(
            g, SymbolSpec("bbm_mass_inv", lambda xi: 1.0 / (1.0 + np.abs(xi) ** p.alpha))
        )
        inner = p.c * (D1 @ B) - D1 @ (np.eye(g.N) + np.diag(2.0 * w.values))
        mat = Binv @ inner
        tag = "bbm_generator"
    else:
        L = assemble_linearized(w).matrix
        mat = D1 @ L
        tag = "kdv_generator"
    return OperatorMatrix(mat, g, tag, False, {"family": p.family, "c": p.c})


# ---------------------------------------------------------------------------
# identities satisfied by the continuum operators

def _taper(g: Grid, start: float = 0.85) -> np.ndarray:
    """Raised-cosine window, flat on |x| <= start*L, zero at the ends."""
    a = np.abs(g.x) / g.L
    t = np.ones(g.N)
    ramp = (a - start) / (1.0 - start)
    sel = ramp > 0
    t[sel] = 0.5 * (1.0 + np.cos(np.pi * np.clip(ramp[sel], 0.0, 1.0)))
    return t


def operator_oracles(w: WaveProfile, sigma: float = -0.1) -> dict:
    """Relative residuals of two exact continuum identities of L_c.

    (1) L_c(alpha phi + x phi') = -alpha c phi for p = 1 (dilation
    relation); (2) at alpha = 1/2, the explicit preimage
    f0 = -(1/c) phi - ((2 + 2 c sigma)/c) x phi' satisfies
    L_c f0 = phi - sigma D^{1/2} phi. The x-weighted fields are tapered
    near the domain ends because x is not periodic.
    """
    p = w.params
    g = w.grid
    if p.family == FBBM or p.p != 1:
        raise ParamsForbidden("operator oracles apply to the p=1 fkdv families")
    L = linearized_operator(w)
    taper = _taper(g)
    phi = w.values
    dphi = apply_multiplier(w.field, derivative()).values
    xdphi = taper * g.x * dphi
    nrm = np.sqrt(gs.l2_norm_sq(w.field))

    out = {}
    R = p.alpha * phi + xdphi
    res = L @ R + p.alpha * p.c * phi
    out["dilation_residual"] = float(np.sqrt(gs.l2_norm_sq(res, g)) / nrm)

    if abs(p.alpha - 0.5) < 1e-12:
        f0 = -(1.0 / p.c) * phi - ((2.0 + 2.0 * p.c * sigma) / p.c) * xdphi
        target = phi - sigma * apply_multiplier(w.field, power(0.5)).values
        res = L @ f0 - target
        out["preimage_residual"] = float(np.sqrt(gs.l2_norm_sq(res, g)) / nrm)
        out["sigma"] = sigma
    return out

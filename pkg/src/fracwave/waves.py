"""Solitary-wave profiles: Petviashvili iteration, scaling laws, diagnostics.

Two normalizations of the fKdV profile equation are kept explicit:

  "pde":  D^alpha phi + c phi - phi^{p+1}/(p+1) = 0
          (the traveling-wave equation of u_t + u^p u_x - D^alpha u_x = 0)
  "unit": D^alpha Q + c Q - Q^{p+1} = 0
          (ground-state normalization; phi = (p+1)^{1/p} Q)

The fBBM profile solves D^alpha psi + (1 - 1/c) psi - psi^2/c = 0.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import grid as gs
from .errors import (
    CollapseToConstant,
    CollapseToZero,
    NonConvergence,
    ParamsForbidden,
    ZeroDenominator,
)
from .grid import Field, Grid, apply_multiplier, power

FKDV = "fkdv"
GFKDV = "gfkdv"
FBBM = "fbbm"

NORM_PDE = "pde"
NORM_UNIT = "unit"


@dataclass(frozen=True)
class ModelParams:
    family: str
    alpha: float
    p: int = 1
    c: float = 1.0
    normalization: str = NORM_PDE
    symbol: gs.SymbolSpec | None = None  # gfkdv dispersion; None means power(alpha)

    def __post_init__(self):
        if self.family not in (FKDV, GFKDV, FBBM):
            raise ParamsForbidden(f"unknown family {self.family!r}")
        if self.normalization not in (NORM_PDE, NORM_UNIT):
            raise ParamsForbidden(f"unknown normalization {self.normalization!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ParamsForbidden(f"nonlinearity power must be a positive integer, got {self.p}")
        a, p, c = self.alpha, self.p, self.c
        if self.family in (FKDV, GFKDV):
            if c <= 0:
                raise ParamsForbidden(f"wave speed must be positive, got c={c}")
            if self.family == FKDV:
                if not 0 < a <= 2:
                    raise ParamsForbidden(f"dispersion exponent must lie in (0, 2], got {a}")
                # for alpha < 1 finite-energy waves need alpha > p/(p+2),
                # equivalently p < 2 alpha/(1 - alpha)
                if a < 1 and a <= p / (p + 2):
                    raise ParamsForbidden(
                        f"no finite-energy solitary waves for alpha={a} <= p/(p+2)={p/(p+2):.4g}"
                    )
        else:  # fbbm
            if not (1.0 / 3.0 < a < 1):
                raise ParamsForbidden(
                    f"fbbm requires dispersion exponent in (1/3, 1), got {a}"
                )
            if c <= 1:
                raise ParamsForbidden(f"fbbm requires wave speed > 1, got c={c}")
            if p != 1:
                raise ParamsForbidden("fbbm implemented for quadratic nonlinearity only")

    @property
    def width_scale(self) -> float:
        """Characteristic spatial width of the profile."""
        if self.family == FBBM:
            return (self.c / (self.c - 1.0)) ** (1.0 / self.alpha)
        return self.c ** (-1.0 / self.alpha)

    @property
    def mass_shift(self) -> float:
        """Constant m in the fixed-point operator D^alpha + m."""
        return self.c if self.family != FBBM else 1.0 - 1.0 / self.c

    @property
    def nu(self) -> float:
        """Coefficient of phi^{p+1} in the profile equation."""
        if self.family == FBBM:
            return 1.0 / self.c
        return 1.0 / (self.p + 1) if self.normalization == NORM_PDE else 1.0

    def dispersion(self) -> gs.SymbolSpec:
        if self.family == GFKDV and self.symbol is not None:
            return self.symbol
        return power(self.alpha)

    def cache_key(self, L: float, N: int, tol: float) -> str:
        blob = json.dumps(
            {
                "family": self.family,
                "alpha": self.alpha,
                "p": self.p,
                "c": self.c,
                "nu": self.normalization,
                "symbol": self.symbol.name if self.symbol else None,
                "L": L,
                "N": N,
                "tol": tol,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:24]


@dataclass
class WaveProfile:
    field: Field
    params: ModelParams
    residual: float
    mass: float       # ||phi||^2
    seminorm: float   # ||D^{alpha/2} phi||^2
    peak_position: float
    iterations: int = 0

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


@dataclass
class DecayReport:
    exponent: float | None
    constant: float | None
    window: tuple
    passed: bool
    applicable: bool = True


# Measured full width at half maximum of the unit (c=1) ground state for
# p=1 as a function of alpha. The profile collapses rapidly as alpha
# approaches the existence threshold 1/3: the core narrows by orders of
# magnitude while the |x|^{-(1+alpha)} tail stays long, so grids there
# need a huge dynamic range.
_CORE_WIDTH_TABLE = (
    (0.35, 4.6e-5),
    (0.36, 2.2e-4),
    (0.40, 4.6e-3),
    (0.50, 0.117),
    (0.60, 0.415),
    (0.75, 1.04),
    (1.00, 1.99),
    (1.50, 2.93),
    (2.00, 3.52),
)


def core_width(alpha: float, p: int = 1, c: float = 1.0) -> float:
    """Estimated full width at half maximum of the ground-state core."""
    xs = np.log([row[0] for row in _CORE_WIDTH_TABLE])
    ys = np.log([row[1] for row in _CORE_WIDTH_TABLE])
    w1 = float(np.exp(np.interp(np.log(alpha), xs, ys)))
    return w1 * c ** (-1.0 / alpha)


def suggest_grid(params: ModelParams, *, max_points: int = 1 << 21) -> Grid:
    """Default grid: resolves the core width, keeps the tail truncation small.

    The half-length tracks the algebraic tail (longer for small alpha),
    the spacing tracks the measured core width; both scale with speed.
    """
    if params.family == FBBM:
        b = params.width_scale  # (c/(c-1))^{1/alpha}
        w = core_width(params.alpha) * b
        L = max(60.0 * b, 20.0 * w)
    else:
        scale = params.width_scale  # c^{-1/alpha}
        w = core_width(params.alpha, params.p, params.c)
        tail = 400.0 if params.alpha < 0.5 else 200.0
        L = max(tail * scale, 20.0 * w)
    dx = min(0.1 * max(L / 200.0, 1.0), w / 12.0)
    if 2.0 * L / dx > 1.5 * max_points:
        # the point budget cannot cover the long tail at this core
        # resolution; a narrow core carries almost no tail mass, so keep
        # dx and shorten the torus instead of under-resolving the core.
        L = max(0.5 * max_points * dx, 20.0 * w)
    N = 1 << int(np.ceil(np.log2(2.0 * L / dx)))
    N = min(max(N, 1024), max_points)
    return Grid(L, N)


def profile_equation_residual(params: ModelParams, f: Field) -> float:
    """Relative L2 residual of the profile equation at f."""
    disp = apply_multiplier(f, params.dispersion())
    nl = gs.nonlinear_power(f, params.p + 1)
    res = disp.values + params.mass_shift * f.values - params.nu * nl.values
    denom = np.sqrt(gs.l2_norm_sq(f)) or 1.0
    return float(np.sqrt(gs.l2_norm_sq(Field(f.grid, res))) / denom)


def _recenter(f: Field) -> tuple[Field, float]:
    """Shift the peak to x = 0 (parabola-refined, ties to the leftmost)."""
    v = f.values
    j = int(np.argmax(v))  # argmax returns the first (leftmost) maximum
    g = f.grid
    jm, jp = (j - 1) % g.N, (j + 1) % g.N
    a, b, c = v[jm], v[j], v[jp]
    denom = a - 2 * b + c
    off = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    peak = g.x[j] + off * g.dx
    return gs.translate(f, -peak), peak


def _symmetrize(u):
    """Even part about x = 0 (index 0 maps to itself on [-L, L))."""
    r = u[::-1]
    return 0.5 * (u + np.roll(r, 1))


def _petviashvili(
    params: ModelParams,
    grid: Grid,
    u,
    max_iter: int,
    tol: float,
    symmetrize: bool = True,
    strict: bool = True,
):
    """Run the iteration from samples u; returns (u, iterations, residual).

    Real transforms throughout; the residual comes from the same spectra
    as the update (Parseval), so each step costs three big FFTs. With
    ``strict`` false, iteration-limit overruns return the best iterate
    instead of raising (used by the continuation ladder's inner rungs).
    """
    N = grid.N
    m = params.mass_shift
    sym = params.dispersion().values(np.abs(2 * np.pi * np.fft.rfftfreq(N, grid.dx)))
    sym = np.asarray(sym).real + m
    # pairing weights: interior rfft modes represent two conjugate modes
    wt = np.full(N // 2 + 1, 2.0)
    wt[0] = 1.0
    wt[-1] = 1.0
    p = params.p
    gamma = (p + 1.0) / p
    M = 2 * N  # alias-free padding for u^{p+1} up to p = 3
    while M < (p + 2) * N // 2:
        M *= 2
    mass0 = gs.l2_norm_sq(u, grid)

    it = 0
    residual = np.inf
    last_S = np.nan
    prev_diff = None
    for it in range(1, max_iter + 1):
        if symmetrize:
            u = _symmetrize(u)
        uhat = np.fft.rfft(u)
        big = np.zeros(M // 2 + 1, dtype=complex)
        big[: N // 2 + 1] = uhat
        big[N // 2] *= 0.5  # split Nyquist
        up = np.fft.irfft(big, n=M) * (M / N)
        what = np.fft.rfft(params.nu * up ** (p + 1))[: N // 2 + 1] * (N / M)
        num = float(np.sum(wt * sym * np.abs(uhat) ** 2))
        den = float(np.sum(wt * np.real(np.conj(uhat) * what)))
        if abs(den) < 1e-300:
            raise CollapseToZero("nonlinear pairing vanished")
        last_S = num / den
        unorm = np.sqrt(float(np.sum(wt * np.abs(uhat) ** 2))) or 1.0
        residual = float(
            np.sqrt(np.sum(wt * np.abs(sym * uhat - what) ** 2)) / unorm
        )
        unew = np.fft.irfft(what / sym, n=N) * last_S**gamma
        new_mass = gs.l2_norm_sq(unew, grid)
        if new_mass < 1e-24 * mass0:
            raise CollapseToZero("iterates lost essentially all mass")
        d = unew - u
        diff = float(np.max(np.abs(d)) / np.max(np.abs(unew)))
        u = unew
        if max(diff, residual) < tol:
            break
        # Aitken step: near the fixed point the error is dominated by a
        # single slow mode with contraction rho; extrapolate it away
        if prev_diff is not None and it % 5 == 0:
            dd = float(d @ prev_diff)
            nn = float(prev_diff @ prev_diff)
            if nn > 0:
                rho = dd / nn
                cosang = dd / (np.sqrt(nn) * (np.linalg.norm(d) or 1.0))
                if 0.2 < rho < 0.995 and cosang > 0.95:
                    u = u + d * (rho / (1.0 - rho))
                    prev_diff = None
                    continue
        prev_diff = d
    else:
        if strict:
            raise NonConvergence(max_iter, residual)
    return u, it, residual, last_S


def solve_ground_state(
    params: ModelParams,
    grid: Grid | None = None,
    *,
    max_iter: int = 600,
    tol: float = 1e-10,
    sigma0: float = 4.0,
    initial: Field | None = None,
    cache_dir=None,
    use_cache: bool = True,
    coarse_n: int = 16384,
    symmetrize: bool = True,
) -> WaveProfile:
    """Petviashvili iteration for the ground-state profile.

    Fixed point phi = (D^alpha + m)^{-1} n(phi) with the stabilizing
    exponent gamma = (p+1)/p on the mass ratio each step. Grids larger
    than ``coarse_n`` are reached by continuation: converge on a
    coarsened grid first, then upsample and polish, doubling N each
    stage. That keeps the cost of the very fine grids needed near the
    small-alpha existence threshold to a handful of iterations each.
    """
    if grid is None:
        grid = suggest_grid(params)

    if cache_dir is None:
        cache_dir = default_cache_dir()
    if use_cache and cache_dir is not None:
        cached = _cache_load(cache_dir, params, grid, tol)
        if cached is not None:
            return cached

    if params.family == FBBM:
        w0 = core_width(params.alpha) * params.width_scale
    else:
        w0 = core_width(params.alpha, params.p, params.c)

    total_it = 0
    if initial is not None:
        u = initial.values.astype(float).copy()
        work = grid
    else:
        work = grid
        # coarsen for the continuation ladder, but never past the point
        # where the core itself drops below a few samples
        while work.N > max(coarse_n, 1024) and 4.0 * grid.L / (work.N // 2) <= w0:
            work = Grid(grid.L, work.N // 2)
        u = np.exp(-((work.x / (sigma0 * w0)) ** 2))

    while True:
        final = work.N >= grid.N
        u, it, residual, _ = _petviashvili(
            params, work, u,
            max_iter if final else min(max_iter, 80),
            tol, symmetrize=symmetrize, strict=final,
        )
        total_it += it
        if final:
            break
        u = gs.refine(Field(work, u), 2).values
        work = Grid(grid.L, work.N * 2)

    span = float(np.max(u) - np.min(u))
    if span <= 1e-3 * max(abs(float(np.max(u))), abs(float(np.min(u)))):
        # the flat branch phi = ((p+1) c nu)^{1/p} also has zero residual
        raise CollapseToConstant(
            f"iteration reached the constant branch (span {span:.2e})")
    centered, peak = _recenter(Field(grid, u))
    residual = profile_equation_residual(params, centered)
    prof = WaveProfile(
        field=centered,
        params=params,
        residual=residual,
        mass=gs.l2_norm_sq(centered),
        seminorm=gs.seminorm_sq(centered, params.alpha / 2.0),
        peak_position=0.0,
        iterations=total_it,
    )
    if use_cache and cache_dir is not None:
        _cache_store(cache_dir, prof, grid, tol)
    return prof


# ---------------------------------------------------------------------------
# scaling laws

def rescale_profile(base: WaveProfile, c: float) -> WaveProfile:
    """Speed-c profile from the normalized base via the family scaling law.

    fkdv/gfkdv: base must be the c=1 profile; phi_c(x) = c^{1/p} phi_1(c^{1/alpha} x)
    in either normalization. fbbm: base is the unit ground state Q of
    D^alpha Q + Q - Q^2 = 0; psi_c(x) = (c-1) Q(x / b), b = (c/(c-1))^{1/alpha}.
    """
    bp = base.params
    g = base.grid
    if bp.family == FBBM:
        raise ParamsForbidden("fbbm profiles are rescaled from the unit base; see rescale_fbbm")
    if bp.c != 1.0:
        raise ParamsForbidden("rescaling requires the normalized c=1 base profile")
    if c <= 0:
        raise ParamsForbidden(f"wave speed must be positive, got {c}")
    theta = c ** (1.0 / bp.alpha)
    amp = c ** (1.0 / bp.p)
    pts = np.mod(theta * g.x + g.L, 2 * g.L) - g.L
    vals = amp * gs.sample_interpolant(base.field, pts)
    newp = replace(bp, c=float(c))
    f = Field(g, vals)
    return WaveProfile(
        field=f,
        params=newp,
        residual=profile_equation_residual(newp, f),
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, newp.alpha / 2.0),
        peak_position=0.0,
        iterations=base.iterations,
    )


def rescale_fbbm(base: WaveProfile, c: float) -> WaveProfile:
    """fBBM profile psi_c from the unit ground state of D^a Q + Q - Q^2 = 0."""
    bp = base.params
    g = base.grid
    if not (bp.family == FKDV and bp.p == 1 and bp.c == 1.0 and bp.normalization == NORM_UNIT):
        raise ParamsForbidden("fbbm rescaling needs the unit-normalized p=1, c=1 base")
    newp = ModelParams(FBBM, bp.alpha, 1, float(c))  # validates c > 1, alpha range
    b = (c / (c - 1.0)) ** (1.0 / bp.alpha)
    vals = (c - 1.0) * gs.sample_interpolant(base.field, g.x / b)
    f = Field(g, vals)
    return WaveProfile(
        field=f,
        params=newp,
        residual=profile_equation_residual(newp, f),
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, newp.alpha / 2.0),
        peak_position=0.0,
        iterations=base.iterations,
    )


def rescale_exact(base: WaveProfile, c: float) -> WaveProfile:
    """Speed-c profile by relabeling the grid of the c=1 base (no interpolation).

    phi_c(x) = c^{1/p} phi_1(c^{1/alpha} x) maps samples on Grid(L, N)
    exactly onto Grid(L c^{-1/alpha}, N), since the nodes scale with L.
    Exact up to the amplitude factor, so it preserves relative residuals;
    useful at grid sizes where interpolation is too expensive.
    """
    bp = base.params
    if bp.family == FBBM:
        raise ParamsForbidden("exact rescaling applies to the fkdv families")
    if bp.c != 1.0:
        raise ParamsForbidden("rescaling requires the normalized c=1 base profile")
    if c <= 0:
        raise ParamsForbidden(f"wave speed must be positive, got {c}")
    g = base.grid
    newg = Grid(g.L * c ** (-1.0 / bp.alpha), g.N)
    amp = c ** (1.0 / bp.p)
    f = Field(newg, amp * base.values)
    newp = replace(bp, c=float(c))
    return WaveProfile(
        field=f,
        params=newp,
        residual=base.residual,
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, newp.alpha / 2.0),
        peak_position=0.0,
        iterations=base.iterations,
    )


def rescale_fbbm_exact(base: WaveProfile, c: float) -> WaveProfile:
    """fBBM profile from the unit ground state by exact grid relabeling.

    psi_c(x) = (c-1) Q(x/b) with b = (c/(c-1))^{1/alpha} maps samples on
    Grid(L, N) onto Grid(L*b, N) with no interpolation. The relabeled
    field satisfies the discrete fBBM profile equation exactly: the
    dilation scales the |xi|^alpha symbol by b^{-alpha} = (c-1)/c, which
    turns D^alpha Q + Q - Q^2 = 0 into the psi_c equation term by term.
    """
    bp = base.params
    if not (bp.family == FKDV and bp.p == 1 and bp.c == 1.0 and bp.normalization == NORM_UNIT):
        raise ParamsForbidden("fbbm rescaling needs the unit-normalized p=1, c=1 base")
    newp = ModelParams(FBBM, bp.alpha, 1, float(c))
    b = (c / (c - 1.0)) ** (1.0 / bp.alpha)
    g = base.grid
    newg = Grid(g.L * b, g.N)
    f = Field(newg, (c - 1.0) * base.values)
    return WaveProfile(
        field=f,
        params=newp,
        residual=base.residual,
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, newp.alpha / 2.0),
        peak_position=0.0,
        iterations=base.iterations,
    )


def convert_normalization(w: WaveProfile, normalization: str) -> WaveProfile:
    """Map between the pde and unit forms: phi = (p+1)^{1/p} Q."""
    if normalization == w.params.normalization:
        return w
    k = (w.params.p + 1.0) ** (1.0 / w.params.p)
    factor = k if normalization == NORM_PDE else 1.0 / k
    f = Field(w.grid, factor * w.values)
    newp = replace(w.params, normalization=normalization)
    return WaveProfile(
        field=f,
        params=newp,
        residual=profile_equation_residual(newp, f),
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, newp.alpha / 2.0),
        peak_position=w.peak_position,
        iterations=w.iterations,
    )


# ---------------------------------------------------------------------------
# diagnostics

def restrict_profile(w: WaveProfile, grid: Grid) -> WaveProfile:
    """Sample a converged profile onto a smaller periodic grid.

    Used to study operators at the wave's core scale on grids far too
    small to hold the full tail: the local potential near the core is
    preserved, while the equation residual on the small torus reflects
    the wrapped tail and is reported as-is. Linear interpolation, so the
    target spacing should not be finer than the source spacing.
    """
    if grid.L > w.grid.L:
        raise ParamsForbidden("restriction target must fit inside the source domain")
    vals = np.interp(grid.x, w.grid.x, np.asarray(w.values, dtype=float))
    f = Field(grid, vals)
    return WaveProfile(
        field=f,
        params=w.params,
        residual=profile_equation_residual(w.params, f),
        mass=gs.l2_norm_sq(f),
        seminorm=gs.seminorm_sq(f, w.params.alpha / 2.0),
        peak_position=0.0,
        iterations=w.iterations,
    )


def pohozaev_residual(w: WaveProfile) -> float:
    a, p, c = w.params.alpha, w.params.p, w.params.c
    if w.params.family == FBBM:
        target = (1.0 - 1.0 / c) * w.mass
        return abs((3 * a - 1) * w.seminorm - target) / target
    target = c * p * w.mass
    return abs((a * (p + 2) - p) * w.seminorm - target) / target


def pohozaev_signed(w: WaveProfile) -> float:
    """Signed version of pohozaev_residual (sign of the S excess)."""
    a, p, c = w.params.alpha, w.params.p, w.params.c
    if w.params.family == FBBM:
        target = (1.0 - 1.0 / c) * w.mass
        return ((3 * a - 1) * w.seminorm - target) / target
    target = c * p * w.mass
    return ((a * (p + 2) - p) * w.seminorm - target) / target


def pohozaev_extrapolated(
    params: ModelParams,
    *,
    factors=None,
    dx: float | None = None,
    use_cache: bool = True,
) -> dict:
    """Pohozaev residual of the underlying line profile, by extrapolation in L.

    On a periodic domain the algebraic |x|^{-(1+alpha)} tails wrap around,
    which perturbs the identity at O(L^{-(1+alpha)}) with a clean
    O(L^{-(1+2alpha)}) correction; solving on a ladder of domain sizes at
    fixed spacing and fitting those two powers isolates the L-independent
    part. That part is the line-problem residual (plus the fixed
    Galerkin bias of the chosen spacing).
    """
    a = params.alpha
    scale = params.width_scale
    w1 = core_width(a, params.p)
    if factors is None:
        factors = (100.0, 200.0, 400.0) if a < 0.5 else (200.0, 400.0, 800.0)
    if dx is None:
        dx = w1 / 12.0
    # solve the normalized base ladder once (cache-shared across speeds),
    # then map each level by the exact dilation relabeling
    general_symbol = params.family == GFKDV and params.symbol is not None
    if params.family == FBBM:
        base_params = ModelParams(FKDV, a, 1, 1.0, NORM_UNIT)
    elif general_symbol:
        base_params = params  # no dilation symmetry for general symbols
    else:
        base_params = replace(params, c=1.0)
    levels = []
    Ls = []
    for f in factors:
        N = 1 << int(np.ceil(np.log2(2.0 * f / dx)))
        N = max(N, 1024)
        L0 = float(f) * (scale if general_symbol else 1.0)
        base = solve_ground_state(base_params, Grid(L0, N), use_cache=use_cache)
        if params.family == FBBM:
            prof = rescale_fbbm_exact(base, params.c)
        elif params.c != 1.0 and not general_symbol:
            prof = rescale_exact(base, params.c)
        else:
            prof = base
        Ls.append(prof.grid.L)
        levels.append(pohozaev_signed(prof))
    x = np.asarray(Ls)
    A = np.vstack([np.ones(len(x)), x ** -(1 + a), x ** -(1 + 2 * a)]).T
    coef, *_ = np.linalg.lstsq(A, np.asarray(levels), rcond=None)
    return {
        "residual": abs(float(coef[0])),
        "signed": float(coef[0]),
        "levels": levels,
        "L": Ls,
        "dx": dx,
    }


def energy_mass(f: Field, params: ModelParams) -> tuple[float, float]:
    """Conserved energy and half-mass of the fKdV flow.

    E = (1/2)||D^{alpha/2} f||^2 - integral f^{p+2} / ((p+1)(p+2)),
    F = (1/2)||f||^2. The nonlinear integral is evaluated alias-free.
    """
    p = params.p
    semi = gs.seminorm_sq(f, params.alpha / 2.0)
    nl = gs.integral_power(f, p + 2)
    E = 0.5 * semi - nl / ((p + 1.0) * (p + 2.0))
    F = 0.5 * gs.l2_norm_sq(f)
    return E, F


def weinstein_value(f: Field, alpha: float, p: int) -> float:
    """The scale- and amplitude-invariant quotient minimized by ground states:

    J = S^{p/(2a)} * M^{p(a-1)/(2a) + 1} / integral |f|^{p+2},
    S = ||D^{a/2} f||^2, M = ||f||^2.
    """
    M = gs.l2_norm_sq(f)
    if M == 0:
        raise ZeroDenominator("zero field")
    denom = gs.integral_power(Field(f.grid, np.abs(f.values)), p + 2)
    if denom <= 0:
        raise ZeroDenominator("integral |f|^{p+2} vanishes")
    S = gs.seminorm_sq(f, alpha / 2.0)
    e1 = p / (2.0 * alpha)
    e2 = e1 * (alpha - 1.0) + 1.0
    return S**e1 * M**e2 / denom


def decay_check(w: WaveProfile) -> DecayReport:
    """Fit |Q(x)| ~ C x^e on [0.5L, 0.9L]; pass iff e is within 0.3 of -(alpha+1)."""
    g = w.grid
    lo, hi = 0.5 * g.L, 0.9 * g.L
    sel = (g.x >= lo) & (g.x <= hi)
    tail = np.abs(w.values[sel])
    if tail.max() < 1e-13:
        return DecayReport(None, None, (lo, hi), passed=False, applicable=False)
    xs = np.log(g.x[sel])
    ys = np.log(np.maximum(tail, 1e-300))
    e, logC = np.polyfit(xs, ys, 1)
    expected = -(w.params.alpha + 1.0)
    return DecayReport(
        exponent=float(e),
        constant=float(np.exp(logC)),
        window=(lo, hi),
        passed=bool(abs(e - expected) <= 0.3),
    )


# ---------------------------------------------------------------------------
# profile cache

def default_cache_dir():
    env = os.environ.get("FRACWAVE_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "fracwave"


def _cache_paths(cache_dir, key):
    d = Path(cache_dir)
    return d / f"{key}.fld", d / f"{key}.json"


def _cache_store(cache_dir, prof: WaveProfile, grid: Grid, tol: float):
    try:
        key = prof.params.cache_key(grid.L, grid.N, tol)
        fld, meta = _cache_paths(cache_dir, key)
        fld.parent.mkdir(parents=True, exist_ok=True)
        gs.save_field(fld, prof.field)
        meta.write_text(
            json.dumps(
                {
                    "residual": prof.residual,
                    "mass": prof.mass,
                    "seminorm": prof.seminorm,
                    "iterations": prof.iterations,
                }
            )
        )
    except OSError:
        pass  # cache is best-effort


def _cache_load(cache_dir, params: ModelParams, grid: Grid, tol: float):
    key = params.cache_key(grid.L, grid.N, tol)
    fld, meta = _cache_paths(cache_dir, key)
    if not (fld.exists() and meta.exists()):
        return None
    try:
        f = gs.load_field(fld)
        info = json.loads(meta.read_text())
    except (OSError, ValueError):
        return None
    if f.grid != grid:
        return None
    return WaveProfile(
        field=f,
        params=params,
        residual=info["residual"],
        mass=info["mass"],
        seminorm=info["seminorm"],
        peak_position=0.0,
        iterations=info.get("iterations", 0),
    )

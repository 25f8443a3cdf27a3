"""Exception types shared across the package."""


class FracwaveError(Exception):
    """Base class for all package-specific errors."""


class GridError(FracwaveError, ValueError):
    """Invalid grid construction parameters."""


class OddSize(GridError):
    """Grid size must be even."""


class ParamsForbidden(FracwaveError, ValueError):
    """Model parameters violate an existence constraint."""


class NonConvergence(FracwaveError, RuntimeError):
    """Iteration failed to reach the requested tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class CollapseToZero(FracwaveError, RuntimeError):
    """Fixed-point iterates lost essentially all mass."""


class CollapseToConstant(FracwaveError, RuntimeError):
    """Iteration landed on the flat branch, which also solves the profile
    equation with zero residual but carries no localized structure."""


class AsymmetricInput(FracwaveError, ValueError):
    """Operation requires a symmetric operator matrix."""


class IllConditioned(FracwaveError, RuntimeError):
    """Restricted linear system too ill-conditioned to trust."""


class ZeroDenominator(FracwaveError, ZeroDivisionError):
    """Functional undefined for this input (vanishing denominator)."""


class MethodDisagreement(FracwaveError, RuntimeError):
    """Independent numerical methods disagree beyond tolerance."""

    def __init__(self, message, results=None):
        self.results = results or {}
        super().__init__(message)


class ComplexNearKernelEigenvalue(FracwaveError, RuntimeError):
    """Near-kernel eigenvalue has a non-negligible imaginary part."""


class FitUnstable(FracwaveError, RuntimeError):
    """Least-squares fit residual too large to report a coefficient."""


class BlowupDetected(FracwaveError, RuntimeError):
    """Evolution terminated by the amplitude/seminorm guard."""


class NonFiniteSample(FracwaveError, RuntimeError):
    """Evolution produced NaN or Inf samples."""


class WrongRegime(FracwaveError, ValueError):
    """Diagnostic only defined in the critical regime alpha=1/2, p=1."""


class WindowEmpty(FracwaveError, ValueError):
    """No data points fall inside the requested fitting window."""


class SolverFailure(FracwaveError, RuntimeError):
    """A sub-solve inside a finite-difference stencil failed."""


class AmbiguousKernel(FracwaveError, RuntimeError):
    """Kernel band not cleanly separated from the rest of the spectrum."""


class DegenerateRhs(FracwaveError, ValueError):
    """Right-hand side lies entirely inside the operator kernel."""


class TailBelowNoise(FracwaveError, RuntimeError):
    """Profile tail is below quadrature noise; decay fit not applicable."""

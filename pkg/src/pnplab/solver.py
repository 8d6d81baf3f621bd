"""Fixed-point solver for denoiser-regularised least squares.

The iteration composes a gradient step on the quadratic data term with a
scaled denoiser and runs it to a fixed point. For non-expansive bases and
scales above one the composition is an averaged operator, so the iteration
converges whenever a fixed point exists; the averagedness arithmetic lives
here too, next to an exact linear-algebra oracle for affine denoisers that
the iterative path is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoisers import AffineDenoiser, ScaledDenoiser, gamma_factor
from .linop import LinearOperator, as_signal

__all__ = [
    "PnpConfig",
    "FixedPointResult",
    "DivergenceError",
    "NoUniqueFixedPointError",
    "averagedness_theta",
    "compose_averaged",
    "pnp_pgd",
    "scaled_affine_map",
    "linear_fixed_point_oracle",
]

# Iterate norms beyond this abort the run as a divergence; expansive effective
# maps (e.g. homogeneous scaling of the wrong base) must be recorded, not crash.
_DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    """Raised when an iterate leaves the trust region; carries the iteration."""

    def __init__(self, iteration: int):
        super().__init__(f"iterate diverged (norm > {_DIVERGENCE_NORM:g}) at iteration {iteration}")
        self.iteration = iteration


class NoUniqueFixedPointError(RuntimeError):
    """Raised by the affine oracle when the iteration map is not a contraction."""


@dataclass
class PnpConfig:
    """Solver parameters.

    ``tau`` is the gradient step size; ``None`` means the certified default
    ``1 / ||A^T A||``, estimated from the operator at solve time. The
    convergence certificate needs ``tau <= 1 / ||A^T A||``. ``tol`` is the
    relative successive-iterate threshold, and ``max_iters`` caps the run
    (experiment parity uses 300; library callers may raise it).
    """

    tau: float | None = None
    max_iters: int = 300
    tol: float = 1e-9
    record_history: bool = True

    def __post_init__(self):
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class FixedPointResult:
    """Outcome of a fixed-point run."""

    x_star: np.ndarray
    iterations: int
    converged: bool
    residual_history: np.ndarray
    objective_history: np.ndarray
    step_size_warning: bool = False


def averagedness_theta(delta: float) -> float:
    """Averagedness constant ``delta^2 / (2 delta^2 - 1)`` of the composed map.

    Defined for ``delta^2 > 1/2``; lies in (1/2, 1) exactly when
    ``delta^2 > 1``, which is the regime with a convergence guarantee.
    """
    d2 = delta * delta
    if 2.0 * d2 - 1.0 <= 0:
        raise ValueError("delta^2 must exceed 1/2")
    return d2 / (2.0 * d2 - 1.0)


def compose_averaged(theta1: float, theta2: float) -> float:
    """Averagedness constant of a composition of averaged operators."""
    if not (0.0 < theta1 < 1.0 and 0.0 < theta2 < 1.0):
        raise ValueError("averagedness constants must lie in (0, 1)")
    return (theta1 + theta2 - 2.0 * theta1 * theta2) / (1.0 - theta1 * theta2)


def pnp_pgd(
    op: LinearOperator,
    y: np.ndarray,
    denoiser: ScaledDenoiser,
    config: PnpConfig,
    x0: np.ndarray | None = None,
) -> FixedPointResult:
    """Iterate ``x <- D(x - tau * A^T (A x - y))`` to a fixed point.

    Parameters
    ----------
    op : forward operator A.
    y : measurement vector of length ``op.out_dim``.
    denoiser : scaled denoiser applied after each gradient step.
    config : step size, tolerance, iteration cap, history switch.
    x0 : starting iterate; defaults to the zero vector.

    Returns a :class:`FixedPointResult`. ``converged`` means the last
    successive-iterate residual fell below ``tol * (1 + |x|)``. A step size
    above ``1 / ||A^T A||`` voids the convergence certificate and is recorded
    as ``step_size_warning`` rather than raised. Iterates whose norm exceeds
    1e12 raise :class:`DivergenceError` carrying the iteration index.
    """
    y = as_signal(y, op.out_dim)
    if x0 is None:
        x = np.zeros(op.in_dim)
    else:
        x = as_signal(x0, op.in_dim).copy()
    if denoiser.dim != op.in_dim:
        raise ValueError(
            f"denoiser dim {denoiser.dim} does not match operator in_dim {op.in_dim}"
        )
    certified = 1.0 / max(op.op_norm_sq(), 1e-300)
    tau = certified if config.tau is None else config.tau
    warn = tau > certified * (1.0 + 1e-9)

    residuals: list[float] = []
    objectives: list[float] = []
    iterations = 0
    converged = False
    for i in range(config.max_iters):
        x_next = denoiser(op.gradient_step(y, tau, x))
        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > _DIVERGENCE_NORM:
            raise DivergenceError(i + 1)
        residual = float(np.linalg.norm(x_next - x))
        iterations = i + 1
        if config.record_history:
            residuals.append(residual)
            r = op.apply(x_next) - y
            objectives.append(0.5 * float(r @ r))
        x = x_next
        if residual <= config.tol * (1.0 + float(np.linalg.norm(x))):
            converged = True
            break
    return FixedPointResult(
        x_star=x,
        iterations=iterations,
        converged=converged,
        residual_history=np.asarray(residuals),
        objective_history=np.asarray(objectives),
        step_size_warning=bool(warn),
    )


def scaled_affine_map(denoiser: ScaledDenoiser) -> tuple[np.ndarray, np.ndarray]:
    """The (matrix, offset) form of a scaled denoiser over an affine base.

    Residual scaling gives ``((1-u) I + u W, u b)`` with ``u = 1/delta^2``;
    argument scaling gives ``(W, b / delta)``. The gamma rescale multiplies
    both parts.
    """
    base = denoiser.base
    if not isinstance(base, AffineDenoiser):
        raise ValueError("expected a scaled denoiser over an affine base")
    n = base.dim
    if denoiser.mode == "tweedie":
        u = 1.0 / (denoiser.delta * denoiser.delta)
        matrix = (1.0 - u) * np.eye(n) + u * base.matrix
        offset = u * base.offset
    else:
        matrix = np.array(base.matrix)
        offset = base.offset / denoiser.delta
    if denoiser.gamma_rescale:
        g = gamma_factor(denoiser.delta)
        matrix = g * matrix
        offset = g * offset
    return matrix, offset


def linear_fixed_point_oracle(
    op: LinearOperator,
    y: np.ndarray,
    denoiser: ScaledDenoiser,
    config: PnpConfig,
) -> np.ndarray:
    """Closed-form fixed point when the whole iteration map is affine.

    With an affine base the iteration is ``x -> M x + c``; the unique fixed
    point solves ``(I - M) x = c`` by a direct dense solve, provided the
    spectral radius of M is below one. Used as an independent oracle for
    :func:`pnp_pgd`.
    """
    y = as_signal(y, op.out_dim)
    s_matrix, s_offset = scaled_affine_map(denoiser)
    a_matrix = op.as_matrix()
    n = op.in_dim
    tau = 1.0 / max(op.op_norm_sq(), 1e-300) if config.tau is None else config.tau
    grad_matrix = np.eye(n) - tau * a_matrix.T @ a_matrix
    m_matrix = s_matrix @ grad_matrix
    c = s_matrix @ (tau * (a_matrix.T @ y)) + s_offset
    radius = float(np.max(np.abs(np.linalg.eigvals(m_matrix))))
    if radius >= 1.0 - 1e-10:
        raise NoUniqueFixedPointError(
            f"iteration map has spectral radius {radius}; no unique fixed point"
        )
    return np.linalg.solve(np.eye(n) - m_matrix, c)

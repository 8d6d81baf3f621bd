"""Linear forward operators: apply/adjoint pairs, norm estimation, gradient steps.

Signals are plain 1-D float64 numpy arrays. Every operator is immutable after
construction and safe for concurrent read-only use.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_signal",
    "LinearOperator",
    "Identity",
    "Mask",
    "Convolve1d",
    "DenseOperator",
    "operator_from_config",
]


def as_signal(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 vector, optionally of length ``dim``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"signal must be a nonempty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite entries")
    if dim is not None and x.size != dim:
        raise ValueError(f"signal has dim {x.size}, expected {dim}")
    return x


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64 if a.dtype != bool else bool, copy=True)
    a.setflags(write=False)
    return a


class LinearOperator:
    """A linear map with an adjoint.

    Subclasses set ``in_dim``/``out_dim`` and implement :meth:`apply` and
    :meth:`adjoint` on 1-D vectors.
    """

    in_dim: int
    out_dim: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def gradient_step(self, y: np.ndarray, tau: float, x: np.ndarray) -> np.ndarray:
        """One explicit step on the quadratic data term: ``x - tau * A^T (A x - y)``."""
        if tau <= 0:
            raise ValueError("tau must be positive")
        x = as_signal(x, self.in_dim)
        y = as_signal(y, self.out_dim)
        return x - tau * self.adjoint(self.apply(x) - y)

    def op_norm_sq(
        self,
        iters: int = 200,
        seed: int = 0,
        return_history: bool = False,
    ):
        """Estimate ``||A^T A||`` (largest eigenvalue) by power iteration.

        Starts from a seeded random unit vector and stops early once two
        successive Rayleigh quotients agree to 1e-12 relative. A zero operator
        short-circuits to 0.0.

        With ``return_history=True`` also returns the Rayleigh-quotient
        sequence, which is nondecreasing for the symmetric map ``A^T A``.
        """
        if iters < 1:
            raise ValueError("iters must be >= 1")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.in_dim)
        v /= np.linalg.norm(v)
        history: list[float] = []
        estimate = 0.0
        for _ in range(iters):
            w = self.adjoint(self.apply(v))
            rayleigh = float(v @ w)
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                history.append(0.0)
                estimate = 0.0
                break
            history.append(rayleigh)
            estimate = rayleigh
            if len(history) >= 2 and abs(history[-1] - history[-2]) < 1e-12 * max(
                abs(rayleigh), 1e-300
            ):
                break
            v = w / norm_w
        if return_history:
            return estimate, np.asarray(history)
        return estimate

    def as_matrix(self) -> np.ndarray:
        """Materialize the operator as a dense ``out_dim x in_dim`` matrix."""
        eye = np.eye(self.in_dim)
        return np.stack([self.apply(eye[:, j]) for j in range(self.in_dim)], axis=1)


class Identity(LinearOperator):
    """The identity map on vectors of a fixed length."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.in_dim = self.out_dim = int(dim)

    def apply(self, x):
        return as_signal(x, self.in_dim).copy()

    def adjoint(self, y):
        return as_signal(y, self.out_dim).copy()


class Mask(LinearOperator):
    """Coordinate projection: observed entries pass through, masked ones are zeroed.

    Self-adjoint; maps R^n to R^n so inpainting keeps image and data in one
    space. Any masked entry makes the kernel nontrivial.
    """

    def __init__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 1 or mask.size < 1:
            raise ValueError("mask must be a nonempty 1-D boolean vector")
        self.mask = _frozen(mask)
        self.in_dim = self.out_dim = int(mask.size)

    def apply(self, x):
        return np.where(self.mask, as_signal(x, self.in_dim), 0.0)

    def adjoint(self, y):
        return np.where(self.mask, as_signal(y, self.out_dim), 0.0)

    @classmethod
    def random(cls, dim: int, mask_fraction: float, seed: int = 0) -> "Mask":
        """Mask with ``round(mask_fraction * dim)`` seeded random entries hidden."""
        if not 0.0 <= mask_fraction <= 1.0:
            raise ValueError("mask_fraction must lie in [0, 1]")
        n_masked = int(round(mask_fraction * dim))
        rng = np.random.default_rng(seed)
        hidden = rng.choice(dim, size=n_masked, replace=False)
        mask = np.ones(dim, dtype=bool)
        mask[hidden] = False
        return cls(mask)


class Convolve1d(LinearOperator):
    """Circular (periodic) convolution with a fixed kernel.

    The adjoint is circular correlation. Periodic boundaries make the exact
    operator norm computable from the kernel's DFT magnitudes, which tests use
    as an oracle.
    """

    def __init__(self, kernel, dim: int):
        kernel = as_signal(kernel)
        if dim < kernel.size:
            raise ValueError("dim must be >= kernel length")
        self.kernel = _frozen(kernel)
        self.in_dim = self.out_dim = int(dim)
        padded = np.zeros(dim)
        padded[: kernel.size] = kernel
        self._kernel_f = np.fft.rfft(padded)
        self._kernel_f.setflags(write=False)

    def apply(self, x):
        x = as_signal(x, self.in_dim)
        return np.fft.irfft(np.fft.rfft(x) * self._kernel_f, n=self.in_dim)

    def adjoint(self, y):
        y = as_signal(y, self.out_dim)
        return np.fft.irfft(np.fft.rfft(y) * np.conj(self._kernel_f), n=self.in_dim)


class DenseOperator(LinearOperator):
    """An explicit m x n matrix."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.size == 0:
            raise ValueError("matrix must be a nonempty 2-D array")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix contains non-finite entries")
        self.matrix = _frozen(matrix)
        self.out_dim, self.in_dim = matrix.shape

    def apply(self, x):
        return self.matrix @ as_signal(x, self.in_dim)

    def adjoint(self, y):
        return self.matrix.T @ as_signal(y, self.out_dim)

    def as_matrix(self):
        return np.array(self.matrix)


def operator_from_config(config: dict) -> LinearOperator:
    """Build an operator from a JSON-style config dict.

    Recognised forms::

        {"kind": "identity", "dim": n}
        {"kind": "mask", "dim": n, "mask_fraction": f, "seed": s}
        {"kind": "mask", "mask": [true, false, ...]}
        {"kind": "conv1d", "dim": n, "kernel": [...]}
        {"kind": "dense", "matrix": [[...], ...]}
    """
    kind = config.get("kind")
    if kind == "identity":
        return Identity(_require(config, "dim"))
    if kind == "mask":
        if "mask" in config:
            return Mask(config["mask"])
        return Mask.random(
            _require(config, "dim"),
            _require(config, "mask_fraction"),
            seed=config.get("seed", 0),
        )
    if kind == "conv1d":
        return Convolve1d(_require(config, "kernel"), _require(config, "dim"))
    if kind == "dense":
        return DenseOperator(_require(config, "matrix"))
    raise ValueError(
        f"unknown operator kind {kind!r}; expected one of identity, mask, conv1d, dense"
    )


def _require(config: dict, field: str):
    if field not in config:
        raise ValueError(f"operator config missing required field {field!r}")
    return config[field]

"""Stationary covariance functions and Gram-matrix assembly.

Two families are provided: the ARD squared-exponential kernel
``theta_f * exp(-d^2 / 2)`` and the ARD Matern-5/2 kernel
``theta_f * (1 + sqrt(5) d + 5/3 d^2) * exp(-sqrt(5) d)`` where
``d^2 = sum_i lam_i (x_i - z_i)^2``. The per-dimension weights ``lam`` form
a diagonal precision metric (units 1/length^2), so larger entries mean
shorter correlation lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQUARED_EXPONENTIAL = "se"
MATERN52 = "matern52"
_FAMILIES = (SQUARED_EXPONENTIAL, MATERN52)

# Above this input dimension, squared distances are accumulated with Kahan
# compensation so results do not depend on summation order.
_COMPENSATED_DIM = 32


@dataclass(frozen=True)
class Kernel:
    """A stationary kernel with diagonal metric `lam` and amplitude `theta_f`."""

    family: str
    lam: np.ndarray
    theta_f: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.ndim != 1 or np.any(lam <= 0.0) or not np.all(np.isfinite(lam)):
            raise ValueError("metric entries must be positive finite reals")
        if not (self.theta_f > 0.0):
            raise ValueError("amplitude theta_f must be positive")
        object.__setattr__(self, "lam", lam)

    @property
    def dim(self) -> int:
        return self.lam.size


def se_kernel(lam, theta_f=1.0) -> Kernel:
    return Kernel(SQUARED_EXPONENTIAL, np.asarray(lam, dtype=float), float(theta_f))


def matern52_kernel(lam, theta_f=1.0) -> Kernel:
    return Kernel(MATERN52, np.asarray(lam, dtype=float), float(theta_f))


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"points have dimension {X.shape}, kernel metric has {dim} entries")
    return X


def _sqdist(kernel: Kernel, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Pairwise weighted squared distances, bit-symmetric for X == Z.

    Computed from explicit coordinate differences (never the expanded
    ``|x|^2 + |z|^2 - 2 x.z`` form) so entries are exact mirror images when
    the two point sets coincide and can never go negative.
    """
    diff2 = (X[:, None, :] - Z[None, :, :]) ** 2
    w = diff2 * kernel.lam
    if kernel.dim <= _COMPENSATED_DIM:
        return w.sum(axis=-1)
    # Kahan compensated accumulation over the dimension axis.
    total = np.zeros(w.shape[:2])
    carry = np.zeros_like(total)
    for d in range(kernel.dim):
        y = w[:, :, d] - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def _from_sqdist(kernel: Kernel, d2: np.ndarray) -> np.ndarray:
    if kernel.family == SQUARED_EXPONENTIAL:
        return kernel.theta_f * np.exp(-0.5 * d2)
    d = np.sqrt(d2)
    sqrt5_d = np.sqrt(5.0) * d
    return kernel.theta_f * (1.0 + sqrt5_d + (5.0 / 3.0) * d2) * np.exp(-sqrt5_d)


def kernel_eval(kernel: Kernel, x, z) -> float:
    """Evaluate k(x, z) for a single pair of points."""
    x = _as_points(x, kernel.dim)
    z = _as_points(z, kernel.dim)
    return float(_from_sqdist(kernel, _sqdist(kernel, x, z))[0, 0])


def gram(kernel: Kernel, X, Z=None) -> np.ndarray:
    """Gram matrix K[i, j] = k(X_i, Z_j); Z defaults to X.

    When the two input sets coincide the output is bit-exactly symmetric
    with diagonal exactly theta_f (zero distance evaluates exactly).
    """
    X = _as_points(X, kernel.dim)
    Z = X if Z is None else _as_points(Z, kernel.dim)
    return _from_sqdist(kernel, _sqdist(kernel, X, Z))

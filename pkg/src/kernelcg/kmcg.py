"""Kernel machine conjugate gradients: a low-rank kernel learned from CG.

The estimator treats the kernel as a latent bivariate function. Running
reorthogonalized CG on the inducing Gram K_M (without the noise term, since
the object of interest is the kernel itself) produces search directions
S = [s_1 .. s_P] and products Z = K_M S, which act as linear observations of
the kernel. Under a Gaussian model over bivariate functions whose covariance
factorizes over argument pairs, the posterior mean is the rank-P kernel

    khat(x, z) = k(x, X_M) S (S^T K_M S)^{-1} S^T k(X_M, z)

and mean, covariance and evidence of the resulting GP regressor have closed
forms in terms of two small Cholesky factors, L1 = chol(S^T Z) and
L2 = chol(sigma2 S^T Z + R^T R) with R = k(X, X_M) S (R is Z itself when
M = N):

    mean(x*)    = k(x*, X_M) S (R^T R + sigma2 S^T K_M S)^{-1} R^T y
    cov(x*,x**) = k(x*,x**) - khat-prior term + sigma2-weighted L2 term
    evidence    = -(1/2 sigma2)(y^T y - y^T R w) - 1/2 ln|R^T R + sigma2 S^T K_M S|
                  + 1/2 ln|S^T K_M S| - (N-P)/2 ln sigma2 - N/2 ln(2 pi)

At P = M the directions span everything and the kernel reduces to the
subset-of-regressors kernel with X_U = X_M; at M = N, P = N the regressor is
exact. Only the span of S matters: right-multiplying S by any invertible
matrix leaves all predictions unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .kernels import Kernel, _as_points, gram
from .lowrank import choose_inducing
from .solvers import MvmOperator, cg_reorth, default_cg_tolerance, dense_operator

# Row-block size for assembling R = k(X, X_M) S without materializing the
# full N x M cross-Gram.
_R_BLOCK_ROWS = 2048


@dataclass(frozen=True)
class KernelPriorConfig:
    """Parameters of the Gaussian prior over the kernel.

    The closed-form estimator assumes a zero prior mean and covariance
    generated by the data kernel itself; those defaults are required here
    (use :func:`kernelcg.lowrank.general_inducing_posterior` for other
    priors). The scale never enters mean, covariance, learned kernel or
    evidence - it cancels - and only multiplies the posterior uncertainty.
    """

    mu0: Optional[Callable] = None
    w: Optional[Kernel] = None
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0.0):
            raise ValueError("prior scale must be positive")


@dataclass(frozen=True)
class KmcgModel:
    kernel: Kernel
    X: np.ndarray
    y: np.ndarray
    sigma2: float
    indices: np.ndarray  # positions of the inducing subset within X
    X_M: np.ndarray
    S: np.ndarray  # M x P search directions (after truncation)
    Z: np.ndarray  # M x P products K_M S, reused from the CG trace
    R: np.ndarray  # N x P cross products k(X, X_M) S; the same object as Z when M = N
    factor1: Optional[linalg.CholeskyFactor]  # chol(S^T Z)
    factor2: Optional[linalg.CholeskyFactor]  # chol(sigma2 S^T Z + R^T R)
    mean_weights: np.ndarray  # S (R^T R + sigma2 S^T K_M S)^{-1} R^T y, length M
    steps: int  # effective P after truncation
    cg_steps: int  # directions the solver produced
    reason: str
    prior: KernelPriorConfig

    @property
    def inducing_count(self) -> int:
        return self.X_M.shape[0]


def _assemble(kernel, X, idx, y, sigma2, S, Z, R, reason, prior) -> KmcgModel:
    """Build the factors, truncating directions until both Choleskies succeed.

    CG direction matrices lose conditioning in floating point; if a pivot of
    either S^T Z or sigma2 S^T Z + R^T R fails, the trailing directions are
    dropped and the factorization retried on the leading block.
    """
    X_M = X[idx]
    shared = R is Z
    p = S.shape[1]
    while p > 0:
        S_p, Z_p = S[:, :p], Z[:, :p]
        R_p = Z_p if shared else R[:, :p]
        A1 = S_p.T @ Z_p
        A1 = 0.5 * (A1 + A1.T)
        L1, ok1 = linalg.cholesky_with_truncation(A1)
        if ok1 < p:
            p = ok1
            continue
        A2 = sigma2 * A1 + R_p.T @ R_p
        A2 = 0.5 * (A2 + A2.T)
        L2, ok2 = linalg.cholesky_with_truncation(A2)
        if ok2 < p:
            p = ok2
            continue
        factor1 = linalg.CholeskyFactor(L1)
        factor2 = linalg.CholeskyFactor(L2)
        mean_weights = S_p @ linalg.chol_solve(factor2, R_p.T @ y)
        return KmcgModel(
            kernel=kernel, X=X, y=y, sigma2=sigma2, indices=idx, X_M=X_M,
            S=S_p, Z=Z_p, R=R_p, factor1=factor1, factor2=factor2,
            mean_weights=mean_weights, steps=p, cg_steps=S.shape[1],
            reason=reason, prior=prior,
        )
    empty_m = np.zeros((X_M.shape[0], 0))
    empty_r = empty_m if shared else np.zeros((X.shape[0], 0))
    return KmcgModel(
        kernel=kernel, X=X, y=y, sigma2=sigma2, indices=idx, X_M=X_M,
        S=empty_m, Z=empty_m, R=empty_r, factor1=None, factor2=None,
        mean_weights=np.zeros(X_M.shape[0]), steps=0, cg_steps=S.shape[1],
        reason=reason, prior=prior,
    )


def _cross_products(kernel, X, X_M, S) -> np.ndarray:
    """R = k(X, X_M) S assembled in row blocks (O(N M) memory ceiling)."""
    n = X.shape[0]
    R = np.empty((n, S.shape[1]))
    for start in range(0, n, _R_BLOCK_ROWS):
        stop = min(start + _R_BLOCK_ROWS, n)
        R[start:stop] = gram(kernel, X[start:stop], X_M) @ S
    return R


def _validate_prior(prior: Optional[KernelPriorConfig]) -> KernelPriorConfig:
    prior = KernelPriorConfig() if prior is None else prior
    if prior.mu0 is not None or prior.w is not None:
        raise ValueError(
            "the closed-form estimator requires the default prior (zero mean, "
            "covariance generated by the data kernel); see general_inducing_posterior"
        )
    return prior


def kmcg_fit(
    kernel: Kernel,
    X,
    y,
    sigma2: float,
    M: Optional[int] = None,
    eps=None,
    max_steps=None,
    seed=0,
    operator: Optional[MvmOperator] = None,
    prior: Optional[KernelPriorConfig] = None,
) -> KmcgModel:
    """Collect CG directions on the inducing Gram and build the estimator.

    The inducing subset X_M is all of X when M = N, otherwise a uniform
    draw without replacement governed by `seed`. CG runs on K_M y_M = ...
    from x0 = 0 with eps defaulting to 0.01 ||y_M||; its solution is
    discarded, only the directions matter. A structured `operator` may
    replace the dense Gram product (it must apply v -> K_M v).
    """
    prior = _validate_prior(prior)
    X = _as_points(X, kernel.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if y.size != n:
        raise ValueError(f"{n} inputs but {y.size} targets")
    if not (sigma2 > 0.0):
        raise ValueError("sigma2 must be positive")
    M = n if M is None else int(M)
    idx = choose_inducing(n, M, seed)
    X_M = X[idx]
    y_M = y[idx]

    if operator is None:
        operator = dense_operator(gram(kernel, X_M))
    elif operator.dim != M:
        raise ValueError(f"operator dim {operator.dim} does not match inducing size {M}")

    eps = default_cg_tolerance(y_M) if eps is None else float(eps)
    max_steps = M if max_steps is None else int(max_steps)
    trace = cg_reorth(operator, y_M, eps=eps, max_steps=max_steps)

    S, Z = trace.S, trace.Z
    R = Z if M == n else _cross_products(kernel, X, X_M, S)
    return _assemble(kernel, X, idx, y, float(sigma2), S, Z, R, trace.reason, prior)


def kmcg_models_for_steps(
    kernel: Kernel,
    X,
    y,
    sigma2: float,
    steps,
    M: Optional[int] = None,
    eps=None,
    seed=0,
    operator: Optional[MvmOperator] = None,
    prior: Optional[KernelPriorConfig] = None,
) -> dict[int, KmcgModel]:
    """Models for several step budgets from a single CG trace.

    CG directions are incremental: the first P directions of a long run are
    exactly the directions of a P-step run, so one trace at max(steps)
    serves every budget.
    """
    prior = _validate_prior(prior)
    X = _as_points(X, kernel.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    M = n if M is None else int(M)
    idx = choose_inducing(n, M, seed)
    X_M = X[idx]
    y_M = y[idx]
    if operator is None:
        operator = dense_operator(gram(kernel, X_M))
    eps = default_cg_tolerance(y_M) if eps is None else float(eps)
    budget = min(max(steps), M)
    trace = cg_reorth(operator, y_M, eps=eps, max_steps=budget)
    R_full = trace.Z if M == n else _cross_products(kernel, X, X_M, trace.S)
    out = {}
    for p in steps:
        p_eff = min(int(p), trace.steps)
        S = trace.S[:, :p_eff]
        Z = trace.Z[:, :p_eff]
        R = Z if M == n else R_full[:, :p_eff]
        out[int(p)] = _assemble(kernel, X, idx, y, float(sigma2), S, Z, R, trace.reason, prior)
    return out


def _projected_features(model: KmcgModel, points) -> np.ndarray:
    """S^T k(X_M, points), the P x n feature block all predictions share."""
    return model.S.T @ gram(model.kernel, model.X_M, _as_points(points, model.kernel.dim))


def kmcg_kernel_gram(model: KmcgModel, A, B=None) -> np.ndarray:
    """Gram matrix of the learned kernel khat on two point sets."""
    A = _as_points(A, model.kernel.dim)
    same = B is None
    B = A if same else _as_points(B, model.kernel.dim)
    if model.steps == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    Va = solve_triangular(model.factor1.L, _projected_features(model, A), lower=True)
    Vb = Va if same else solve_triangular(model.factor1.L, _projected_features(model, B), lower=True)
    out = Va.T @ Vb
    if same:
        out = 0.5 * (out + out.T)
    return out


def kmcg_kernel_eval(model: KmcgModel, x, z) -> float:
    """Pointwise learned kernel khat(x, z); symmetric in its arguments."""
    return float(kmcg_kernel_gram(model, np.atleast_2d(x), np.atleast_2d(z))[0, 0])


def kmcg_mean(model: KmcgModel, X_star) -> np.ndarray:
    """Posterior mean prediction k(x*, X_M) @ mean_weights per test point."""
    X_star = _as_points(X_star, model.kernel.dim)
    return gram(model.kernel, X_star, model.X_M) @ model.mean_weights


def kmcg_var(model: KmcgModel, X_star, X_star2=None) -> np.ndarray:
    """Predictive covariance with the exact kernel restored in the prior term."""
    X_star = _as_points(X_star, model.kernel.dim)
    same = X_star2 is None
    X_star2 = X_star if same else _as_points(X_star2, model.kernel.dim)
    K_ss = gram(model.kernel, X_star, X_star2)
    if model.steps == 0:
        return K_ss
    Ua = _projected_features(model, X_star)
    Ub = Ua if same else _projected_features(model, X_star2)
    V1a = solve_triangular(model.factor1.L, Ua, lower=True)
    V1b = V1a if same else solve_triangular(model.factor1.L, Ub, lower=True)
    V2a = solve_triangular(model.factor2.L, Ua, lower=True)
    V2b = V2a if same else solve_triangular(model.factor2.L, Ub, lower=True)
    return K_ss - V1a.T @ V1b + model.sigma2 * (V2a.T @ V2b)


def kmcg_evidence(model: KmcgModel) -> float:
    """Log evidence of the learned-kernel regressor.

    This is the degenerate-model evidence for features S^T k(X_M, .) with
    inner matrix S^T K_M S; with M = N and a complete direction set it
    coincides with the exact log marginal likelihood.
    """
    quad_term, det_term = kmcg_evidence_terms(model)
    n = model.y.size
    return quad_term + det_term - 0.5 * n * np.log(2.0 * np.pi)


def kmcg_evidence_terms(model: KmcgModel) -> tuple[float, float]:
    """The quadratic-form and determinant parts of the log evidence.

    Split so the two can be compared separately against the exact oracle's
    -1/2 y^T alpha and -1/2 ln|K + sigma2 I|.
    """
    n = model.y.size
    y = model.y
    if model.steps == 0:
        quad = float(y @ y)
        det = -0.5 * n * np.log(model.sigma2)
        return -0.5 * quad / model.sigma2, det
    w = linalg.chol_solve(model.factor2, model.R.T @ y)
    quad = float(y @ y - (model.R.T @ y) @ w)
    det = (
        -0.5 * linalg.logdet(model.factor2)
        + 0.5 * linalg.logdet(model.factor1)
        - 0.5 * (n - model.steps) * np.log(model.sigma2)
    )
    return -0.5 * quad / model.sigma2, det


def kmcg_uncertainty(model: KmcgModel, x, z) -> float:
    """Posterior variance of the kernel estimate at the pair (x, z).

    Equal to scale/2 * (k(x,x) k(z,z) + k(x,z)^2 - khat(x,x) khat(z,z)
    - khat(x,z)^2); the prior terms use the exact kernel. Nonnegative up to
    roundoff, and zero exactly where the kernel is fully identified.
    """
    k = model.kernel
    x = _as_points(x, k.dim)
    z = _as_points(z, k.dim)
    k_xz = float(gram(k, x, z)[0, 0])
    prior = k.theta_f * k.theta_f + k_xz * k_xz
    if model.steps == 0:
        return 0.5 * model.prior.scale * prior
    G = kmcg_kernel_gram(model, np.vstack([x, z]))
    posterior = G[0, 0] * G[1, 1] + G[0, 1] * G[0, 1]
    return 0.5 * model.prior.scale * (prior - posterior)


def kmcg_uncertainty_gram(model: KmcgModel, X_s) -> np.ndarray:
    """Pairwise posterior kernel variances over one point set.

    Entry (i, j) equals kmcg_uncertainty(model, X_s[i], X_s[j]).
    """
    X_s = _as_points(X_s, model.kernel.dim)
    K = gram(model.kernel, X_s)
    prior = np.outer(np.diag(K), np.diag(K)) + K * K
    G = kmcg_kernel_gram(model, X_s)
    posterior = np.outer(np.diag(G), np.diag(G)) + G * G
    return 0.5 * model.prior.scale * (prior - posterior)


def error_bound_ratio(model: KmcgModel, x, z, k_true: float) -> float:
    """Squared kernel error over its posterior variance, with 0/0 -> 0."""
    err2 = (float(k_true) - kmcg_kernel_eval(model, x, z)) ** 2
    var = kmcg_uncertainty(model, x, z)
    if err2 == 0.0:
        return 0.0
    if var <= 0.0:
        return float("inf")
    return err2 / var


def kmcg_sample(model: KmcgModel, X_s, rng: np.random.Generator) -> np.ndarray:
    """Draw a symmetric Gram matrix from the posterior over the kernel.

    The restriction of the posterior to points X_s has mean khat(X_s, X_s)
    and covariance scale * (W sym-kron W - What sym-kron What) with
    W = k(X_s, X_s) and What = khat(X_s, X_s), sampled via the symmetric
    Kronecker factorization.
    """
    X_s = _as_points(X_s, model.kernel.dim)
    W = gram(model.kernel, X_s)
    W_hat = kmcg_kernel_gram(model, X_s)
    draw = linalg.sym_kron_sample(W, W_hat, rng)
    return W_hat + np.sqrt(model.prior.scale) * draw

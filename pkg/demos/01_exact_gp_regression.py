"""Exact Gaussian-process regression on the 1-D toy problem.

The exact model is the O(N^3) oracle of this package: a Cholesky
factorization of K + sigma^2 I, a weight vector, and closed-form
mean/covariance/evidence. Everything else in the package is measured
against it.
"""

import numpy as np

from kernelcg import exact
from kernelcg.datasets import TOY_DEFAULT_SIGMA2, gen_toy, toy_kernel

# A hundred training points: half from a Gaussian mixture, half uniform,
# with targets drawn from the generating GP itself.
data = gen_toy(seed=2)
kernel = toy_kernel()
print(f"toy dataset: {data.n_train} train / {data.n_test} test points, "
      f"kernel metric {kernel.lam[0]}, amplitude {kernel.theta_f}")

model = exact.fit(kernel, data.X, data.y, TOY_DEFAULT_SIGMA2)
print(f"factorization jitter: {model.factor.jitter:g}")

mean = exact.predict_mean(model, data.X_star)
var = exact.predict_var(model, data.X_star)
rmse = np.sqrt(np.mean((mean - data.y_star) ** 2))
print(f"test RMSE of the posterior mean: {rmse:.4f}")
print(f"predictive sd ranges over [{np.sqrt(var.min()):.4f}, {np.sqrt(var.max()):.4f}]")

print(f"log evidence: {exact.log_evidence(model):.4f}")

# Far away from the data the posterior reverts to the prior.
far = np.array([[50.0]])
print(f"far-field mean {exact.predict_mean(model, far)[0]:.2e} "
      f"(prior 0), variance {exact.predict_var(model, far)[0]:.4f} "
      f"(prior {kernel.theta_f})")

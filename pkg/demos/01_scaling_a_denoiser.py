"""Scaling a denoiser and finding the loss-optimal scale.

A Gaussian-mixture prior makes the optimal denoiser (the posterior mean)
available in closed form, so we can watch what the residual scaling
    D_delta(y) = y + (D(y) - y) / delta^2
does to an imperfect denoiser, and estimate the scale that minimises the
denoising loss. For a perfectly matched denoiser that scale is 1; the worse
the denoiser, the larger it gets.
"""

import numpy as np

from pnplab import (
    GmmPrior,
    MmseDenoiser,
    ShrinkageDenoiser,
    delta_sweep,
    estimate_delta_opt,
    estimate_l2,
    homogeneous_scale,
    tweedie_scale,
    verify_sandwich,
)

rng = np.random.default_rng(3)
prior = GmmPrior(
    weights=[0.3, 0.4, 0.3],
    means=rng.uniform(-1.5, 1.5, (3, 4)),
    variances=[0.04, 1.0, 0.3],
)
sigma = 0.3

print("== the two scalings on one point ==")
exact = MmseDenoiser(prior, sigma)
y = np.array([0.9, -0.2, 0.4, 1.1])
print("input              ", y)
print("posterior mean     ", exact(y))
for delta in (1.0, 2.0, 10.0):
    print(f"residual-scaled d={delta:4.1f}", tweedie_scale(exact, delta)(y))
print("argument scaling is a no-op for linear denoisers:")
shrink = ShrinkageDenoiser(0.5, 4)
for delta in (1.0, 7.0):
    print(f"  homogeneous d={delta:3.0f} of 0.5*y ->", homogeneous_scale(shrink, delta)(y))

print()
print("== optimal scale as a training-quality readout ==")
for ratio in (1.0, 1.5, 2.0, 3.0):
    d = MmseDenoiser(prior, ratio * sigma)  # trained at the wrong noise level
    est = estimate_delta_opt(d, prior, sigma, samples=100000, seed=7)
    print(
        f"training mismatch x{ratio:3.1f}: delta_opt^2 = "
        f"{est.delta_opt_sq:6.3f} +- {est.stderr_delta_opt_sq:.3f}"
    )

print()
print("== the sandwich: optimal <= optimally-scaled <= original ==")
report = verify_sandwich(MmseDenoiser(prior, 2 * sigma), prior, sigma, 100000, 42)
print(f"loss of posterior mean      {report.l2_mmse.value:.5f}")
print(f"loss of scaled denoiser     {report.l2_scaled.value:.5f}")
print(f"loss of original denoiser   {report.l2_base.value:.5f}")
print(f"ordering holds: {report.passed}")

print()
print("== sweeping the scale traces the whole loss curve ==")
d = MmseDenoiser(prior, 2 * sigma)
for delta, est in delta_sweep(d, prior, sigma, np.geomspace(0.8, 6.0, 9), 50000, 5):
    bar = "#" * int(60 * est.value / 0.5)
    print(f"delta = {delta:5.2f}  loss = {est.value:.4f} {bar}")
base_loss = estimate_l2(d, prior, sigma, 50000, 5)
print(f"(unscaled loss {base_loss.value:.4f})")

"""Kernels on measures: double sums, pullbacks, mean embeddings, MMD.

Run from the repository root:  python3 demos/kernels_and_embeddings.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mfkernels import (
    DoubleSumKernel,
    GaussianKernel,
    KernelMetric,
    MeanMap,
    ParticleConfiguration,
    PullbackKernel,
    empirical_measure,
    eval_config,
    eval_kernel,
    kme_eval,
    mmd,
    w1_exact,
)

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
rng = np.random.default_rng(1)

base = GaussianKernel(0.5)
double_sum = DoubleSumKernel(base)
pullback = PullbackKernel(base, MeanMap())

# Both families are permutation invariant by construction: a configuration
# only enters through its empirical measure.
x = ParticleConfiguration(rng.uniform(size=(12, 1)))
y = ParticleConfiguration(rng.uniform(size=(12, 1)))
sigma = rng.permutation(12)
for name, k in [("double sum", double_sum), ("pullback", pullback)]:
    v, v_perm = eval_config(k, x, y), eval_config(k, x.permuted(sigma), y)
    print(f"{name:10s} value {v:.6f}, after permuting an argument {v_perm:.6f}")

# The double-sum value is the inner product of kernel mean embeddings.
mu, nu = empirical_measure(x), empirical_measure(y)
grid = np.linspace(0, 1, 200)
emb_mu = np.array([kme_eval(base, mu, np.array([t])) for t in grid])
emb_nu = np.array([kme_eval(base, nu, np.array([t])) for t in grid])

fig, ax = plt.subplots(figsize=(5.5, 3.5))
ax.plot(grid, emb_mu, label="embedding of x")
ax.plot(grid, emb_nu, label="embedding of y")
ax.plot(x.points[:, 0], np.zeros(12), "|", ms=14, color="C0")
ax.plot(y.points[:, 0], np.zeros(12), "|", ms=14, color="C1")
ax.set_title("kernel mean embeddings of two configurations")
ax.legend()
fig.tight_layout()
fig.savefig(out / "mean_embeddings.png", dpi=120)
print(f"wrote {out / 'mean_embeddings.png'}")

# MMD (the embedding distance) never exceeds the transport distance taken
# under the kernel-induced ground metric.
metric = KernelMetric(base)
pairs = []
for _ in range(300):
    m = int(rng.integers(2, 20))
    a = empirical_measure(ParticleConfiguration(rng.uniform(size=(m, 1))))
    b = empirical_measure(ParticleConfiguration(rng.uniform(size=(m, 1))))
    pairs.append((mmd(base, a, b), w1_exact(a, b, metric)[0]))
pairs = np.array(pairs)

fig, ax = plt.subplots(figsize=(4.2, 4.2))
ax.scatter(pairs[:, 1], pairs[:, 0], s=8, alpha=0.5)
lim = pairs.max() * 1.05
ax.plot([0, lim], [0, lim], "k--", lw=1, label="equality")
ax.set_xlabel("W1 under the kernel metric")
ax.set_ylabel("MMD")
ax.set_title("embedding distance is dominated by transport")
ax.legend()
fig.tight_layout()
fig.savefig(out / "mmd_vs_w1.png", dpi=120)
print(f"wrote {out / 'mmd_vs_w1.png'}")
print(f"fraction below the diagonal: {(pairs[:, 0] <= pairs[:, 1] + 1e-12).mean():.3f}")

# The mean pullback is blind to shape: equal means, equal kernel value.
flat = empirical_measure(ParticleConfiguration([[0.0], [1.0]]))
spike = empirical_measure(ParticleConfiguration([[0.5], [0.5]]))
print(f"pullback on equal-mean measures: {eval_kernel(pullback, flat, spike):.6f}")
print(f"double sum tells them apart:     {eval_kernel(double_sum, flat, spike):.6f}"
      f" vs self {eval_kernel(double_sum, flat, flat):.6f}")

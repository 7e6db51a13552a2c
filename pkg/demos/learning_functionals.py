"""Learn a particle-system observable at one particle count, predict at
larger ones: ridge regression over empirical-measure kernels.

Run from the repository root:  python3 demos/learning_functionals.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mfkernels import (
    AttractionRepulsion,
    DomainBox,
    DoubleSumKernel,
    GaussianKernel,
    GaussianPotential,
    InteractionEnergy,
    eval_observable,
    functional_transfer_study,
    observable_convergence_study,
    simulate,
    uniform_interval,
)

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

observable = InteractionEnergy(GaussianPotential(0.5))
kernel = DoubleSumKernel(GaussianKernel(0.5))
box = DomainBox([0.0], [1.0])
dynamics = AttractionRepulsion(box, dt=0.05, sigma=0.05, attraction=0.5,
                               repulsion=0.02)

# A trajectory sweeps from spread-out to clustered states, so the
# interaction energy varies well beyond finite-M noise.
traj = simulate(dynamics, 32, 400, seed=0)
labels = [eval_observable(observable, c) for c in traj]

fig, ax = plt.subplots(figsize=(5.5, 3.2))
ax.plot(labels)
ax.set_xlabel("time step")
ax.set_ylabel("interaction energy")
ax.set_title("observable along one trajectory (M = 32)")
fig.tight_layout()
fig.savefig(out / "trajectory_observable.png", dpi=120)
print(f"wrote {out / 'trajectory_observable.png'}")

# Observables of i.i.d. configurations concentrate as M grows.
rep = observable_convergence_study(
    observable, uniform_interval(0, 1), [16, 64, 256, 1024], range(16)
)
print("observable concentration, medians:",
      " ".join(f"{v:.2e}" for v in rep.medians))

# Train at M = 32 on trajectory snapshots, evaluate at M = 32 / 128 / 256.
study = functional_transfer_study(
    kernel, observable, train_m=32, test_m_list=[32, 128, 256],
    n_train=200, n_test=200, lam=1e-6, seed=20240801, source=dynamics,
)
print("test M      :", study.test_m)
print("model rmse  :", " ".join(f"{v:.2e}" for v in study.rmse))
print("baseline    :", " ".join(f"{v:.2e}" for v in study.baseline_rmse))

fig, ax = plt.subplots(figsize=(5.0, 3.5))
idx = np.arange(len(study.test_m))
ax.bar(idx - 0.17, study.baseline_rmse, width=0.34, label="constant baseline")
ax.bar(idx + 0.17, study.rmse, width=0.34, label="kernel ridge model")
ax.set_xticks(idx, [str(m) for m in study.test_m])
ax.set_xlabel("test particle count")
ax.set_ylabel("RMSE")
ax.set_yscale("log")
ax.set_title("a model trained at M = 32 transfers to larger systems")
ax.legend()
fig.tight_layout()
fig.savefig(out / "transfer_rmse.png", dpi=120)
print(f"wrote {out / 'transfer_rmse.png'}")

"""Plot the two noise schedules side by side.

The gmax schedule keeps the drift scalings pinned at 1 and puts everything
into the variance, which grows like the integrated beta. The VP schedule
shrinks the state exponentially while the variance saturates. The interesting
curve is coef_x0, the weight of the clean item embedding inside the bridge
marginal mean: gmax keeps it high across the whole chain, VP crushes it in
the middle — which is exactly where a sampler spends most of its steps.

Run: python3 demos/schedule_curves.py   (writes demos/out/schedules.png)
"""

import os

import numpy as np

from bridgerec.schedule import ScheduleParams, coeffs

GRID = np.linspace(0.0, 1.0, 201)


def curves(params):
    cs = [coeffs(params, float(t)) for t in GRID]
    return {
        "sigma2": np.array([c.sigma2 for c in cs]),
        "coef_x0": np.array([c.alpha * (c.sigma_bar2 / c.sigma2_1) for c in cs]),
        "coef_x1": np.array([c.alpha_bar * (c.sigma2 / c.sigma2_1) for c in cs]),
    }


def main():
    gmax = curves(ScheduleParams(kind="gmax", beta0=0.01, beta1=10.0))
    vp = curves(ScheduleParams(kind="vp", beta0=0.01, beta1=20.0))

    print("t      gmax coef_x0   vp coef_x0")
    for i in range(0, 201, 25):
        print(f"{GRID[i]:.3f}  {gmax['coef_x0'][i]:12.4f}  {vp['coef_x0'][i]:11.4f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("(matplotlib not installed; table only)")
        return

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    for name, series in (("gmax", gmax), ("vp", vp)):
        axes[0].plot(GRID, series["sigma2"], label=name)
        axes[1].plot(GRID, series["coef_x0"], label=name)
        axes[2].plot(GRID, series["coef_x1"], label=name)
    for ax, title in zip(axes, ("marginal variance", "weight of x0", "weight of x1")):
        ax.set_title(title)
        ax.set_xlabel("t")
        ax.legend()
    fig.tight_layout()
    os.makedirs("demos/out", exist_ok=True)
    fig.savefig("demos/out/schedules.png", dpi=120)
    print("wrote demos/out/schedules.png")


if __name__ == "__main__":
    main()

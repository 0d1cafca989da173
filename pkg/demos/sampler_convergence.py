"""How fast does the reverse chain home in on its target?

Two predictors, two stories. A perfect oracle makes every budget exact: the
final reverse step collapses onto the prediction by construction, so even a
single step lands on x0 — that identity is part of the verification suite.
The realistic case is a predictor whose quality depends on where the chain
currently is (like a learned model, which is only accurate on states it saw
during training). Model that as pred = x0 + c (x_s - x0): each step contracts
the gap, so more steps mean a geometrically smaller final error, until the
injected SDE noise sets the floor. This contraction is why the evaluation
sweeps plateau around a dozen steps.

Run: python3 demos/sampler_convergence.py
"""

import numpy as np

from bridgerec.sampler import SamplerConfig, sample
from bridgerec.schedule import ScheduleParams

PARAMS = ScheduleParams(kind="gmax", beta0=0.01, beta1=10.0)


def main():
    rng = np.random.default_rng(7)
    x0 = rng.normal(size=16)
    x1 = rng.normal(size=16)

    def exact_oracle(x_s, s, x1_arg):
        return x0

    def leaky_oracle(x_s, s, x1_arg):
        # accuracy degrades with distance from the target, like a model
        # asked to denoise states it never trained on
        return x0 + 0.5 * (x_s - x0)

    print("steps   exact oracle (sde)   leaky oracle (sde)   leaky (ode)")
    for steps in (1, 2, 4, 8, 16, 32, 64):
        errs = []
        for mode, pred in (("sde", exact_oracle), ("sde", leaky_oracle),
                           ("ode", leaky_oracle)):
            cfg = SamplerConfig(mode=mode, steps=steps, guidance_w=0.0, seed=3)
            out = sample(x1, pred, PARAMS, cfg)
            errs.append(np.linalg.norm(out - x0))
        print(f"{steps:5d}   {errs[0]:18.3e}   {errs[1]:18.6f}   {errs[2]:11.6f}")


if __name__ == "__main__":
    main()

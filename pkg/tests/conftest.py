import numpy as np
import pytest

from bridgerec.verify import numeric_gradient, rel_error  # noqa: F401


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gradcheck(build, arrays, tol=1e-4):
    """Assert autodiff gradients of a weighted sum of build(*tensors) match
    central finite differences for every input array."""
    from bridgerec.autodiff import Tape, Tensor, reduce_sum

    probe_rng = np.random.default_rng(99)
    out_shape = build(*[Tensor(a) for a in arrays]).data.shape
    probe = probe_rng.normal(size=out_shape)

    def loss_of(tensors):
        return reduce_sum(build(*tensors) * Tensor(probe))

    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape() as tape:
        tape.backward(loss_of(tensors))
    for i, a in enumerate(arrays):
        def f(x, _i=i):
            vals = [x if j == _i else arrays[j] for j in range(len(arrays))]
            return loss_of([Tensor(v) for v in vals]).item()

        fd = numeric_gradient(f, np.array(a, dtype=np.float64))
        err = rel_error(tensors[i].grad, fd)
        assert err < tol, f"input {i}: rel err {err:.3e} >= {tol}"

import numpy as np

from motorhrl.gradcheck import TOLERANCE, gradient_suite
from motorhrl.nn import finite_diff_check
from motorhrl.tensor import Tensor


def test_every_network_passes():
    errors = gradient_suite(hidden=(64, 64), max_coords=None)
    assert set(errors) == {"policy", "twin_critic", "discriminator", "encoder", "step_critic", "tanh_mlp"}
    for name, err in errors.items():
        assert err < TOLERANCE, (name, err)


def test_full_width_sampled_coordinates():
    errors = gradient_suite(hidden=(256, 256), max_coords=10, seed=1)
    assert max(errors.values()) < TOLERANCE


def test_detects_a_missing_gradient_path():
    w = Tensor(np.array([0.5, -1.0, 2.0]), requires_grad=True)
    x = np.array([1.0, 2.0, 3.0])
    # second term is built from raw data, so backward never sees it
    loss = lambda: (w * Tensor(x)).sum() + Tensor(w.data**2).sum()
    assert finite_diff_check([w], loss) > 0.5

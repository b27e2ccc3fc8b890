import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzz import grow, jitter
from ll0 import _pykernels, kernels
from ll0.learning import output_delta

ckernels = pytest.importorskip("ll0._ckernels", reason="compiled extension not built")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    net = jitter(grow(rng, max_nodes=80), rng)
    args = net.plan().kernel_args()
    x = rng.uniform(-0.5, 1.5, net.n_inputs)
    a_py, z_py = _pykernels.forward(*args, x)
    a_c, z_c = ckernels.forward(*args, x)
    np.testing.assert_allclose(a_c, a_py, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(z_c, z_py, rtol=1e-12, atol=1e-14)

    X = rng.uniform(0, 1, (5, net.n_inputs))
    np.testing.assert_allclose(ckernels.forward_batch(*args, X),
                               _pykernels.forward_batch(*args, X), rtol=1e-12, atol=1e-14)

    y = np.eye(net.n_outputs)[rng.integers(net.n_outputs)]
    dz = output_delta(a_py[net.plan().out_pos], y)
    for g_c, g_py in zip(ckernels.backward(*args, a_py, dz), _pykernels.backward(*args, a_py, dz)):
        np.testing.assert_allclose(g_c, g_py, rtol=1e-10, atol=1e-14)


def test_default_backend_is_compiled():
    if os.environ.get("LL0_PURE_PYTHON"):
        pytest.skip("fallback forced by environment")
    assert kernels.BACKEND == "cython"


def test_env_forces_fallback():
    code = "import ll0; print(ll0.BACKEND)"
    env = dict(os.environ, LL0_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"

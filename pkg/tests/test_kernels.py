"""Backend (numba vs numpy) equivalence and determinism of the hot loop."""

import numpy as np
import pytest

import fohc
from fohc import (
    ClosedLoopConfig,
    ControllerTemplate,
    PlantModel,
    StepReference,
    make_pci,
    simulate,
)
from fohc._kernels import HAS_NUMBA, backend_name, set_backend


@pytest.fixture
def small_configs():
    servo = PlantModel.from_tf(
        fohc.FractionalTransferFunction.from_terms([(0.93, 0.0)], [(0.61, 1.0), (1.0, 0.0)])
    )
    return [
        ClosedLoopConfig(plant=servo, controller=ControllerTemplate("PI", {"Kp": 1.6, "Ki": 18.5}),
                         reference=StepReference(1.0), h=1e-3, horizon=2.0),
        ClosedLoopConfig(plant=servo, controller=make_pci(0.067, 13.4, alpha=0.75),
                         reference=StepReference(1.0), h=1e-3, horizon=2.0),
        ClosedLoopConfig(plant=servo,
                         controller=ControllerTemplate("FPI", {"Kp": 0.067, "Ki": 13.4, "lam": 0.75}),
                         reference=StepReference(1.0), h=1e-3, horizon=2.0),
    ]


@pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")
def test_backends_agree_bitwise(small_configs):
    for cfg in small_configs:
        set_backend("numba")
        a = simulate(cfg)
        set_backend("numpy")
        b = simulate(cfg)
        set_backend("numba")
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.controller_states, b.controller_states)
        assert len(a.events) == len(b.events)


def test_same_backend_deterministic(small_configs):
    for cfg in small_configs:
        a = simulate(cfg)
        b = simulate(cfg)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.u, b.u)


def test_backend_selection_roundtrip():
    original = backend_name()
    assert set_backend("numpy") == "numpy"
    if HAS_NUMBA:
        assert set_backend("numba") == "numba"
    with pytest.raises(ValueError):
        set_backend("fortran")
    set_backend(original)


def test_env_flag_documented():
    # the numpy fallback is reachable programmatically regardless of the env flag
    set_backend("numpy")
    assert backend_name() == "numpy"
    set_backend("numba" if HAS_NUMBA else "numpy")

"""Integration against the installed lavino client, through public surfaces only.

Skipped entirely when lavino is not installed, so this package's own tests
stand alone.
"""

import sys

import numpy as np
import pytest

lavino = pytest.importorskip("lavino")

from lavino.priors import AlphaSchedule, external_prior_connect, identity_prior
from lavino.samplers import SamplerConfig, latino_v_restore
from lavino.operators import op_from_spec
from lavino.wire import PriorClient

SERVER = f"{sys.executable} -m prior_server.main"


def test_client_echo_round_trip_bit_exact():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 8, 8, 3)).astype(np.float32).astype(np.float64)
    with PriorClient(f"{SERVER} echo", "echo") as client:
        assert np.array_equal(client.consistency(x, 375), x)
        assert np.array_equal(client.eps_predict(x, 63), x)


def test_latino_v_with_external_echo_matches_in_process_identity():
    shape = (6, 8, 8, 1)
    op = op_from_spec("temporal-pool:2,spatial-pool:2", shape)
    rng = np.random.default_rng(1)
    x_true = rng.uniform(0.2, 0.8, size=shape)
    y = op.apply(x_true)
    sched = AlphaSchedule()
    cfg = SamplerConfig(sigma_n=1e-3, seed=7)

    x_ref, rep_ref = latino_v_restore(y, op, identity_prior(sched), cfg)

    ext = external_prior_connect(f"{SERVER} echo", "echo", sched)
    try:
        x_ext, rep_ext = latino_v_restore(y, op, ext, cfg)
    finally:
        ext.close()

    # identical noise streams; divergence is one float32 quantization per call
    assert np.max(np.abs(x_ext - x_ref)) <= 1e-6
    assert rep_ext.nfe == rep_ref.nfe == 5


def test_blur_prior_restoration_runs():
    shape = (4, 8, 8, 1)
    op = op_from_spec("spatial-pool:2", shape)
    rng = np.random.default_rng(2)
    y = op.apply(rng.uniform(size=shape))
    ext = external_prior_connect(f"{SERVER} blur", "blur")
    try:
        x, report = latino_v_restore(y, op, ext, SamplerConfig(sigma_n=1e-3, seed=3))
    finally:
        ext.close()
    assert np.all(np.isfinite(x))
    assert report.final_residual <= report.init_residual

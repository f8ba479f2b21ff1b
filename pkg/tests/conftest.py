import numpy as np
import pytest

from scampi.augment import augment, build_difference_operator
from scampi.lens_channel import LensConfig, sample_channel
from scampi.selection import build_hadamard_selection, measure


def pytest_configure(config):
    config._criterion_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def build_small_instance(seed=3, M=8, N=8, Q=32, L=2, snr_db=30.0, d=4.0):
    """Tiny deterministic problem: channel, network, measurement, operator.

    d=4 keeps all beam centers of the 8x8 default grid inside the sine range.
    """
    cfg = LensConfig(M=M, N=N, D_y_tilde=d, D_z_tilde=d)
    g = np.random.default_rng(seed)
    chan = sample_channel(g, L, cfg)
    net = build_hadamard_selection(Q, M * N, seed=seed + 1)
    meas = measure(net, chan.h, snr_db, g)
    diff = build_difference_operator(M, N)
    return chan, net, meas, diff


@pytest.fixture
def small_instance():
    return build_small_instance()


@pytest.fixture
def small_system(small_instance):
    chan, net, meas, diff = small_instance
    return chan, augment(net, diff, meas)

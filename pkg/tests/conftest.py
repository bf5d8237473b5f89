import numpy as np
import pytest

from twsforecast import tws
from twsforecast.config import RunConfig

# the smallest shape that still exercises every block of the model
TINY = dict(lookback=16, exo_lookback=16, patch_len=4, d_model=8, heads=2, blocks=1, horizon=4,
            dropout=0.0, batch_size=4)


def tiny_config(**changes) -> RunConfig:
    return RunConfig(**{**TINY, "tws_enabled": False, **changes})


def tiny_whitener(n_exo=3, seed=0, threshold=0.9):
    rng = np.random.default_rng(seed)
    mix = rng.normal(size=(n_exo, n_exo)) * np.linspace(2.0, 0.2, n_exo)
    return tws.fit(mix @ rng.normal(size=(n_exo, 300)), threshold)


def tiny_batch(rng, batch=2, chans=2, n_exo=3, cfg=None):
    cfg = cfg or tiny_config()
    return (rng.normal(size=(batch, chans, cfg.lookback)), rng.normal(size=(batch, n_exo, cfg.exo_lookback)),
            rng.normal(size=(batch, chans, cfg.horizon)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)

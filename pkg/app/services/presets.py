"""Named sweep configurations for the standard test-error experiments.

All presets fix n = 100 and use the Boolean rare-weak model with random flips.
The gamma values for the fixed-s and fixed-p experiments are not pinned down
elsewhere; {0.1, 0.2, 0.3} is used.
"""

from __future__ import annotations

import numpy as np

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.schemas.harness import SweepConfig

P_GRID_POINTS = 16
P_MIN = 100
P_MAX = 3000


def log_spaced_p_grid(low: int = P_MIN, high: int = P_MAX, points: int = P_GRID_POINTS) -> tuple[int, ...]:
    values = np.rint(np.geomspace(low, high, points)).astype(int)
    return tuple(int(value) for value in np.unique(values))


def _fig1(trials: int) -> SweepConfig:
    return SweepConfig(
        name="fig1",
        n=100,
        s=100,
        gamma=0.2,
        eta=0.05,
        p_grid=log_spaced_p_grid(),
        trials=trials,
    )


def _fig2(trials: int) -> SweepConfig:
    return SweepConfig(
        name="fig2",
        n=100,
        s=50,
        gamma_grid=(0.1, 0.2, 0.3),
        eta=0.1,
        p_grid=log_spaced_p_grid(),
        trials=trials,
    )


def _fig3(trials: int) -> SweepConfig:
    return SweepConfig(
        name="fig3",
        n=100,
        p=500,
        s_grid=tuple(range(100, 501, 50)),
        gamma_grid=(0.1, 0.2, 0.3),
        eta=0.1,
        trials=trials,
    )


def _fig4(trials: int) -> SweepConfig:
    return SweepConfig(
        name="fig4",
        n=100,
        gamma=0.1,
        beta_grid=(0.5, 0.55, 0.65),
        eta=0.1,
        p_grid=log_spaced_p_grid(),
        trials=trials,
    )


_PRESETS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4}
PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, trials: int | None = None) -> SweepConfig:
    try:
        build = _PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {', '.join(PRESET_NAMES)}") from None
    config = build(trials or settings.default_trials)
    return config.model_copy(update={"m_test": settings.default_m_test})

from __future__ import annotations

from decimal import Decimal

import pytest

from silosim.core import SystemConfig


@pytest.fixture
def small_config() -> SystemConfig:
    return SystemConfig(n=10, T=20, p=Decimal("0.3"), k=4, seed=11)

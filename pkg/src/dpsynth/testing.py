"""Test hook that zeroes all calibrated noise.

Selection and measurement oracles need deterministic outputs.  The hook is a
DP foot-gun, so enabling it hard-fails when DPSYNTH_RELEASE is set in the
environment (CI release pipelines export it).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

_noise_disabled = False


def noise_is_disabled() -> bool:
    return _noise_disabled


@contextmanager
def noise_disabled():
    """Context manager: samplers return 0, exponential mechanism returns argmax."""
    global _noise_disabled
    if os.environ.get("DPSYNTH_RELEASE"):
        raise RuntimeError("noise_disabled is forbidden in release pipelines")
    prev = _noise_disabled
    _noise_disabled = True
    try:
        yield
    finally:
        _noise_disabled = prev

"""Bound-quality metrics and table formatting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def duality_gap(z_ac_star: float, z: float) -> Optional[float]:
    """Relative gap ``(z_ac_star - z) / z_ac_star``; ``None`` when undefined.

    Negative values (a "bound" above the reference) are returned as-is.
    """
    if not (z_ac_star > 0 and math.isfinite(z_ac_star) and math.isfinite(z)):
        return None
    return (z_ac_star - z) / z_ac_star


def gap_closed(z_hat_sdp: float, z_sdp_star: float, z_hat_soc: float) -> Optional[float]:
    """Fraction of the distance from the SOC proxy bound to the optimal SDP bound."""
    denom = z_sdp_star - z_hat_soc
    if denom == 0 or not math.isfinite(denom) or not math.isfinite(z_hat_sdp):
        return None
    return (z_hat_sdp - z_hat_soc) / denom


@dataclass(frozen=True)
class GapMetrics:
    gap: Optional[float]
    gap_closed: Optional[float]


def duality_gap_metrics(z_ac_star, z_sdp_star, z_hat_sdp, z_hat_soc, z=None) -> GapMetrics:
    """Both metrics for one instance. ``z`` defaults to the predicted SDP bound."""
    z = z_hat_sdp if z is None else z
    gc = None
    if z_sdp_star is not None and z_hat_soc is not None:
        gc = gap_closed(z_hat_sdp, z_sdp_star, z_hat_soc)
    return GapMetrics(gap=duality_gap(z_ac_star, z), gap_closed=gc)


def geometric_mean(values: Iterable[float]) -> float:
    """Geometric mean computed in log space.

    Any zero makes the result 0 (logged as a warning); negative values raise.
    """
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        raise ValueError("geometric mean of an empty sequence")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("geometric mean needs finite, non-negative values")
    if np.any(x == 0):
        logger.warning("geometric mean: %d zero value(s), reporting 0", int(np.sum(x == 0)))
        return 0.0
    return float(np.exp(np.mean(np.log(x))))


def arithmetic_mean(values: Iterable[float]) -> float:
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        raise ValueError("mean of an empty sequence")
    return float(np.mean(x))


def format_mean_std(mean: float, std: float, digits: int = 3) -> str:
    """Table cell in the ``"mean (std)"`` style, e.g. ``0.837 (0.683)``."""
    return f"{mean:.{digits}f} ({std:.{digits}f})"


def summarize(values: Sequence[float], kind: str = "geometric", percent: bool = True) -> str:
    """Format a set of ratios as ``"mean (std)"``, optionally in percent."""
    x = np.asarray(values, dtype=float)
    scale = 100.0 if percent else 1.0
    mean = geometric_mean(x) if kind == "geometric" else arithmetic_mean(x)
    return format_mean_std(scale * mean, scale * float(np.std(x)))

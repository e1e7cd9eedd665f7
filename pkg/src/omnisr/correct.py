"""Consistency correction by one gradient step on the data-fidelity term.

The update e + gamma * A+(e_init - A e) decomposes into a fidelity part
gamma * A+ e_init pulling the estimate toward the observed low-resolution
image and a realness part (I - gamma * A+ A) e retaining the denoiser's
contribution in the null space of A. With gamma = 1 the output is exactly
consistent (A out = e_init) because A A+ = I.

No clamping happens here: the null-space term legitimately over/undershoots
[0, 1], and clamping would break linearity. The pipeline clamps only its
final output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degrade import LinearDegradation, _apply_separable, apply_pinv
from .errors import ConfigError


@dataclass(frozen=True)
class GammaConfig:
    """Correction strengths: post-process, per-step, and re-anchor blend."""

    gamma_p: float = 1.0
    gamma_e: float = 1.0
    gamma_l: float = 0.5

    def __post_init__(self):
        for name in ("gamma_p", "gamma_e", "gamma_l"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigError(f"{name} must be finite")
        if not 0.0 <= self.gamma_l <= 1.0:
            raise ConfigError(f"gamma_l must be in [0, 1], got {self.gamma_l}")


def gd_correct(e, e_init, d: LinearDegradation, gamma: float):
    """e + gamma * A+(e_init - A e); affine in both arguments, unclamped."""
    e = np.asarray(e, dtype=np.float64)
    e_init = np.asarray(e_init, dtype=np.float64)
    if gamma == 0.0:
        return e.copy()
    # the correction always uses the noiseless linear map, independent of the
    # operator's forward-model sigma
    residual = e_init - _apply_separable(d.d_v, d.d_h, e)
    return e + gamma * apply_pinv(d, residual)


def reanchor(state_estimate, corrected_estimate, gamma_l: float):
    """Convex blend with weight gamma_l on the consistency-corrected branch."""
    if not 0.0 <= gamma_l <= 1.0:
        raise ConfigError(f"gamma_l must be in [0, 1], got {gamma_l}")
    a = np.asarray(state_estimate, dtype=np.float64)
    b = np.asarray(corrected_estimate, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"shape mismatch: {a.shape} vs {b.shape}")
    if gamma_l == 0.0:
        return a.copy()
    if gamma_l == 1.0:
        return b.copy()
    return (1.0 - gamma_l) * a + gamma_l * b

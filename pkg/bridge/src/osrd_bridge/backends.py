"""Denoiser backends hosted by the bridge server.

A backend owns all per-session state. The session protocol is:

    init(stack, total_steps)   -- receive the degraded tangent-plane stack
    predict(t) -> stack        -- clean estimate for the current step
    advance(blended, t)        -- consume the re-anchored clean estimate
    finalize() -> stack        -- final reconstruction

``EchoBackend`` is a stateful identity: it makes the bridge fully testable
with no model weights and reproduces the client's built-in identity
denoiser bit-for-bit. ``DiffusionBackend`` wraps a latent diffusion model
packaged as a TorchScript archive.
"""

from __future__ import annotations

import math

import numpy as np


class BackendError(Exception):
    """Model or session failure that should become an error frame."""


class EchoBackend:
    """Identity denoiser: state is the image stack itself."""

    def __init__(self):
        self._state = None

    def init(self, stack: np.ndarray, total_steps: int) -> None:
        self._state = np.array(stack, dtype=np.float64, copy=True)

    def _require_state(self) -> np.ndarray:
        if self._state is None:
            raise BackendError("session not initialised; send init first")
        return self._state

    def predict(self, t: int) -> np.ndarray:
        return self._require_state().copy()

    def advance(self, blended: np.ndarray, t: int) -> None:
        state = self._require_state()
        if blended.shape != state.shape:
            raise BackendError(
                f"stack shape changed: {state.shape} -> {blended.shape}"
            )
        self._state = np.array(blended, dtype=np.float64, copy=True)

    def finalize(self) -> np.ndarray:
        return self._require_state().copy()


class DiffusionBackend:
    """Latent diffusion denoiser loaded from a TorchScript archive.

    The archive must expose three methods on the scripted module:

        encode(x)          image stack -> latent stack
        decode(z)          latent stack -> image stack
        eps(z, z_init, t)  noise prediction conditioned on the encoded
                           degraded input and the step index

    Session flow: ``init`` encodes the degraded stack and injects noise at
    the terminal level of a cosine noise schedule; ``predict`` converts the
    current noise prediction into a decoded clean estimate; ``advance``
    encodes the re-anchored clean estimate (the single encoder call per
    step) and steps the sampler; ``finalize`` decodes the final latent.
    """

    def __init__(self, weights: str, device: str = "cpu", sampler: str = "ddim", seed: int = 0):
        if sampler not in ("ddim", "ancestral"):
            raise BackendError(f"unknown sampler {sampler!r}")
        try:
            import torch
        except ImportError as exc:
            raise BackendError("diffusion backend requires torch") from exc
        self._torch = torch
        try:
            self._model = torch.jit.load(weights, map_location=device)
        except Exception as exc:
            raise BackendError(f"cannot load weights {weights!r}: {exc}") from exc
        self._device = device
        self._sampler = sampler
        self._seed = seed
        self._z = None
        self._z_init = None
        self._total_steps = 0
        self._shape = None

    @staticmethod
    def _alpha_bar(t: int, total_steps: int) -> float:
        # cosine schedule; t counts down from total_steps to 1
        frac = t / max(total_steps, 1)
        return math.cos(0.5 * math.pi * frac) ** 2

    def init(self, stack: np.ndarray, total_steps: int) -> None:
        torch = self._torch
        self._shape = stack.shape
        self._total_steps = int(total_steps)
        x = torch.as_tensor(stack, dtype=torch.float32, device=self._device)
        with torch.no_grad():
            self._z_init = self._model.encode(x)
        gen = torch.Generator(device=self._device).manual_seed(self._seed)
        noise = torch.randn(self._z_init.shape, generator=gen, device=self._device)
        ab = self._alpha_bar(self._total_steps, self._total_steps)
        self._z = math.sqrt(ab) * self._z_init + math.sqrt(1.0 - ab) * noise
        self._gen = gen

    def _require_state(self):
        if self._z is None:
            raise BackendError("session not initialised; send init first")

    def predict(self, t: int) -> np.ndarray:
        self._require_state()
        torch = self._torch
        ab = self._alpha_bar(t, self._total_steps)
        with torch.no_grad():
            eps = self._model.eps(self._z, self._z_init, int(t))
            z0 = (self._z - math.sqrt(1.0 - ab) * eps) / math.sqrt(max(ab, 1e-12))
            out = self._model.decode(z0)
        return out.double().cpu().numpy()

    def advance(self, blended: np.ndarray, t: int) -> None:
        self._require_state()
        if blended.shape != self._shape:
            raise BackendError(f"stack shape changed: {self._shape} -> {blended.shape}")
        torch = self._torch
        x = torch.as_tensor(blended, dtype=torch.float32, device=self._device)
        with torch.no_grad():
            z0 = self._model.encode(x)
        ab_t = self._alpha_bar(t, self._total_steps)
        ab_prev = self._alpha_bar(t - 1, self._total_steps)
        eps = (self._z - math.sqrt(ab_t) * z0) / math.sqrt(max(1.0 - ab_t, 1e-12))
        self._z = math.sqrt(ab_prev) * z0 + math.sqrt(1.0 - ab_prev) * eps
        if self._sampler == "ancestral" and t > 1:
            sigma = math.sqrt(max(1.0 - ab_prev, 0.0)) * 0.1
            noise = torch.randn(self._z.shape, generator=self._gen, device=self._device)
            self._z = self._z + sigma * noise

    def finalize(self) -> np.ndarray:
        self._require_state()
        torch = self._torch
        with torch.no_grad():
            out = self._model.decode(self._z)
        return out.double().cpu().numpy()


def make_backend(no_model: bool, weights: str | None, device: str, sampler: str):
    """Backend factory used once per accepted connection."""
    if no_model or weights is None:
        return EchoBackend()
    return DiffusionBackend(weights, device=device, sampler=sampler)

"""Denoiser plugins driving the iterative restoration loop.

A denoiser owns an evolving state over the tangent-plane stack and exposes
five operations:

    init(images, total_steps)      -> state at step T
    predict_clean(state, t)        -> clean estimate for the current state
    encode(images)                 -> map an image-space stack into the
                                      denoiser's state space (identity for
                                      the image-space denoisers here)
    advance(state, blended, t)     -> state at step t - 1, given the
                                      re-anchored clean estimate
    finalize(state)                -> final clean stack

Built-ins:

* ``IdentityDenoiser`` -- the do-nothing reference; the loop then reduces to
  repeated consistency correction, which is the baseline behaviour external
  backends are compared against in echo mode.
* ``TvDenoiser`` -- total-variation proximal smoothing with a strength
  schedule that decays linearly with t, so early steps smooth aggressively
  and late steps refine.
* ``ExternalDenoiser`` -- client for an out-of-process backend speaking the
  wire protocol; the heavy model runs elsewhere and this class only moves
  tensors.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from . import wire
from .errors import ConfigError, ShapeMismatch


class Denoiser(abc.ABC):
    """Contract shared by all denoiser plugins. States are opaque to the
    caller; only the denoiser that produced a state may consume it."""

    @abc.abstractmethod
    def init(self, images: np.ndarray, total_steps: int):
        """Start a run from the seed stack; returns the state at step T."""

    @abc.abstractmethod
    def predict_clean(self, state, t: int) -> np.ndarray:
        """Clean-stack estimate from the state at step t."""

    def encode(self, images: np.ndarray) -> np.ndarray:
        """Image space -> state space; identity unless overridden."""
        return np.asarray(images, dtype=np.float64)

    @abc.abstractmethod
    def advance(self, state, blended: np.ndarray, t: int):
        """Consume the re-anchored estimate; returns the state at t - 1."""

    @abc.abstractmethod
    def finalize(self, state) -> np.ndarray:
        """Final clean stack once the loop has reached t = 1."""

    def close(self):
        """Release any resources (sockets, sessions)."""


def _as_stack_array(images) -> np.ndarray:
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim != 4:
        raise ConfigError(f"denoiser stacks must be (m, R, R, C), got {arr.shape}")
    return arr


class IdentityDenoiser(Denoiser):
    """State is the stack itself; predictions pass it through unchanged."""

    def init(self, images, total_steps):
        if total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        return _as_stack_array(images).copy()

    def predict_clean(self, state, t):
        return state.copy()

    def advance(self, state, blended, t):
        blended = _as_stack_array(blended)
        if blended.shape != state.shape:
            raise ShapeMismatch(f"stack shape changed: {state.shape} -> {blended.shape}")
        return blended.copy()

    def finalize(self, state):
        return state.copy()


def tv_prox(img: np.ndarray, lam: float, iters: int = 12, tau: float = 0.125) -> np.ndarray:
    """Proximal operator of anisotropic total variation.

    Solves min_u ||u - img||^2 / 2 + lam * TV(u) by projected gradient
    ascent on the dual variables (Chambolle-style, componentwise clipping).
    A fixed iteration count keeps the cost deterministic; convergence is
    monotone in the dual so extra iterations only tighten the solution.
    """
    if lam < 0:
        raise ConfigError("TV strength must be >= 0")
    img = np.asarray(img, dtype=np.float64)
    if lam == 0.0:
        return img.copy()
    px = np.zeros_like(img)
    py = np.zeros_like(img)
    for _ in range(iters):
        div = np.zeros_like(img)
        div[1:, :] += py[:-1, :]
        div -= py
        div[:, 1:] += px[:, :-1]
        div -= px
        div[-1, :] += py[-1, :]
        div[:, -1] += px[:, -1]
        u = img - lam * div
        gy = np.zeros_like(u)
        gx = np.zeros_like(u)
        gy[:-1, :] = u[1:, :] - u[:-1, :]
        gx[:, :-1] = u[:, 1:] - u[:, :-1]
        py = np.clip(py + (tau / lam) * gy, -1.0, 1.0)
        px = np.clip(px + (tau / lam) * gx, -1.0, 1.0)
    div = np.zeros_like(img)
    div[1:, :] += py[:-1, :]
    div -= py
    div[:, 1:] += px[:, :-1]
    div -= px
    div[-1, :] += py[-1, :]
    div[:, -1] += px[:, -1]
    return img - lam * div


def total_variation(img: np.ndarray) -> float:
    """Anisotropic TV (sum of absolute forward differences, all channels)."""
    img = np.asarray(img, dtype=np.float64)
    return float(
        np.sum(np.abs(np.diff(img, axis=0))) + np.sum(np.abs(np.diff(img, axis=1)))
    )


@dataclass
class _TvState:
    images: np.ndarray
    total_steps: int


class TvDenoiser(Denoiser):
    """Smooths each plane with a TV proximal step whose strength decays
    linearly over the run: lam(t) = lam_max * t / T."""

    def __init__(self, lam_max: float = 0.02, iters: int = 12):
        if lam_max < 0:
            raise ConfigError("TV strength must be >= 0")
        if iters < 1:
            raise ConfigError("TV iteration count must be >= 1")
        self.lam_max = float(lam_max)
        self.iters = int(iters)

    def strength(self, t: int, total_steps: int) -> float:
        return self.lam_max * t / total_steps

    def init(self, images, total_steps):
        if total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        return _TvState(_as_stack_array(images).copy(), int(total_steps))

    def predict_clean(self, state, t):
        lam = self.strength(t, state.total_steps)
        if lam == 0.0:
            return state.images.copy()
        out = np.empty_like(state.images)
        for i in range(state.images.shape[0]):
            for c in range(state.images.shape[3]):
                out[i, :, :, c] = tv_prox(state.images[i, :, :, c], lam, self.iters)
        return out

    def advance(self, state, blended, t):
        blended = _as_stack_array(blended)
        if blended.shape != state.images.shape:
            raise ShapeMismatch(
                f"stack shape changed: {state.images.shape} -> {blended.shape}"
            )
        return _TvState(blended.copy(), state.total_steps)

    def finalize(self, state):
        return state.images.copy()


@dataclass
class _RemoteState:
    shape: tuple
    total_steps: int


class ExternalDenoiser(Denoiser):
    """Client for a denoiser served over the wire protocol.

    The remote side owns all model state; locally we track only the stack
    shape (to validate replies) and the step budget. Re-anchoring happens in
    image space before ``advance``, so backends whose state space is not
    image space apply their encoder to the single blended stack they
    receive.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self._sock = wire.connect(endpoint, timeout=timeout)
        reply = wire.request(self._sock, wire.OP_HELLO, wire.pack_payload(None, 0, 0, 0))
        wire.unpack_payload(reply)  # validates framing; contents unused

    def init(self, images, total_steps):
        images = _as_stack_array(images)
        payload = wire.pack_payload(images, total_steps, total_steps, images.shape[0])
        wire.request(self._sock, wire.OP_INIT, payload)
        return _RemoteState(images.shape, int(total_steps))

    def predict_clean(self, state, t):
        payload = wire.pack_payload(None, t, state.total_steps, state.shape[0])
        reply = wire.request(self._sock, wire.OP_PREDICT, payload)
        arr, _, _, _ = wire.unpack_payload(reply)
        return wire.expect_shape(arr, state.shape)

    def advance(self, state, blended, t):
        blended = _as_stack_array(blended)
        if blended.shape != state.shape:
            raise ShapeMismatch(f"stack shape changed: {state.shape} -> {blended.shape}")
        payload = wire.pack_payload(blended, t, state.total_steps, state.shape[0])
        wire.request(self._sock, wire.OP_ADVANCE, payload)
        return state

    def finalize(self, state):
        payload = wire.pack_payload(None, 0, state.total_steps, state.shape[0])
        reply = wire.request(self._sock, wire.OP_FINALIZE, payload)
        arr, _, _, _ = wire.unpack_payload(reply)
        return wire.expect_shape(arr, state.shape)

    def close(self):
        if self._sock is None:
            return
        try:
            self._sock.sendall(
                wire.encode_frame(wire.OP_SHUTDOWN, wire.pack_payload(None, 0, 0, 0))
            )
            wire.read_frame(self._sock)
        except Exception:
            pass  # best effort; the session is over either way
        finally:
            self._sock.close()
            self._sock = None


def make_denoiser(kind: str, endpoint: str | None = None, **opts) -> Denoiser:
    """Factory keyed by plugin name: identity, tv, or external."""
    if kind == "identity":
        return IdentityDenoiser()
    if kind == "tv":
        return TvDenoiser(**opts)
    if kind == "external":
        if not endpoint:
            raise ConfigError("external denoiser requires an endpoint")
        return ExternalDenoiser(endpoint, **opts)
    raise ConfigError(f"unknown denoiser kind {kind!r}")

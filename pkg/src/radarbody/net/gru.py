"""Bi-directional GRU over the window's time axis.

Gate layout in the packed weight matrices is (reset, update, candidate).
The candidate's hidden contribution is gated by the reset gate before the
tanh, and the new state is (1 - z) * n + z * h, so the all-zero input with
zero biases keeps the state at exactly zero.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from .params import ParameterStore


class BiGRU:
    def __init__(self, store: ParameterStore, prefix: str, d_in: int, hidden: int):
        self.hidden = hidden
        self.weights = {}
        for direction in ("fwd", "bwd"):
            self.weights[direction] = {
                "wx": store.linear(f"{prefix}.{direction}.x", d_in, 3 * hidden,
                                   bias_init=np.zeros(3 * hidden)),
                "wh": store.linear(f"{prefix}.{direction}.h", hidden, 3 * hidden,
                                   bias_init=np.zeros(3 * hidden)),
            }

    def _run(self, x: ad.Tensor, direction: str) -> list[ad.Tensor]:
        """x (B, T, D) -> list of T hidden states (B, H), in time order."""
        b, t_len, _ = x.shape
        h = self.hidden
        wx, bx = self.weights[direction]["wx"]
        wh, bh = self.weights[direction]["wh"]
        state = ad.Tensor(np.zeros((b, h)))
        order = range(t_len) if direction == "fwd" else range(t_len - 1, -1, -1)
        outputs: dict[int, ad.Tensor] = {}
        for t in order:
            xt = ad.reshape(ad.narrow(x, 1, t, 1), (b, x.shape[-1]))
            gx = ad.add(ad.matmul(xt, wx), bx)
            gh = ad.add(ad.matmul(state, wh), bh)
            r = ad.sigmoid(ad.add(ad.narrow(gx, 1, 0, h), ad.narrow(gh, 1, 0, h)))
            z = ad.sigmoid(ad.add(ad.narrow(gx, 1, h, h), ad.narrow(gh, 1, h, h)))
            n = ad.tanh(ad.add(ad.narrow(gx, 1, 2 * h, h),
                               ad.mul(r, ad.narrow(gh, 1, 2 * h, h))))
            state = ad.add(ad.mul(ad.sub(1.0, z), n), ad.mul(z, state))
            outputs[t] = state
        return [outputs[t] for t in range(t_len)]

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        """x (B, T, D) -> per-frame global features (B, T, 2 * hidden)."""
        if len(x.shape) != 3:
            raise DimensionError(f"BiGRU expects (B, T, D), got {x.shape}")
        fwd = self._run(x, "fwd")
        bwd = self._run(x, "bwd")
        per_frame = [ad.concat_last_axis([f, b]) for f, b in zip(fwd, bwd)]
        return ad.stack(per_frame, axis=1)

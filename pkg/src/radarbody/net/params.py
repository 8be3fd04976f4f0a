"""Named parameter store with seeded initialization.

Each parameter's init stream is keyed by (seed, name), so adding or removing
layers never shifts another layer's initial values.  Insertion order is the
canonical parameter order used by the optimizer and the checkpoint file.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor
from ..errors import ContractError
from ..seeding import seeded_rng


class ParameterStore:
    def __init__(self, seed: int):
        self.seed = seed
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def linear(self, name: str, d_in: int, d_out: int,
               bias_init: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """Weight (d_in, d_out) ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), bias likewise
        unless an explicit ``bias_init`` is given."""
        rng = seeded_rng("init", self.seed, name)
        bound = 1.0 / np.sqrt(d_in)
        weight = self.add(f"{name}.weight", rng.uniform(-bound, bound, size=(d_in, d_out)))
        if bias_init is None:
            bias = self.add(f"{name}.bias", rng.uniform(-bound, bound, size=d_out))
        else:
            bias = self.add(f"{name}.bias", np.asarray(bias_init, dtype=np.float64))
        return weight, bias

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; shapes must match exactly."""
        missing = set(self._params) - set(values)
        extra = set(values) - set(self._params)
        if missing or extra:
            raise ContractError(f"parameter name mismatch: missing={sorted(missing)} "
                                f"unexpected={sorted(extra)}")
        for name, tensor in self._params.items():
            if values[name].shape != tensor.data.shape:
                raise ContractError(
                    f"parameter {name}: stored shape {values[name].shape} != "
                    f"expected {tensor.data.shape}")
            tensor.data = np.array(values[name], dtype=np.float64)
            tensor.grad = None

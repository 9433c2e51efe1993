"""
Parameter Sets for RSLab
Named, lexicographically ordered collections of trainable tensors
"""

from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from numerics.rng import SplitMix64
from numerics.tensor import Tensor
from utils.errors import ContractError


class ParamSet(Mapping[str, Tensor]):
    """Map from dotted path (e.g. "hybrid.lstm0.W_ih") to a tracked Tensor"""

    def __init__(self, tensors: Optional[Mapping[str, Tensor]] = None):
        self._tensors: Dict[str, Tensor] = {}
        for name, tensor in (tensors or {}).items():
            self.add(name, tensor)

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._tensors:
            raise ContractError(f"duplicate parameter name: {name}")
        tensor.requires_grad = True
        tensor.name = name
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._tensors))

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> Iterator[Tuple[str, Tensor]]:  # type: ignore[override]
        for name in self:
            yield name, self._tensors[name]

    def scope(self, prefix: str) -> Dict[str, Tensor]:
        """Entries under `prefix.` with the prefix stripped"""
        head = prefix + "."
        return {name[len(head):]: t for name, t in self.items() if name.startswith(head)}

    def zero_grad(self):
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def num_params(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def state(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_state(self, state: Mapping[str, np.ndarray]):
        missing = set(self._tensors) - set(state)
        extra = set(state) - set(self._tensors)
        if missing or extra:
            raise ContractError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, array in state.items():
            target = self._tensors[name]
            if target.shape != tuple(array.shape):
                raise ContractError(f"shape mismatch for {name}: {target.shape} vs {array.shape}")
            target.data = np.array(array, dtype=target.data.dtype)


class Initializer:
    """Seeded parameter factory; every draw comes from one splitmix stream"""

    def __init__(self, params: ParamSet, rng: SplitMix64):
        self.params = params
        self.rng = rng

    def uniform(self, name: str, shape: Tuple[int, ...], bound: float) -> Tensor:
        return self.params.add(name, Tensor(self.rng.uniform(-bound, bound, shape)))

    def zeros(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        return self.params.add(name, Tensor(np.zeros(shape)))

    def lstm(self, prefix: str, d_in: int, d_h: int) -> Dict[str, Tensor]:
        bound = 1.0 / np.sqrt(d_h)
        return {
            "W_ih": self.uniform(f"{prefix}.W_ih", (4 * d_h, d_in), bound),
            "W_hh": self.uniform(f"{prefix}.W_hh", (4 * d_h, d_h), bound),
            "b": self.zeros(f"{prefix}.b", (4 * d_h,)),
        }

    def conv(self, prefix: str, c_in: int, c_out: int, k: int, bias: bool = True) -> Dict[str, Tensor]:
        bound = np.sqrt(6.0 / (c_in * k * k))
        out = {"weight": self.uniform(f"{prefix}.weight", (c_out, c_in, k, k), bound)}
        if bias:
            out["bias"] = self.zeros(f"{prefix}.bias", (c_out,))
        return out

    def linear(self, name: str, d_out: int, d_in: int) -> Tensor:
        return self.uniform(name, (d_out, d_in), 1.0 / np.sqrt(d_in))

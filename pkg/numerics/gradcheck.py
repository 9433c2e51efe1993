"""
Finite-Difference Gradient Oracle for RSLab
Compares tape gradients with central differences on sampled coordinates
"""

from typing import Callable, Dict, Optional

import numpy as np

from numerics.params import ParamSet
from numerics.rng import SplitMix64
from numerics.tensor import Tensor, no_grad
from utils.errors import NumericError
from utils.logger import get_logger

logger = get_logger("gradcheck")


def grad_check(
    f: Callable[[ParamSet], Tensor],
    params: ParamSet,
    eps: float = 1e-5,
    samples_per_param: Optional[int] = 8,
    seed: int = 0,
    floor: float = 1e-8,
) -> float:
    """Max relative error |analytic - numeric| / max(|analytic|, |numeric|, floor)

    samples_per_param=None checks every coordinate.
    """
    params.zero_grad()
    loss = f(params)
    if not np.isfinite(loss.data).all():
        raise NumericError("non-finite loss at the unperturbed point")
    loss.backward()
    analytic: Dict[str, np.ndarray] = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for name, t in params.items()
    }

    rng = SplitMix64(seed)
    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        if samples_per_param is None or samples_per_param >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.integers(0, flat.size, samples_per_param)
        for idx in coords:
            original = flat[idx]
            with no_grad():
                flat[idx] = original + eps
                plus = f(params).item()
                flat[idx] = original - eps
                minus = f(params).item()
            flat[idx] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"non-finite loss while perturbing {name}[{idx}]")
            numeric = (plus - minus) / (2.0 * eps)
            exact = analytic[name].reshape(-1)[idx]
            err = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
            if err > worst:
                worst = err
                logger.debug(f"grad_check {name}[{idx}]: analytic={exact:.6e} numeric={numeric:.6e}")
    params.zero_grad()
    return worst

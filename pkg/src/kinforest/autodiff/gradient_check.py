"""Central-difference verification of reverse-mode gradients."""

import logging

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from kinforest.autodiff.tensor import Tensor, backward, graph_scope, no_grad, zero_grads
from kinforest.errors import NonFiniteError, PreconditionError


logger = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-8

LossFn = Callable[[Mapping[str, Tensor]], Tensor]


@dataclass(frozen=True)
class GradientCheckReport:
    max_relative_error: float
    worst_parameter: str | None
    worst_index: Tuple[int, ...] | None
    checked: int
    per_parameter: Dict[str, float]

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def _evaluate(f: LossFn, params: Mapping[str, Tensor], name: str, index: Tuple[int, ...]) -> float:
    with no_grad():
        value = f(params).item()
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is not finite when perturbing parameter '{name}' at index {index}")
    return value


def gradient_check(
    f: LossFn,
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    coords_per_param: int | None = None,
    seed: int = 0,
    atol: float = 0.0,
) -> GradientCheckReport:
    """Compare backward() against central differences of `f` at `params`.

    Parameters are perturbed in place and restored. With `coords_per_param` set,
    a seeded random subset of that many coordinates is checked per tensor;
    otherwise every coordinate is. Coordinates whose absolute disagreement is at
    most `atol` count as exact.
    """
    if eps <= 0:
        raise PreconditionError(f"eps must be positive, got {eps}")

    zero_grads(params)
    with graph_scope():
        loss = f(params)
        if not np.all(np.isfinite(loss.value)):
            raise NonFiniteError("loss is not finite at the unperturbed parameters")
        backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}  # type: ignore[union-attr]

    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_parameter: str | None = None
    worst_index: Tuple[int, ...] | None = None
    per_parameter: Dict[str, float] = {}
    checked = 0

    for name, param in params.items():
        flat_positions = np.arange(param.size)
        if coords_per_param is not None and coords_per_param < param.size:
            flat_positions = np.sort(rng.choice(param.size, size=coords_per_param, replace=False))

        param_worst = 0.0
        for flat in flat_positions:
            index = tuple(int(i) for i in np.unravel_index(int(flat), param.shape))
            original = param.value[index]

            param.value[index] = original + eps
            plus = _evaluate(f, params, name, index)
            param.value[index] = original - eps
            minus = _evaluate(f, params, name, index)
            param.value[index] = original

            numeric = (plus - minus) / (2.0 * eps)
            exact = float(analytic[name][index])
            error = 0.0 if abs(exact - numeric) <= atol else relative_error(exact, numeric)
            checked += 1

            param_worst = max(param_worst, error)
            if error > worst:
                worst, worst_parameter, worst_index = error, name, index

        per_parameter[name] = param_worst
        logger.debug("gradient check %s: %d coordinates, max relative error %.3e", name, len(flat_positions), param_worst)

    zero_grads(params)
    return GradientCheckReport(
        max_relative_error=worst,
        worst_parameter=worst_parameter,
        worst_index=worst_index,
        checked=checked,
        per_parameter=per_parameter,
    )

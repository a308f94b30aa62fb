"""
gradcheck.py

Reverse-mode vs. central finite-difference gradient verification in double precision. The scalar objective is a fixed
random projection of the operation's output; each parameter is checked at a seeded subset of its entries.

Errors are relative to the larger of the two gradients. Below the objective's rounding noise a central difference has
no significant digits left, so the denominator never drops under that noise floor.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping

import torch

from overwatch import initialize_overwatch

# Initialize Overwatch =>> Wraps `logging.Logger`
overwatch = initialize_overwatch(__name__)

# Noise floor =>> ROUNDOFF_MARGIN * machine epsilon * Σ|output * projection| / h, never below MIN_SCALE
ROUNDOFF_MARGIN = 1e6
MIN_SCALE = 1e-8


class GradCheckError(ValueError):
    pass


@dataclass
class GradCheckReport:
    tolerance: float
    floor: float = MIN_SCALE
    per_parameter: Dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_parameter.values(), default=0.0)

    @property
    def failures(self) -> Dict[str, float]:
        return {name: err for name, err in self.per_parameter.items() if err > self.tolerance}

    @property
    def passed(self) -> bool:
        return len(self.failures) == 0


def relative_error(analytic: float, numeric: float, floor: float = MIN_SCALE) -> float:
    return abs(analytic - numeric) / max(floor, abs(analytic), abs(numeric))


def noise_floor(output: torch.Tensor, projection: torch.Tensor, h: float) -> float:
    """Smallest gradient a central difference of the projected objective can still resolve."""
    magnitude = (output.abs() * projection.abs()).sum().item()
    return max(MIN_SCALE, ROUNDOFF_MARGIN * torch.finfo(output.dtype).eps * magnitude / h)


def grad_check(
    op: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    h: float = 1e-6,
    tolerance: float = 1e-4,
    max_entries: int = 16,
    seed: int = 0,
    raise_on_failure: bool = True,
) -> GradCheckReport:
    """
    Compare autograd against (f(θ + h) - f(θ - h)) / 2h for every named leaf tensor in `params`.

    :param op: closure recomputing the operation's output from the current values of `params`
    :param params: named float64 leaf tensors with `requires_grad=True`
    :param max_entries: entries checked per parameter (all of them if the tensor is smaller)
    """
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        output = op()
    projection = torch.randn(output.shape, generator=generator, dtype=torch.float64).to(output.dtype)

    def objective() -> torch.Tensor:
        return (op() * projection).sum()

    names, tensors = list(params.keys()), list(params.values())
    grads = torch.autograd.grad(objective(), tensors, allow_unused=True)

    report = GradCheckReport(tolerance=tolerance, floor=noise_floor(output, projection, h))
    for name, tensor, grad in zip(names, tensors, grads):
        grad = torch.zeros_like(tensor) if grad is None else grad
        flat, flat_grad = tensor.data.view(-1), grad.reshape(-1)
        if flat.numel() <= max_entries:
            entries = torch.arange(flat.numel())
        else:
            entries = torch.randperm(flat.numel(), generator=generator)[:max_entries].sort().values

        worst = 0.0
        with torch.no_grad():
            for idx in entries.tolist():
                original = flat[idx].item()
                flat[idx] = original + h
                f_plus = objective().item()
                flat[idx] = original - h
                f_minus = objective().item()
                flat[idx] = original
                numeric = (f_plus - f_minus) / (2 * h)
                worst = max(worst, relative_error(flat_grad[idx].item(), numeric, report.floor))
        report.per_parameter[name] = worst

    overwatch.debug(
        f"Gradient check max relative error {report.max_rel_error:.3e} over {len(names)} tensors"
        f" (noise floor {report.floor:.1e})"
    )
    if raise_on_failure and not report.passed:
        failing = ", ".join(f"{name} ({err:.2e})" for name, err in report.failures.items())
        raise GradCheckError(f"Gradient check failed at tolerance {tolerance:.1e} for: {failing}")
    return report

"""Problem parameters for the two-phase functional."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import InvalidParameters


@dataclass(frozen=True)
class ProblemParams:
    """Exponents and weights of ``J(u) = int |Du|^p/p + F(u)``.

    ``F(s) = lambda_plus * s_+^gamma + lambda_minus * s_-^gamma``.  The two
    regularization knobs only affect the discrete problem: ``grad_reg_delta``
    smooths ``|Du|`` and ``pot_reg_eps`` smooths ``F`` near zero.
    """

    p: float
    gamma: float
    lambda_plus: float = 1.0
    lambda_minus: float = 1.0
    grad_reg_delta: float = 0.0
    pot_reg_eps: float = 0.0

    def __post_init__(self):
        values = asdict(self)
        for name, value in values.items():
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
        if not self.p > 1:
            raise InvalidParameters(f"p must exceed 1, got p={self.p}")
        # closed at p/2 so that the classical case p = 2, gamma = 1 is admitted
        if not 0 <= self.gamma <= self.p / 2:
            raise InvalidParameters(
                f"gamma must satisfy 0 <= gamma <= p/2, got gamma={self.gamma}, p={self.p}"
            )
        if self.lambda_plus < 0 or self.lambda_minus < 0:
            raise InvalidParameters("lambda_plus and lambda_minus must be nonnegative")
        if not self.lambda_plus + self.lambda_minus > 0:
            raise InvalidParameters("lambda_plus + lambda_minus must be positive")
        if self.grad_reg_delta < 0 or self.pot_reg_eps < 0:
            raise InvalidParameters("grad_reg_delta and pot_reg_eps must be nonnegative")

    @property
    def eta(self) -> float:
        """Homogeneity exponent ``p / (p - gamma)``."""
        return self.p / (self.p - self.gamma)

    def with_regularization(self, delta: float, eps: float) -> "ProblemParams":
        return replace(self, grad_reg_delta=delta, pot_reg_eps=eps)

    def mirrored(self) -> "ProblemParams":
        """Parameters for ``-u``: the two weights swap."""
        return replace(self, lambda_plus=self.lambda_minus, lambda_minus=self.lambda_plus)

    def to_dict(self) -> dict:
        return asdict(self)

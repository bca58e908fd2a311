"""Test functionals Phi evaluated on coefficient arrays (trailing axis = modes)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spectral import SpectralField

KINDS = ("exp_neg_sq", "mode_k", "cos_mode")


@dataclass(frozen=True)
class FunctionalSpec:
    """exp_neg_sq: exp(-|v|^2); mode_k: <v, phi_k>; cos_mode: cos(<v, phi_1>)."""

    kind: str = "exp_neg_sq"
    k: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown functional {self.kind!r}; expected one of {KINDS}")
        if self.k < 1:
            raise DomainError("mode index must be >= 1")

    @classmethod
    def parse(cls, text: str) -> FunctionalSpec:
        """'exp_neg_sq', 'cos_mode', 'mode_k' or 'mode_k:3'."""
        name, _, idx = text.strip().partition(":")
        if name == "mode_k":
            return cls("mode_k", int(idx) if idx else 1)
        if idx:
            raise DomainError(f"functional {name!r} takes no index")
        return cls(name)

    def __str__(self):
        return f"mode_k:{self.k}" if self.kind == "mode_k" else self.kind

    @property
    def is_cb2(self) -> bool:
        """Bounded with bounded first and second derivatives."""
        return self.kind in ("exp_neg_sq", "cos_mode")

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        if self.kind == "exp_neg_sq":
            return np.exp(-np.sum(coeffs * coeffs, axis=-1))
        if self.kind == "cos_mode":
            return np.cos(coeffs[..., 0])
        if self.k > coeffs.shape[-1]:
            return np.zeros(coeffs.shape[:-1])
        return np.array(coeffs[..., self.k - 1])

    def __call__(self, field) -> float:
        if isinstance(field, SpectralField):
            field = field.coeffs
        return float(self.evaluate(np.asarray(field)))

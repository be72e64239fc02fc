from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np


class MaterialError(ValueError):
    """Raised for material parameters outside their admissible range."""


class DegenerateStateError(ArithmeticError):
    """Recoverable failure: det F or tr F too small, or a non-finite result."""

    def __init__(self, message: str, element: Optional[int] = None):
        super().__init__(message)
        self.element = element


class SingularRotationError(DegenerateStateError):
    """F11 + F22 vanishes, so the rotation angle is undefined."""


class NonFiniteEnergyError(ArithmeticError):
    """An energy probe returned inf or nan."""


class RegularizationKind(str, Enum):
    HUHU = 'huhu'
    HUHU_DEV = 'huhu-dev'
    ROT_J = 'rot-j'
    TAN_ROT_J = 'tan-rot-j'

    @property
    def uses_rotation(self) -> bool:
        return self in (RegularizationKind.ROT_J, RegularizationKind.TAN_ROT_J)


@dataclass(frozen=True)
class Body:
    K: float
    mu: float

    def __post_init__(self):
        if not (self.K > 0 and self.mu > 0):
            raise MaterialError(f"body needs K > 0 and mu > 0, got K={self.K}, mu={self.mu}")

    @property
    def is_medium(self) -> bool:
        return False


@dataclass(frozen=True)
class ThirdMedium:
    gamma: float
    alpha_r: float
    beta: float = 0.0
    reg: RegularizationKind = RegularizationKind.HUHU_DEV
    mu: float = 1.0
    # inert: the medium keeps only the isochoric part of the bulk energy
    K: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'reg', RegularizationKind(self.reg))
        if not self.gamma > 0:
            raise MaterialError(f"gamma must be > 0, got {self.gamma}")
        if self.alpha_r < 0 or self.beta < 0:
            raise MaterialError(f"alpha_r and beta must be >= 0, got {self.alpha_r}, {self.beta}")
        if not (self.K > 0 and self.mu > 0):
            raise MaterialError(f"medium needs K > 0 and mu > 0, got K={self.K}, mu={self.mu}")

    @property
    def is_medium(self) -> bool:
        return True


MaterialModel = Union[Body, ThirdMedium]


@dataclass
class MaterialPointState:
    """Energy and flattened derivative blocks at one or more material points."""

    F: np.ndarray
    gradF: np.ndarray
    psi: np.ndarray
    P_hat: np.ndarray
    T_hat: np.ndarray
    D_hat: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray

    @property
    def hessian(self) -> np.ndarray:
        """Full 12 x 12 energy Hessian [[D, A^T], [A, B]]."""
        top = np.concatenate([self.D_hat, np.swapaxes(self.A_hat, -1, -2)], axis=-1)
        bottom = np.concatenate([self.A_hat, self.B_hat], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

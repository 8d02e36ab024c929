"""Pauli channel rates, symplectic labels and bulk error frames."""

from enum import Enum
from typing import Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import DomainError
from .seeding import make_rng

NORMALIZATION_TOL = 1e-12

# Bulk frames store one 2-bit symplectic code per position: code = x | (z << 1).
CODE_I, CODE_X, CODE_Z, CODE_Y = 0, 1, 2, 3

_SAMPLE_CHUNK = 1 << 22


class Basis(int, Enum):
    """Measurement bases of the six-state scheme."""

    Z = 0
    X = 1
    Y = 2


class PauliRates(BaseModel):
    """Probabilities of I, X, Y, Z errors on one position of an i.i.d. Pauli channel."""

    model_config = ConfigDict(frozen=True)

    p_i: float
    p_x: float
    p_y: float
    p_z: float

    @model_validator(mode="after")
    def _check_distribution(self) -> "PauliRates":
        values = (self.p_i, self.p_x, self.p_y, self.p_z)
        if any(not np.isfinite(v) or v < 0.0 or v > 1.0 + NORMALIZATION_TOL for v in values):
            raise DomainError(f"Pauli rates must lie in [0, 1], got {values}")
        total = sum(values)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"Pauli rates must sum to 1, got {total!r}")
        return self

    @classmethod
    def normalized(cls, p_i: float, p_x: float, p_y: float, p_z: float) -> "PauliRates":
        """Clamp each component to [0, 1] and renormalize.

        Used for estimates and for maps whose outputs carry rounding noise.
        """
        values = np.clip(np.array([p_i, p_x, p_y, p_z], dtype=float), 0.0, 1.0)
        total = values.sum()
        if total <= 0.0:
            raise DomainError("cannot normalize an all-zero rate vector")
        values = values / total
        return cls(p_i=float(values[0]), p_x=float(values[1]), p_y=float(values[2]), p_z=float(values[3]))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PauliRates":
        if len(values) != 4:
            raise DomainError(f"expected 4 rates, got {len(values)}")
        return cls(p_i=float(values[0]), p_x=float(values[1]), p_y=float(values[2]), p_z=float(values[3]))

    @property
    def bit_error(self) -> float:
        return self.p_x + self.p_y

    @property
    def phase_error(self) -> float:
        return self.p_y + self.p_z

    @property
    def channel_error(self) -> float:
        return self.p_x + self.p_y + self.p_z

    def as_array(self) -> np.ndarray:
        """Rates in (p_i, p_x, p_y, p_z) order."""
        return np.array([self.p_i, self.p_x, self.p_y, self.p_z], dtype=float)

    def code_probabilities(self) -> np.ndarray:
        """Rates in frame-code order (I, X, Z, Y)."""
        return np.array([self.p_i, self.p_x, self.p_z, self.p_y], dtype=float)

    def allclose(self, other: "PauliRates", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol))


class PauliLabel(BaseModel):
    """Symplectic bit pair (x, z): I=(0,0), X=(1,0), Y=(1,1), Z=(0,1)."""

    model_config = ConfigDict(frozen=True)

    x: int = Field(ge=0, le=1)
    z: int = Field(ge=0, le=1)

    @property
    def code(self) -> int:
        return self.x | (self.z << 1)

    @property
    def name(self) -> str:
        return "IXZY"[self.code]

    @classmethod
    def from_code(cls, code: int) -> "PauliLabel":
        if not 0 <= int(code) <= 3:
            raise DomainError(f"label code must be in 0..3, got {code}")
        return cls(x=int(code) & 1, z=(int(code) >> 1) & 1)

    @classmethod
    def from_name(cls, name: str) -> "PauliLabel":
        index = "IXZY".find(name.upper())
        if len(name) != 1 or index < 0:
            raise DomainError(f"unknown Pauli label {name!r}")
        return cls.from_code(index)

    def anticommutes(self, basis: Basis) -> bool:
        """Whether this error flips an outcome measured in ``basis``."""
        if basis == Basis.Z:
            return self.x == 1
        if basis == Basis.X:
            return self.z == 1
        return self.x != self.z

    def __str__(self) -> str:
        return self.name


I = PauliLabel(x=0, z=0)
X = PauliLabel(x=1, z=0)
Y = PauliLabel(x=1, z=1)
Z = PauliLabel(x=0, z=1)


def anticommute_mask(codes: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """Vectorised :meth:`PauliLabel.anticommutes` over codes and basis tags."""
    x = codes & 1
    z = (codes >> 1) & 1
    flips = np.where(bases == Basis.Z, x, np.where(bases == Basis.X, z, x ^ z))
    return flips.astype(bool)


class ErrorFrame(BaseModel):
    """Joint Alice/Bob error record for the surviving positions of a run."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    labels: np.ndarray
    origin_seed: int = 0
    generation: int = 0

    @field_validator("labels", mode="before")
    @classmethod
    def _check_labels(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.uint8)
        if value.ndim != 1:
            raise DomainError("frame labels must be one-dimensional")
        if value.size and value.max() > 3:
            raise DomainError("frame label codes must be in 0..3")
        return value

    @classmethod
    def from_labels(cls, labels: Iterable[PauliLabel], origin_seed: int = 0) -> "ErrorFrame":
        codes = np.array([label.code for label in labels], dtype=np.uint8)
        return cls(labels=codes, origin_seed=origin_seed)

    def __len__(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ErrorFrame):
            return NotImplemented
        return (
            self.origin_seed == other.origin_seed
            and self.generation == other.generation
            and np.array_equal(self.labels, other.labels)
        )

    @property
    def x_bits(self) -> np.ndarray:
        return self.labels & 1

    @property
    def z_bits(self) -> np.ndarray:
        return (self.labels >> 1) & 1

    def to_labels(self) -> List[PauliLabel]:
        return [PauliLabel.from_code(c) for c in self.labels]

    def counts(self) -> np.ndarray:
        """Label counts in (I, X, Y, Z) order."""
        by_code = np.bincount(self.labels, minlength=4)
        return np.array([by_code[CODE_I], by_code[CODE_X], by_code[CODE_Y], by_code[CODE_Z]])

    def empirical_rates(self) -> PauliRates:
        if len(self) == 0:
            raise DomainError("empty frame has no empirical rates")
        return PauliRates.from_array(self.counts() / len(self))

    def next(self, labels: np.ndarray) -> "ErrorFrame":
        """Frame produced by one further processing stage."""
        return ErrorFrame(labels=labels, origin_seed=self.origin_seed, generation=self.generation + 1)


def depolarizing(bit_error: float) -> PauliRates:
    """Depolarizing channel with the given bit error rate p_x + p_y.

    Args:
        bit_error: Bit error rate in [0, 2/3]

    Returns:
        Rates with p_x = p_y = p_z = bit_error / 2
    """
    if not 0.0 <= bit_error <= 2.0 / 3.0:
        raise DomainError(f"depolarizing bit error must be in [0, 2/3], got {bit_error}")
    each = bit_error / 2.0
    return PauliRates(p_i=1.0 - 3.0 * each, p_x=each, p_y=each, p_z=each)


def sample_codes(rates: PauliRates, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. label codes from ``rates`` using ``rng``."""
    if n < 0:
        raise DomainError(f"frame length must be non-negative, got {n}")
    cdf = np.cumsum(rates.code_probabilities())
    out = np.empty(n, dtype=np.uint8)
    for start in range(0, n, _SAMPLE_CHUNK):
        stop = min(start + _SAMPLE_CHUNK, n)
        u = rng.random(stop - start)
        out[start:stop] = np.minimum(np.searchsorted(cdf, u, side="right"), 3)
    return out


def sample_frame(rates: PauliRates, n: int, seed: int) -> ErrorFrame:
    """Sample an error frame of ``n`` i.i.d. labels; deterministic in ``seed``."""
    codes = sample_codes(rates, n, make_rng(seed, "labels"))
    return ErrorFrame(labels=codes, origin_seed=seed)

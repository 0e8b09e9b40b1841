"""Split-vector families and split-tree parameters."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ModelViolation

PROB_ATOL = 1e-12


def _rational_log_ratios(p: Sequence[float], max_den: int = 1000, tol: float = 1e-9) -> bool:
    # -ln V lattice <=> all ln p_i are integer multiples of a common span
    logs = [-np.log(x) for x in p]
    base = logs[0]
    for lg in logs[1:]:
        r = lg / base
        frac = Fraction(r).limit_denominator(max_den)
        if abs(float(frac) - r) > tol:
            return False
    return True


@dataclass(frozen=True)
class SplitVectorModel:
    """Base class for a law of the split vector (V_1, ..., V_b).

    Subclasses provide ``sample(rng, size)`` returning a ``(size, b)`` array.
    Analytic moments are optional; ``moment(s)`` is E(V^s) for one component.
    """

    @property
    def b(self) -> int:
        raise NotImplementedError

    @property
    def lattice(self) -> bool:
        return False

    @property
    def name(self) -> str:
        return type(self).__name__

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample(rng, 1)[0]

    def moment(self, s: float) -> Optional[float]:
        """E(V^s), or None when no closed form is known."""
        return None

    def density(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Marginal density of one component on (0, 1), if it has one."""
        return None

    def analytic_mu_sigma2(self) -> Optional[tuple[float, float]]:
        return None

    def to_spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class BinarySearchTree(SplitVectorModel):
    """(U, 1 - U) with U uniform."""

    @property
    def b(self) -> int:
        return 2

    def sample(self, rng, size):
        u = rng.random(size)
        return np.column_stack([u, 1.0 - u])

    def moment(self, s):
        return 1.0 / (s + 1.0)

    def density(self):
        return lambda v: np.ones_like(np.asarray(v, dtype=float))

    def analytic_mu_sigma2(self):
        return 0.5, 0.25

    def to_spec(self):
        return "bst"


@dataclass(frozen=True)
class UniformSpacings(SplitVectorModel):
    """Spacings of m - 1 independent uniforms: the m-ary search tree vector.

    Each component is Beta(1, m - 1).
    """

    m: int = 3

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("UniformSpacings needs m >= 2")

    @property
    def b(self):
        return self.m

    @property
    def name(self):
        return f"UniformSpacings({self.m})"

    def sample(self, rng, size):
        u = np.sort(rng.random((size, self.m - 1)), axis=1)
        edges = np.concatenate([np.zeros((size, 1)), u, np.ones((size, 1))], axis=1)
        return np.diff(edges, axis=1)

    def moment(self, s):
        from scipy.special import gammaln

        m = self.m
        return float(np.exp(gammaln(1.0 + s) + gammaln(m) - gammaln(m + s)))

    def density(self):
        m = self.m
        return lambda v: (m - 1) * (1.0 - np.asarray(v, dtype=float)) ** (m - 2)

    def analytic_mu_sigma2(self):
        # mu = H_m - 1, sigma^2 = H_m^(2) - 1
        k = np.arange(1, self.m + 1, dtype=float)
        return float(np.sum(1.0 / k) - 1.0), float(np.sum(1.0 / k**2) - 1.0)

    def to_spec(self):
        return f"mary:{self.m}"


@dataclass(frozen=True)
class PermutedFixed(SplitVectorModel):
    """A uniformly random permutation of a fixed probability vector (tries)."""

    p: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        object.__setattr__(self, "p", p)
        if len(p) < 2:
            raise ValueError("PermutedFixed needs b >= 2")
        if any(x <= 0.0 or x >= 1.0 for x in p):
            raise ValueError("PermutedFixed entries must lie in (0, 1)")
        if abs(sum(p) - 1.0) > PROB_ATOL:
            raise ValueError(f"PermutedFixed entries sum to {sum(p)}, not 1")

    @property
    def b(self):
        return len(self.p)

    @property
    def lattice(self):
        return _rational_log_ratios(self.p)

    @property
    def name(self):
        return "PermutedFixed(" + ",".join(f"{x:g}" for x in self.p) + ")"

    def sample(self, rng, size):
        base = np.asarray(self.p)
        keys = rng.random((size, self.b))
        return base[np.argsort(keys, axis=1)]

    def moment(self, s):
        return float(np.mean(np.asarray(self.p) ** s))

    def analytic_mu_sigma2(self):
        p = np.asarray(self.p)
        lp = np.log(p)
        mu = float(-np.sum(p * lp))
        return mu, float(np.sum(p * lp**2) - mu**2)

    def to_spec(self):
        return "trie:" + ",".join(repr(x) for x in self.p)


@dataclass(frozen=True)
class Symmetric(SplitVectorModel):
    """V identically 1/b. Always lattice."""

    branch: int = 2

    def __post_init__(self):
        if self.branch < 2:
            raise ValueError("Symmetric needs b >= 2")

    @property
    def b(self):
        return self.branch

    @property
    def lattice(self):
        return True

    @property
    def name(self):
        return f"Symmetric({self.branch})"

    def sample(self, rng, size):
        return np.full((size, self.branch), 1.0 / self.branch)

    def moment(self, s):
        return float(self.branch ** (-s))

    def analytic_mu_sigma2(self):
        return float(np.log(self.branch)), 0.0

    def to_spec(self):
        return f"symmetric:{self.branch}"


@dataclass(frozen=True)
class Custom(SplitVectorModel):
    """Caller-supplied sampler.

    ``sampler(rng, size)`` must return a ``(size, branch)`` array of probability
    vectors with identically distributed components. A probe of a few hundred
    vectors is drawn at construction; any component equal to 1 is rejected.
    """

    branch: int = 2
    sampler: Callable[[np.random.Generator, int], np.ndarray] = field(default=None, compare=False)
    moments: Optional[Callable[[float], float]] = field(default=None, compare=False)
    marginal_density: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    is_lattice: bool = False
    label: str = "custom"

    def __post_init__(self):
        if self.sampler is None:
            raise ValueError("Custom model needs a sampler")
        probe = self.sample(np.random.default_rng(0), 256)
        if np.any(probe >= 1.0):
            raise ModelViolation("Custom model has P(V = 1) > 0")

    @property
    def b(self):
        return self.branch

    @property
    def lattice(self):
        return self.is_lattice

    @property
    def name(self):
        return self.label

    def sample(self, rng, size):
        v = np.asarray(self.sampler(rng, size), dtype=float)
        check_vectors(v, self.branch)
        return v

    def moment(self, s):
        return None if self.moments is None else float(self.moments(s))

    def density(self):
        return self.marginal_density

    def to_spec(self):
        return self.label


def check_vectors(v: np.ndarray, b: int) -> None:
    if v.ndim != 2 or v.shape[1] != b:
        raise ModelViolation(f"expected vectors of length {b}, got shape {v.shape}")
    if np.any(v < 0.0) or not np.all(np.isfinite(v)):
        raise ModelViolation("split vector has negative or non-finite entries")
    if np.any(np.abs(v.sum(axis=1) - 1.0) > PROB_ATOL):
        raise ModelViolation("split vector does not sum to 1")


def sample_split_vector(model: SplitVectorModel, rng: np.random.Generator) -> np.ndarray:
    v = model.sample(rng, 1)
    check_vectors(v, model.b)
    return v[0]


@dataclass(frozen=True)
class SplitParams:
    """(model, s, s0, s1) with 0 <= s0 <= s and 0 <= b*s1 <= s + 1 - s0."""

    model: SplitVectorModel
    s: int = 1
    s0: int = 1
    s1: int = 0

    def __post_init__(self):
        b = self.model.b
        if self.s < 1:
            raise ValueError("capacity s must be >= 1")
        if not 0 <= self.s0 <= self.s:
            raise ValueError(f"need 0 <= s0 <= s, got s0={self.s0}, s={self.s}")
        if not 0 <= b * self.s1 <= self.s + 1 - self.s0:
            raise ValueError(f"need 0 <= b*s1 <= s+1-s0, got b={b}, s1={self.s1}")

    @property
    def b(self) -> int:
        return self.model.b

    def as_dict(self) -> dict:
        return {"model": self.model.to_spec(), "b": self.b, "s": self.s, "s0": self.s0, "s1": self.s1}


def bst_params() -> SplitParams:
    return SplitParams(BinarySearchTree(), s=1, s0=1, s1=0)


def mary_params(m: int) -> SplitParams:
    """Standard m-ary search tree: b = m, s = s0 = m - 1, s1 = 0."""
    return SplitParams(UniformSpacings(m), s=m - 1, s0=m - 1, s1=0)


def trie_params(p: Sequence[float]) -> SplitParams:
    return SplitParams(PermutedFixed(tuple(p)), s=1, s0=0, s1=0)


def parse_model(spec: str) -> SplitParams:
    """Parse ``bst | mary:<m> | trie:<p1,p2,...> | symmetric:<b>`` into default params."""
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    kind = kind.lower()
    if kind == "bst" and not arg:
        return bst_params()
    if kind == "mary" and arg:
        return mary_params(int(arg))
    if kind == "trie" and arg:
        return trie_params([float(x) for x in arg.split(",")])
    if kind == "symmetric" and arg:
        return SplitParams(Symmetric(int(arg)), s=1, s0=0, s1=0)
    raise ValueError(f"unknown model spec {spec!r}")

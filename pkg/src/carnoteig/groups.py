"""Group algebra for the stratified groups used here.

Two families are supported: the Heisenberg group H^n, with coordinates
``(a_1..a_n, b_1..b_n, c)`` and product

    (a, b, c) o (a', b', c') = (a + a', b + b', c + c' + (a.b' - b.a') / 2),

and the abelian group R^d, a degenerate step-one case whose sub-Laplacian
is the ordinary Laplacian.  All functions accept points as arrays of shape
``(..., dim)`` and broadcast over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .errors import DomainError, StructuralError

HEISENBERG = "heisenberg"
ABELIAN = "abelian"


@dataclass(frozen=True)
class GroupSpec:
    """Identifies a stratified group.

    Attributes
    ----------
    kind : str
        ``"heisenberg"`` or ``"abelian"``.
    n : int
        Heisenberg index (H^n has topological dimension 2n+1) or the
        Euclidean dimension for the abelian case.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (HEISENBERG, ABELIAN):
            raise StructuralError(f"unknown group kind {self.kind!r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"group index must be a positive integer, got {self.n!r}")

    @classmethod
    def heisenberg(cls, n: int = 1) -> "GroupSpec":
        return cls(HEISENBERG, n)

    @classmethod
    def abelian(cls, d: int) -> "GroupSpec":
        return cls(ABELIAN, d)

    @property
    def is_heisenberg(self) -> bool:
        return self.kind == HEISENBERG

    @property
    def strata(self) -> tuple[int, ...]:
        if self.is_heisenberg:
            return (2 * self.n, 1)
        return (self.n,)

    @property
    def dim(self) -> int:
        """Topological dimension."""
        return sum(self.strata)

    @property
    def Q(self) -> int:
        """Homogeneous dimension, sum of i * n_i over the strata."""
        return sum(i * ni for i, ni in enumerate(self.strata, start=1))

    @property
    def horizontal_dim(self) -> int:
        return self.strata[0]

    @cached_property
    def degrees(self) -> np.ndarray:
        """Dilation degree of each coordinate (1 on the first stratum, 2 on the second)."""
        return np.concatenate(
            [np.full(ni, i, dtype=float) for i, ni in enumerate(self.strata, start=1)]
        )

    @property
    def critical_exponent(self) -> float:
        """2* = 2Q/(Q-2); infinite when Q <= 2."""
        if self.Q <= 2:
            return math.inf
        return 2.0 * self.Q / (self.Q - 2)

    def field_names(self) -> list[str]:
        if self.is_heisenberg:
            return (
                [f"X{i}" for i in range(1, self.n + 1)]
                + [f"Y{i}" for i in range(1, self.n + 1)]
                + ["Z", "dilation"]
            )
        return [f"X{i}" for i in range(1, self.n + 1)] + ["dilation"]

    def __str__(self):
        return f"{'H' if self.is_heisenberg else 'R'}^{self.n}"


def homogeneous_dimension(spec: GroupSpec) -> int:
    return spec.Q


def _check(spec: GroupSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] != spec.dim:
        raise StructuralError(
            f"point has trailing dimension {p.shape[-1] if p.ndim else 0}, "
            f"{spec} needs {spec.dim}"
        )
    return p


def _split(spec, p):
    n = spec.n
    return p[..., :n], p[..., n : 2 * n], p[..., 2 * n]


def multiply(spec: GroupSpec, p, q) -> np.ndarray:
    """Group product p o q."""
    p = _check(spec, p)
    q = _check(spec, q)
    out = p + q
    if spec.is_heisenberg:
        a, b, _ = _split(spec, p)
        a2, b2, _ = _split(spec, q)
        out[..., 2 * spec.n] += 0.5 * (
            np.sum(a * b2, axis=-1) - np.sum(b * a2, axis=-1)
        )
    return out


def inverse(spec: GroupSpec, p) -> np.ndarray:
    # both families have x^{-1} = -x in exponential coordinates
    return -_check(spec, p)


def identity(spec: GroupSpec) -> np.ndarray:
    return np.zeros(spec.dim)


def koranyi_norm(spec: GroupSpec, p) -> np.ndarray:
    """Homogeneous gauge: [(|a|^2+|b|^2)^2 + c^2]^(1/4) on H^n, Euclidean on R^d."""
    p = _check(spec, p)
    # evaluate on T_{1/m} p with m of the order of the gauge: no under/overflow
    if spec.is_heisenberg:
        t = 2 * spec.n
        m = np.maximum(np.max(np.abs(p[..., :t]), axis=-1), np.sqrt(np.abs(p[..., t])))
    else:
        m = np.max(np.abs(p), axis=-1)
    safe = np.where(m > 0, m, 1.0)
    x = p / safe[..., None]
    if spec.is_heisenberg:
        x[..., t] /= safe
    if spec.is_heisenberg:
        h2 = np.sum(x[..., :t] ** 2, axis=-1)
        r = (h2 * h2 + x[..., t] ** 2) ** 0.25
    else:
        r = np.sqrt(np.sum(x * x, axis=-1))
    return np.where(m > 0, m * r, 0.0)


def dilate(spec: GroupSpec, delta: float, p) -> np.ndarray:
    """Anisotropic dilation T_delta, stratum i scaled by delta**i."""
    if not delta > 0:
        raise DomainError(f"dilation factor must be positive, got {delta!r}")
    p = _check(spec, p)
    return p * delta ** spec.degrees


def vector_field_coeffs(spec: GroupSpec, field: str, p) -> np.ndarray:
    """Ambient coefficient vector of a vector field at ``p``.

    ``field`` is one of ``X1..Xn``, ``Y1..Yn``, ``Z`` (Heisenberg only) or
    ``dilation`` for the generator sum_i deg_i x_i d/dx_i of T_delta.
    On R^d the fields ``X1..Xd`` are the coordinate derivatives.
    """
    p = _check(spec, p)
    if field not in spec.field_names():
        raise DomainError(f"{field!r} is not a vector field of {spec}")
    out = np.zeros(p.shape)
    if field == "dilation":
        return p * spec.degrees
    if not spec.is_heisenberg:
        out[..., int(field[1:]) - 1] = 1.0
        return out
    n = spec.n
    if field == "Z":
        out[..., 2 * n] = 1.0
        return out
    i = int(field[1:]) - 1
    a, b, _ = _split(spec, p)
    if field[0] == "X":
        out[..., i] = 1.0
        out[..., 2 * n] = -0.5 * b[..., i]
    else:
        out[..., n + i] = 1.0
        out[..., 2 * n] = 0.5 * a[..., i]
    return out


def unit_ball_volume(spec: GroupSpec, samples: int = 1_000_000, seed: int = 20240607) -> float:
    """Lebesgue volume of the unit gauge ball, by seeded Monte Carlo."""
    return _unit_ball_volume(spec.kind, spec.n, samples, seed)


_BALL_CACHE: dict = {}


def _unit_ball_volume(kind, n, samples, seed):
    key = (kind, n, samples, seed)
    if key not in _BALL_CACHE:
        spec = GroupSpec(kind, n)
        rng = np.random.default_rng(seed)
        # the unit gauge ball sits inside [-1, 1]^dim for both families
        hits = 0
        chunk = 200_000
        done = 0
        while done < samples:
            m = min(chunk, samples - done)
            pts = rng.uniform(-1.0, 1.0, size=(m, spec.dim))
            hits += int(np.count_nonzero(koranyi_norm(spec, pts) < 1.0))
            done += m
        _BALL_CACHE[key] = 2.0 ** spec.dim * hits / samples
    return _BALL_CACHE[key]

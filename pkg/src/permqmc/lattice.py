"""Rank-1 lattice rules, shifts, dual membership, and rule file formats."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "is_prime",
    "LatticeRule",
    "WeightedCubature",
    "dual_membership",
    "character_average",
    "save_lattice",
    "load_lattice",
    "save_cubature",
    "load_cubature",
]

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all 64-bit integers."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    if n in small:
        return True
    if any(n % p == 0 for p in small):
        return False
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class LatticeRule:
    """Rank-1 lattice with prime modulus, generating vector, optional shift."""

    n: int
    z: tuple[int, ...]
    shift: tuple[float, ...] | None = None

    def __post_init__(self):
        if not is_prime(self.n):
            raise ValueError(f"modulus {self.n} is not prime")
        z = tuple(int(v) % self.n for v in self.z)
        object.__setattr__(self, "z", z)
        if self.shift is not None:
            sh = tuple(float(x) % 1.0 for x in self.shift)
            if len(sh) != len(z):
                raise ValueError("shift dimension does not match z")
            object.__setattr__(self, "shift", sh)

    @property
    def d(self) -> int:
        return len(self.z)

    def with_shift(self, shift: Sequence[float] | None) -> "LatticeRule":
        return LatticeRule(self.n, self.z, None if shift is None else tuple(shift))

    def points(self) -> np.ndarray:
        """All n nodes {j*z/n + shift}, j = 0..n-1, exact modular arithmetic."""
        j = np.arange(self.n, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.int64)
        pts = ((j[:, None] * z[None, :]) % self.n) / float(self.n)
        if self.shift is not None:
            pts = np.mod(pts + np.asarray(self.shift), 1.0)
        return pts

    def cubature(self) -> "WeightedCubature":
        return WeightedCubature(self.points(), np.ones(self.n))


def dual_membership(h: Sequence[int], rule: LatticeRule) -> bool:
    """True iff h . z = 0 (mod n); exact integer arithmetic."""
    if len(h) != rule.d:
        raise ValueError("dimension mismatch")
    acc = sum(int(hv) * int(zv) for hv, zv in zip(h, rule.z))
    return acc % rule.n == 0


def character_average(h: int, n: int) -> Fraction:
    """Average over j of the lattice character at frequency h: 1 if n | h, else 1/n."""
    if not is_prime(n):
        raise ValueError(f"{n} is not prime")
    return Fraction(1, 1) if h % n == 0 else Fraction(1, n)


class WeightedCubature:
    """Cubature Q(f) = (1/n) * sum_j w_j f(t_j); QMC rules have all w_j = 1."""

    def __init__(self, nodes, weights):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("node and weight counts differ")
        self.nodes = nodes
        self.weights = weights

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def raw_weights(self) -> np.ndarray:
        """Weights including the 1/n normalization: Q(f) = raw . f(nodes)."""
        return self.weights / self.n

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Apply the rule to a vectorized integrand f(points) -> values."""
        vals = np.asarray(f(self.nodes), dtype=float).reshape(-1)
        if vals.shape[0] != self.n:
            raise ValueError("integrand returned wrong number of values")
        return float(self.raw_weights @ vals)

    def __repr__(self):
        return f"WeightedCubature(n={self.n}, d={self.d})"


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def save_lattice(rule: LatticeRule, path) -> None:
    """Plain-text format: "n d" / z integers / optional shift decimals."""
    lines = [f"{rule.n} {rule.d}", " ".join(str(v) for v in rule.z)]
    if rule.shift is not None:
        lines.append(" ".join(f"{x:.17g}" for x in rule.shift))
    Path(path).write_text("\n".join(lines) + "\n")


def load_lattice(path) -> LatticeRule:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"malformed lattice file {path}")
    n, d = (int(v) for v in lines[0].split())
    z = tuple(int(v) for v in lines[1].split())
    if len(z) != d:
        raise ValueError(f"lattice file {path}: expected {d} components, got {len(z)}")
    shift = None
    if len(lines) > 2:
        shift = tuple(float(v) for v in lines[2].split())
        if len(shift) != d:
            raise ValueError(f"lattice file {path}: bad shift length")
    return LatticeRule(n, z, shift)


def save_cubature(rule: WeightedCubature, path) -> None:
    """Node/weight text format: header "N d", then rows "w t_1 ... t_d"."""
    lines = [f"{rule.n} {rule.d}"]
    for w, t in zip(rule.weights, rule.nodes):
        lines.append(" ".join([f"{w:.17g}"] + [f"{x:.17g}" for x in t]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cubature(path) -> WeightedCubature:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, d = (int(v) for v in lines[0].split())
    if len(lines) != n + 1:
        raise ValueError(f"cubature file {path}: expected {n} rows")
    rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if rows.shape[1] != d + 1:
        raise ValueError(f"cubature file {path}: expected {d + 1} columns")
    return WeightedCubature(rows[:, 1:], rows[:, 0])

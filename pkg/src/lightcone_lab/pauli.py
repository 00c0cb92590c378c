"""Exact Pauli-string algebra on a finite signed-site chain.

Sites are signed integers -L..L (N = 2L+1 sites); dense realizations map
site j to the kron factor at position j+L (leftmost factor = site -L).
Phases are tracked exactly in the fourth-roots-of-unity group {1, i, -1, -i},
so products and commutators of strings never touch floating point.

Text format for strings: ``"+i X-1 Y0 Z1"`` -- a phase token (+, -, +i, -i)
followed by axis+site tokens.  A bare phase token is a (phased) identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "PauliString",
    "SpinOperator",
    "SizeCapError",
    "DENSE_SITE_CAP",
    "pauli_mul",
    "pauli_commutator",
    "strings_commute",
    "to_dense",
    "string_dense",
    "exp_zz",
    "conjugate_by_zz",
    "parse_pauli",
    "format_pauli",
]

DENSE_SITE_CAP = 14
COEFF_CUTOFF = 1e-15

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# sigma^a sigma^b = delta_ab 1 + i eps_abc sigma^c, encoded as
# (resulting axis or None for identity, phase exponent k with phase = i^k)
_AXIS_MUL = {
    ("X", "X"): (None, 0),
    ("Y", "Y"): (None, 0),
    ("Z", "Z"): (None, 0),
    ("X", "Y"): ("Z", 1),
    ("Y", "X"): ("Z", 3),
    ("Y", "Z"): ("X", 1),
    ("Z", "Y"): ("X", 3),
    ("Z", "X"): ("Y", 1),
    ("X", "Z"): ("Y", 3),
}

_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)
_PHASE_TOKENS = {"+": 0, "-": 2, "+i": 1, "-i": 3, "i": 1}


class SizeCapError(ValueError):
    """Dense realization refused: chain exceeds the configured site cap."""


@dataclass(frozen=True)
class PauliString:
    """A phased tensor product of single-site Pauli operators.

    ``axes`` maps site index -> axis letter; absent sites act as identity.
    ``phase_k`` is the exponent k of the phase i**k.
    """

    axes: tuple[tuple[int, str], ...]
    phase_k: int = 0

    @staticmethod
    def from_axes(axes: Mapping[int, str] | Iterable[tuple[int, str]],
                  phase_k: int = 0) -> "PauliString":
        items = dict(axes)
        for site, ax in items.items():
            if ax not in ("X", "Y", "Z"):
                raise ValueError(f"bad axis {ax!r} at site {site}")
        return PauliString(tuple(sorted(items.items())), phase_k % 4)

    @property
    def axes_map(self) -> dict[int, str]:
        return dict(self.axes)

    @property
    def phase(self) -> complex:
        return _PHASES[self.phase_k % 4]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(site for site, _ in self.axes)

    def with_phase_k(self, phase_k: int) -> "PauliString":
        return PauliString(self.axes, phase_k % 4)

    def weight(self) -> int:
        return len(self.axes)

    def __str__(self) -> str:
        return format_pauli(self)


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Product a*b with the exact accumulated phase.

    Sitewise rule: sigma^a sigma^b = delta_ab 1 + i eps_abc sigma^c.
    Total function; supports need not overlap.
    """
    amap, bmap = a.axes_map, b.axes_map
    out: dict[int, str] = {}
    k = (a.phase_k + b.phase_k) % 4
    for site in amap.keys() | bmap.keys():
        ax, bx = amap.get(site), bmap.get(site)
        if ax is None:
            out[site] = bx  # type: ignore[assignment]
        elif bx is None:
            out[site] = ax
        else:
            cx, dk = _AXIS_MUL[(ax, bx)]
            k = (k + dk) % 4
            if cx is not None:
                out[site] = cx
    return PauliString.from_axes(out, k)


def strings_commute(a: PauliString, b: PauliString) -> bool:
    """True iff the number of sites where both act with distinct axes is even."""
    amap, bmap = a.axes_map, b.axes_map
    clashes = sum(1 for s in amap.keys() & bmap.keys() if amap[s] != bmap[s])
    return clashes % 2 == 0


@dataclass(frozen=True)
class SpinOperator:
    """Canonical linear combination of Pauli strings on a 2L+1 site chain.

    Terms are stored as (complex coefficient, phase-free PauliString) with
    no two terms sharing an axes map; string phases are folded into the
    coefficients on construction.  Immutable and safe to share.
    """

    terms: tuple[tuple[complex, PauliString], ...]
    n_sites: int

    @staticmethod
    def from_terms(terms: Iterable[tuple[complex, PauliString]],
                   n_sites: int) -> "SpinOperator":
        if n_sites < 1 or n_sites % 2 == 0:
            raise ValueError(f"n_sites must be odd and positive, got {n_sites}")
        half = n_sites // 2
        merged: dict[tuple[tuple[int, str], ...], complex] = {}
        for coeff, string in terms:
            for site in string.support:
                if abs(site) > half:
                    raise ValueError(
                        f"site {site} outside chain [-{half},{half}]")
            key = string.axes
            merged[key] = merged.get(key, 0j) + complex(coeff) * string.phase
        kept = tuple(
            (c, PauliString(axes, 0))
            for axes, c in sorted(merged.items())
            if abs(c) > COEFF_CUTOFF
        )
        return SpinOperator(kept, n_sites)

    @staticmethod
    def zero(n_sites: int) -> "SpinOperator":
        return SpinOperator.from_terms([], n_sites)

    @staticmethod
    def identity(n_sites: int) -> "SpinOperator":
        return SpinOperator.from_terms(
            [(1.0, PauliString.from_axes({}))], n_sites)

    @property
    def half_length(self) -> int:
        return self.n_sites // 2

    @property
    def support(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for _, string in self.terms:
            out |= string.support
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, string: PauliString) -> complex:
        """Coefficient of ``string``, accounting for its phase."""
        for coeff, term in self.terms:
            if term.axes == string.axes:
                return coeff / string.phase
        return 0j

    def map_coefficients(self, fn) -> "SpinOperator":
        return SpinOperator.from_terms(
            [(fn(c), s) for c, s in self.terms], self.n_sites)

    def adjoint(self) -> "SpinOperator":
        return self.map_coefficients(np.conj)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c, _ in self.terms)

    def one_norm(self) -> float:
        """Sum of |coefficients|; an upper bound on the spectral norm."""
        return float(sum(abs(c) for c, _ in self.terms))

    def __add__(self, other: "SpinOperator") -> "SpinOperator":
        if other.n_sites != self.n_sites:
            raise ValueError("chain length mismatch")
        return SpinOperator.from_terms(self.terms + other.terms, self.n_sites)

    def __sub__(self, other: "SpinOperator") -> "SpinOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "SpinOperator":
        return self.map_coefficients(lambda c: scalar * c)

    def __matmul__(self, other: "SpinOperator") -> "SpinOperator":
        if other.n_sites != self.n_sites:
            raise ValueError("chain length mismatch")
        prods = []
        for ca, sa in self.terms:
            for cb, sb in other.terms:
                prods.append((ca * cb, pauli_mul(sa, sb)))
        return SpinOperator.from_terms(prods, self.n_sites)

    def commutator(self, other: "SpinOperator") -> "SpinOperator":
        return self @ other - other @ self

    def dense(self) -> np.ndarray:
        return to_dense(self)


def pauli_commutator(a: PauliString, b: PauliString,
                     n_sites: int | None = None) -> SpinOperator:
    """[a, b] = ab - ba as a SpinOperator with zero or one term.

    Returns the empty operator iff the strings commute; otherwise ab = -ba
    and the result is 2*ab.
    """
    if n_sites is None:
        half = max((abs(s) for s in a.support | b.support), default=0)
        n_sites = 2 * half + 1
    if strings_commute(a, b):
        return SpinOperator.zero(n_sites)
    prod = pauli_mul(a, b)
    return SpinOperator.from_terms([(2.0 * prod.phase, prod.with_phase_k(0))],
                                   n_sites)


def _string_dense(string: PauliString, n_sites: int) -> np.ndarray:
    """Dense matrix of a string: identity padding grouped for speed."""
    half = n_sites // 2
    dim = 2 ** n_sites
    if not string.axes:
        return string.phase * np.eye(dim, dtype=complex)
    amap = string.axes_map
    lo = min(amap) + half
    hi = max(amap) + half
    block = reduce(
        np.kron,
        [PAULI_MATS[amap.get(p - half, "I")] for p in range(lo, hi + 1)],
    )
    left, right = 2 ** lo, 2 ** (n_sites - 1 - hi)
    out = block
    if left > 1:
        out = np.kron(np.eye(left, dtype=complex), out)
    if right > 1:
        out = np.kron(out, np.eye(right, dtype=complex))
    return string.phase * out


def to_dense(op: SpinOperator, cap: int = DENSE_SITE_CAP) -> np.ndarray:
    """Kronecker realization of a SpinOperator (exact, linear in terms)."""
    if op.n_sites > cap:
        raise SizeCapError(
            f"dense realization of {op.n_sites} sites exceeds cap {cap}")
    dim = 2 ** op.n_sites
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, string in op.terms:
        out += coeff * _string_dense(string, op.n_sites)
    return out


def string_dense(string: PauliString, n_sites: int,
                 cap: int = DENSE_SITE_CAP) -> np.ndarray:
    """Dense matrix of a single PauliString on a chain of n_sites."""
    if n_sites > cap:
        raise SizeCapError(
            f"dense realization of {n_sites} sites exceeds cap {cap}")
    return _string_dense(string, n_sites)


def exp_zz(a: float, n_sites: int = 3) -> tuple[np.ndarray, SpinOperator]:
    """exp(i a Z_0 Z_1) in closed form: cos(a) 1 + i sin(a) Z_0 Z_1.

    Returns the 4x4 block on sites {0,1} (site 0 = left kron factor) and the
    SpinOperator form on a chain of ``n_sites``.  No series summation.
    """
    zz = PauliString.from_axes({0: "Z", 1: "Z"})
    op = SpinOperator.from_terms(
        [(np.cos(a), PauliString.from_axes({})), (1j * np.sin(a), zz)],
        n_sites,
    )
    zz4 = np.kron(PAULI_MATS["Z"], PAULI_MATS["Z"])
    block = np.cos(a) * np.eye(4, dtype=complex) + 1j * np.sin(a) * zz4
    return block, op


def conjugate_by_zz(op: SpinOperator, s: float, delta: float,
                    bond: tuple[int, int] = (0, 1)) -> SpinOperator:
    """Closed-form e^{is*delta Z_p Z_{p+1}} op e^{-is*delta Z_p Z_{p+1}}.

    Strings commuting with the ZZ generator pass through unchanged; an
    anticommuting string P maps to cos(2 s delta) P + i sin(2 s delta) QP
    with Q = Z_p Z_{p+1}.  This covers every Pauli string exactly, in
    particular the four boundary XX/YY bonds, and is pi/delta-periodic in s.
    """
    q = PauliString.from_axes({bond[0]: "Z", bond[1]: "Z"})
    angle = 2.0 * s * delta
    c, sn = np.cos(angle), np.sin(angle)
    out: list[tuple[complex, PauliString]] = []
    for coeff, string in op.terms:
        if strings_commute(q, string):
            out.append((coeff, string))
        else:
            rot = pauli_mul(q, string)
            out.append((coeff * c, string))
            out.append((coeff * 1j * sn * rot.phase, rot.with_phase_k(0)))
    return SpinOperator.from_terms(out, op.n_sites)


def parse_pauli(text: str) -> PauliString:
    """Parse the site-labelled text format, e.g. ``"+i X-1 Y0 Z1"``."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty Pauli string text")
    if tokens[0] in _PHASE_TOKENS:
        k = _PHASE_TOKENS[tokens[0]]
        body = tokens[1:]
    else:
        k = 0
        body = tokens
    axes: dict[int, str] = {}
    for tok in body:
        if tok == "I":
            continue
        ax = tok[0].upper()
        if ax not in ("X", "Y", "Z") or len(tok) < 2:
            raise ValueError(f"bad Pauli token {tok!r} in {text!r}")
        site = int(tok[1:])
        if site in axes:
            raise ValueError(f"duplicate site {site} in {text!r}")
        axes[site] = ax
    return PauliString.from_axes(axes, k)


def format_pauli(string: PauliString) -> str:
    """Inverse of :func:`parse_pauli` (canonical site order)."""
    phase = ("+", "+i", "-", "-i")[string.phase_k % 4]
    if not string.axes:
        return phase
    body = " ".join(f"{ax}{site}" for site, ax in string.axes)
    return f"{phase} {body}"

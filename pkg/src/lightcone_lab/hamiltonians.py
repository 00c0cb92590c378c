"""Builders for the disordered XY chain with sparse ZZ bonds.

Everything lives on signed sites -L..L.  The full chain Hamiltonian is

    H = sum_j J (X_j X_{j+1} + Y_j Y_{j+1}) + sum_j w_j Z_j
        + Delta * Z_p Z_{p+1}   for each ZZ bond p,

the reference part E drops the boundary bonds (p-1,p) and (p+1,p+2) around
each ZZ bond, and the dropped bonds reappear as the drive pair (C1, C2)
with waveforms cos(2 Delta t) and sin(2 Delta t).

Spin-to-fermion convention used by the one-body builder: occupied means
spin up (Z eigenvalue +1), X X + Y Y maps to a hopping amplitude 2J and
Z_j to 2 n_j - 1, so the one-body matrix carries hopping 2J and fields
2 w_j with a constant energy shift -sum_j w_j on the spin side.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString, SpinOperator

__all__ = [
    "ChainParams",
    "DisorderRealization",
    "Waveform",
    "TimeDependentHamiltonian",
    "build_h_omega",
    "build_e_split",
    "build_commuting_blocks",
    "build_c1_c2",
    "build_g",
    "sample_disorder",
    "realization_seed",
    "one_body_hamiltonian",
    "one_body_field_shift",
    "one_particle_sector_indices",
]


@dataclass(frozen=True)
class ChainParams:
    """Couplings and geometry of one chain: sites -L..L, N = 2L+1."""

    L: int
    J: float = 1.0
    delta: float = 0.0
    omega: float = 0.0
    zz_bonds: tuple[int, ...] = (0,)

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.J <= 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.delta < 0 or self.omega < 0:
            raise ValueError("delta and omega must be nonnegative")
        bonds = tuple(sorted(self.zz_bonds))
        object.__setattr__(self, "zz_bonds", bonds)
        for p in bonds:
            if not (-self.L <= p <= self.L - 1):
                raise ValueError(f"ZZ bond ({p},{p + 1}) outside the chain")
        for p, q in zip(bonds, bonds[1:]):
            if q - p - 1 < 4:
                raise ValueError(
                    f"ZZ bonds at {p} and {q} closer than 4 sites")

    @property
    def n_sites(self) -> int:
        return 2 * self.L + 1

    @property
    def sites(self) -> range:
        return range(-self.L, self.L + 1)


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of the random field, reproducible from its seed."""

    omega: np.ndarray
    seed: int
    distribution: str = "uniform"

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))

    def field_at(self, params: ChainParams, site: int) -> float:
        return float(self.omega[site + params.L])

    def to_csv(self, params: ChainParams) -> str:
        buf = io.StringIO()
        buf.write("site,omega\n")
        for j in params.sites:
            buf.write(f"{j},{self.field_at(params, j):.17g}\n")
        return buf.getvalue()


def realization_seed(base_seed: int, realization: int) -> int:
    """Stable per-realization seed, independent of execution order."""
    ss = np.random.SeedSequence([int(base_seed), int(realization)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(omega: float, seed: int, n_sites: int) -> DisorderRealization:
    """Uniform fields on [-omega, omega], from a counter-based generator."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    values = rng.uniform(-omega, omega, size=n_sites) if omega > 0 \
        else np.zeros(n_sites)
    return DisorderRealization(values, int(seed))


@dataclass(frozen=True)
class Waveform:
    """Scalar drive waveform: const, cos(a t) or sin(a t)."""

    kind: str
    a: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("const", "cos", "sin"):
            raise ValueError(f"unknown waveform kind {self.kind!r}")
        if self.kind != "const" and self.a <= 0:
            raise ValueError("oscillating waveform needs a positive frequency")

    def value(self, t: float) -> float:
        if self.kind == "const":
            return 1.0
        if self.kind == "cos":
            return float(np.cos(self.a * t))
        return float(np.sin(self.a * t))

    def primitive_abs_max(self) -> float:
        """sup_x |Lambda(x)| for the primitive Lambda of the waveform."""
        return 1.0  # |sin| and |-cos| are both bounded by 1


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """Static part plus waveform-modulated drive operators.

    Every part must be Hermitian so the evaluation at any time is Hermitian.
    """

    static_part: SpinOperator
    drives: tuple[tuple[Waveform, SpinOperator], ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        if not self.static_part.is_hermitian():
            raise ValueError("static part is not Hermitian")
        for wf, op in self.drives:
            if op.n_sites != self.static_part.n_sites:
                raise ValueError("drive chain length mismatch")
            if not op.is_hermitian():
                raise ValueError("drive operator is not Hermitian")

    @property
    def n_sites(self) -> int:
        return self.static_part.n_sites

    def is_static(self) -> bool:
        return all(wf.kind == "const" for wf, _ in self.drives)

    def at(self, t: float) -> SpinOperator:
        out = self.static_part
        for wf, op in self.drives:
            out = out + wf.value(t) * op
        return out

    def max_frequency(self) -> float:
        return max((wf.a for wf, _ in self.drives if wf.kind != "const"),
                   default=0.0)

    def common_period(self) -> float | None:
        """Exact common period of the drives, if one exists."""
        freqs = {wf.a for wf, _ in self.drives if wf.kind != "const"}
        if not freqs:
            return None
        a = freqs.pop()
        if any(abs(b - a) > 1e-12 * max(a, b) for b in freqs):
            return None
        return 2.0 * np.pi / a

    def dense_evaluator(self):
        """Callable t -> dense Hermitian matrix, with parts pre-realized."""
        static = self.static_part.dense()
        mats = [(wf, op.dense()) for wf, op in self.drives]

        def h_of_t(t: float) -> np.ndarray:
            out = static
            for wf, mat in mats:
                out = out + wf.value(t) * mat
            return out

        return h_of_t


def _xy_bond(j: int, J: float) -> list[tuple[complex, PauliString]]:
    return [
        (J, PauliString.from_axes({j: "X", j + 1: "X"})),
        (J, PauliString.from_axes({j: "Y", j + 1: "Y"})),
    ]


def _fields(sites, disorder: DisorderRealization, L: int):
    return [
        (disorder.omega[j + L], PauliString.from_axes({j: "Z"}))
        for j in sites
    ]


def build_h_omega(params: ChainParams,
                  disorder: DisorderRealization) -> SpinOperator:
    """Full chain Hamiltonian: XY hopping + random field + ZZ bonds."""
    if len(disorder.omega) != params.n_sites:
        raise ValueError(
            f"disorder has {len(disorder.omega)} fields, chain needs "
            f"{params.n_sites}")
    terms: list[tuple[complex, PauliString]] = []
    for j in range(-params.L, params.L):
        terms += _xy_bond(j, params.J)
    terms += _fields(params.sites, disorder, params.L)
    for p in params.zz_bonds:
        terms.append(
            (params.delta, PauliString.from_axes({p: "Z", p + 1: "Z"})))
    return SpinOperator.from_terms(terms, params.n_sites)


def build_commuting_blocks(params: ChainParams,
                           disorder: DisorderRealization
                           ) -> tuple[SpinOperator, list[SpinOperator]]:
    """Reference Hamiltonian E and its commuting blocks.

    E is the full Hamiltonian with the ZZ terms and the boundary XY bonds
    (p-1,p), (p+1,p+2) around each ZZ bond removed.  The blocks are the ZZ
    bond dimers (XY bond + its two fields) and the disconnected chain
    segments in between; their supports are pairwise disjoint.
    """
    if len(disorder.omega) != params.n_sites:
        raise ValueError("disorder length mismatch")
    L = params.L
    dimers = []
    for p in params.zz_bonds:
        dimers.append(SpinOperator.from_terms(
            _xy_bond(p, params.J) + _fields((p, p + 1), disorder, L),
            params.n_sites))
    # segments: maximal site ranges outside every dimer neighbourhood
    segments: list[SpinOperator] = []
    starts = [-L] + [p + 2 for p in params.zz_bonds]
    ends = [p - 1 for p in params.zz_bonds] + [L]
    for lo, hi in zip(starts, ends):
        if lo > hi:
            continue
        terms: list[tuple[complex, PauliString]] = []
        for j in range(lo, hi):
            terms += _xy_bond(j, params.J)
        terms += _fields(range(lo, hi + 1), disorder, L)
        segments.append(SpinOperator.from_terms(terms, params.n_sites))
    blocks = dimers + segments
    total = SpinOperator.zero(params.n_sites)
    for b in blocks:
        total = total + b
    return total, blocks


def build_e_split(params: ChainParams, disorder: DisorderRealization
                  ) -> tuple[SpinOperator, SpinOperator, SpinOperator,
                             SpinOperator]:
    """(E, E1, E2, E3) for the single ZZ bond at {0,1}.

    E1 is the bond dimer, E2 the left segment [-L,-1], E3 the right segment
    [2,L]; E = E1 + E2 + E3 exactly at the term level.
    """
    if params.zz_bonds != (0,):
        raise ValueError(
            "build_e_split handles the single bond at {0,1}; use "
            "build_commuting_blocks for sparse bond sets")
    total, blocks = build_commuting_blocks(params, disorder)
    e1, e2, e3 = blocks[0], blocks[1], blocks[2]
    return total, e1, e2, e3


def build_c1_c2(params: ChainParams, bond: int = 0
                ) -> tuple[SpinOperator, SpinOperator]:
    """Drive operators for one ZZ bond at (p, p+1), p = ``bond``.

    C1 collects the four boundary XX/YY terms, C2 the four 3-local chiral
    terms produced by conjugating them with the ZZ rotation.  Both have
    spectral norm 4J.
    """
    if bond not in params.zz_bonds:
        raise ValueError(f"no ZZ bond at ({bond},{bond + 1})")
    J, n = params.J, params.n_sites
    p = bond
    c1 = SpinOperator.from_terms(
        _xy_bond(p - 1, J) + _xy_bond(p + 1, J), n)
    c2 = SpinOperator.from_terms([
        (J, PauliString.from_axes({p - 1: "Y", p: "X", p + 1: "Z"})),
        (-J, PauliString.from_axes({p - 1: "X", p: "Y", p + 1: "Z"})),
        (J, PauliString.from_axes({p: "Z", p + 1: "X", p + 2: "Y"})),
        (-J, PauliString.from_axes({p: "Z", p + 1: "Y", p + 2: "X"})),
    ], n)
    return c1, c2


def build_g(params: ChainParams,
            disorder: DisorderRealization) -> TimeDependentHamiltonian:
    """Interaction-picture generator G(t) = E + cos(2dt) C1 + sin(2dt) C2.

    Requires delta > 0 (the drive frequency is 2 delta).  With several
    sparse bonds the per-bond drive pairs share the common waveforms.
    """
    if params.delta <= 0:
        raise ValueError("build_g needs delta > 0")
    e_total, _ = build_commuting_blocks(params, disorder)
    c1_total = SpinOperator.zero(params.n_sites)
    c2_total = SpinOperator.zero(params.n_sites)
    for p in params.zz_bonds:
        c1, c2 = build_c1_c2(params, bond=p)
        c1_total = c1_total + c1
        c2_total = c2_total + c2
    a = 2.0 * params.delta
    return TimeDependentHamiltonian(
        e_total,
        ((Waveform("cos", a), c1_total), (Waveform("sin", a), c2_total)),
        label=f"G(L={params.L},J={params.J},delta={params.delta})",
    )


def one_body_hamiltonian(params: ChainParams,
                         disorder: DisorderRealization) -> np.ndarray:
    """N x N real symmetric one-body matrix of the delta = 0 chain.

    Tridiagonal with hopping 2J and diagonal 2 w_j; the spin spectrum in
    the one-particle sector is this matrix's spectrum shifted by
    ``one_body_field_shift``.
    """
    if params.delta != 0.0:
        raise ValueError("one-body mapping is the delta = 0 path only")
    if len(disorder.omega) != params.n_sites:
        raise ValueError("disorder length mismatch")
    n = params.n_sites
    h1 = np.zeros((n, n))
    h1[np.arange(n), np.arange(n)] = 2.0 * disorder.omega
    off = 2.0 * params.J
    idx = np.arange(n - 1)
    h1[idx, idx + 1] = off
    h1[idx + 1, idx] = off
    return h1


def one_body_field_shift(disorder: DisorderRealization) -> float:
    """Constant offset between the one-body and spin-sector spectra."""
    return -float(np.sum(disorder.omega))


def one_particle_sector_indices(n_sites: int) -> np.ndarray:
    """Dense-basis indices of the one-particle (single spin-up) states.

    Entry k is the basis index with only site -L+k up; occupied means spin
    up, which is bit 0 in the kron ordering (site -L = most significant).
    """
    full = (1 << n_sites) - 1
    return np.array(
        [full ^ (1 << (n_sites - 1 - k)) for k in range(n_sites)],
        dtype=np.int64)

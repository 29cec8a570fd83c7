"""Photon/spin-wave two-qubit states and collective excitation operators.

The entangled resource produced by a write pulse is modeled two ways:

* as an abstract two-qubit density matrix on {photon helicity} x {spin-wave
  mode}, with a white-noise channel and concurrence for quantifying it, and
* as explicit collective raising/lowering operators on a truncated N-atom
  Hilbert space, used to check the bosonic character (vacuum norms and
  commutators) of the stored excitation at finite atom number.

Atom-level bases are truncated per atom to the sublevels an operator can
touch, plus one aggregate "other" level that carries the remaining ground
population, so the initial unpolarized mixture keeps unit trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .angular import BranchingTable, HalfInt

__all__ = [
    "STATE_BASIS",
    "TwoQubitState",
    "WaveVectors",
    "EnsembleModel",
    "ideal_state",
    "add_white_noise",
    "concurrence",
    "phase_match",
    "build_collective_operator",
    "vacuum_populations",
    "vacuum_pair_expectation",
    "normalized_mode_operator",
    "mode_vacuum_overlap",
    "excited_commutator_deviation",
]

STATE_BASIS = ("r|S-", "r|S+", "l|S-", "l|S+")

VALIDATION_TOL = 1e-12

# aggregate per-atom level holding all ground sublevels an operator ignores
OTHER_LEVEL = ("other", 0)

_MAX_DIM = 40_000_000


@dataclass(eq=False)
class TwoQubitState:
    """Density matrix on the photon-helicity x spin-wave-mode qubit pair."""

    rho: np.ndarray
    basis: tuple = STATE_BASIS

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (4, 4):
            raise ValueError(f"rho must be 4x4, got {self.rho.shape}")

    def validate(self, tol: float = VALIDATION_TOL) -> None:
        """Raise if rho is not Hermitian, trace-one and PSD within tol."""
        if np.max(np.abs(self.rho - self.rho.conj().T)) > tol:
            raise ValueError("rho is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > tol or abs(np.trace(self.rho).imag) > tol:
            raise ValueError(f"rho has trace {np.trace(self.rho)}, expected 1")
        lowest = np.linalg.eigvalsh(self.rho)[0]
        if lowest < -tol:
            raise ValueError(f"rho has negative eigenvalue {lowest}")

    def __eq__(self, other):
        return (
            isinstance(other, TwoQubitState)
            and self.basis == other.basis
            and np.array_equal(self.rho, other.rho)
        )


def ideal_state(eta: float) -> TwoQubitState:
    """Pure entangled state cos(eta)|r, S-> + sin(eta)|l, S+>."""
    if not 0.0 <= eta <= math.pi / 2:
        raise ValueError(f"eta must lie in [0, pi/2], got {eta}")
    psi = np.array([math.cos(eta), 0.0, 0.0, math.sin(eta)], dtype=complex)
    rho = np.outer(psi, psi.conj())
    rho /= np.trace(rho).real
    return TwoQubitState(rho)


def add_white_noise(state: TwoQubitState, visibility: float) -> TwoQubitState:
    """Mix the state with the maximally mixed one: V*rho + (1-V)*I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    rho = visibility * state.rho + (1.0 - visibility) * np.eye(4) / 4.0
    return TwoQubitState(rho, state.basis)


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    sy = np.array([[0, -1j], [1j, 0]])
    flip = np.kron(sy, sy)
    rho = state.rho
    rho_tilde = flip @ rho.conj() @ flip
    lams = np.linalg.eigvals(rho @ rho_tilde)
    lams = np.sqrt(np.clip(lams.real, 0.0, None))
    lams.sort()
    return float(max(0.0, lams[-1] - lams[-2] - lams[-3] - lams[-4]))


@dataclass(eq=False)
class WaveVectors:
    """Wave vectors of the write, read and detected signal modes (rad/m)."""

    write: np.ndarray
    read: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        for name in ("write", "read", "signal"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
            setattr(self, name, v)


def phase_match(k: WaveVectors) -> np.ndarray:
    """Wave vector of the retrieved idler mode, k_w + k_r - k_s."""
    return k.write + k.read - k.signal


@dataclass(eq=False)
class EnsembleModel:
    """A cold cloud of N identical atoms with fixed positions.

    `delta_k` is the wave-vector mismatch imprinted on the stored spin wave
    (write minus signal); positions are in the same length units as 1/|k|.
    """

    n_atoms: int
    f_a: HalfInt
    f_b: HalfInt
    positions: np.ndarray
    delta_k: np.ndarray

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        self.f_a = HalfInt.of(self.f_a)
        self.f_b = HalfInt.of(self.f_b)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.shape != (self.n_atoms, 3):
            raise ValueError(
                f"positions must have shape ({self.n_atoms}, 3), got {self.positions.shape}"
            )
        self.delta_k = np.asarray(self.delta_k, dtype=float)
        if self.delta_k.shape != (3,):
            raise ValueError("delta_k must be a 3-vector")

    @classmethod
    def with_random_positions(
        cls, n_atoms, f_a, f_b, delta_k=(1.0, 0.5, 0.0), seed=0, extent=10.0
    ) -> "EnsembleModel":
        rng = np.random.default_rng(seed)
        pos = rng.uniform(-extent, extent, size=(n_atoms, 3))
        return cls(n_atoms, HalfInt.of(f_a), HalfInt.of(f_b), pos, np.asarray(delta_k, float))

    def ground_multiplicity(self) -> int:
        return self.f_a.twice + 1

    def phases(self) -> np.ndarray:
        """exp(-i delta_k . r_mu) for every atom."""
        return np.exp(-1j * self.positions @ self.delta_k)


def _check_sublevels(model: EnsembleModel, alpha: int, m: HalfInt) -> tuple:
    if alpha not in (-1, +1):
        raise ValueError(f"alpha must be -1 or +1, got {alpha}")
    tm = HalfInt.of(m).twice
    if abs(tm) > model.f_a.twice:
        raise ValueError(f"m={HalfInt(tm)} outside the f_a={model.f_a} manifold")
    tb = tm + 2 + 2 * alpha
    if abs(tb) > model.f_b.twice:
        raise ValueError(
            f"final projection {HalfInt(tb)} outside the f_b={model.f_b} manifold"
        )
    return ("a", tm), ("b", tb)


def single_operator_basis(model: EnsembleModel, alpha: int, m) -> tuple:
    """Minimal per-atom basis for one (alpha, m) operator: a, b, other."""
    a_lvl, b_lvl = _check_sublevels(model, alpha, HalfInt.of(m))
    return (a_lvl, b_lvl, OTHER_LEVEL)


def union_basis(model: EnsembleModel, pairs) -> tuple:
    """Per-atom basis covering several (alpha, m) operators at once."""
    a_levels, b_levels = set(), set()
    for alpha, m in pairs:
        a_lvl, b_lvl = _check_sublevels(model, alpha, HalfInt.of(m))
        a_levels.add(a_lvl)
        b_levels.add(b_lvl)
    ordered = sorted(a_levels, key=lambda lv: lv[1]) + sorted(b_levels, key=lambda lv: lv[1])
    return tuple(ordered) + (OTHER_LEVEL,)


def _guard_dimension(dim_per_atom: int, n_atoms: int) -> int:
    total = dim_per_atom**n_atoms
    if total > _MAX_DIM:
        raise ValueError(
            f"truncated space of dimension {dim_per_atom}^{n_atoms} is too large"
        )
    return total


def build_collective_operator(
    model: EnsembleModel, alpha: int, m, basis: tuple | None = None
) -> sp.csr_matrix:
    """Collective raising operator for helicity alpha out of sublevel m.

    Returns the sparse matrix of
    sqrt((2f_a+1)/N) * sum_mu exp(-i delta_k . r_mu) |b, m+1+alpha><a, m|_mu
    on the product of per-atom truncated bases (atom 0 is the most
    significant factor).
    """
    m = HalfInt.of(m)
    a_lvl, b_lvl = _check_sublevels(model, alpha, m)
    if basis is None:
        basis = single_operator_basis(model, alpha, m)
    if a_lvl not in basis or b_lvl not in basis:
        raise ValueError(f"basis {basis} does not contain {a_lvl} and {b_lvl}")
    d = len(basis)
    n = model.n_atoms
    total = _guard_dimension(d, n)
    a_idx, b_idx = basis.index(a_lvl), basis.index(b_lvl)

    g = math.sqrt(model.ground_multiplicity() / n)
    coeffs = g * model.phases()
    idx = np.arange(total, dtype=np.int64)
    rows, cols, vals = [], [], []
    for mu in range(n):
        place = d ** (n - 1 - mu)
        sel = idx[(idx // place) % d == a_idx]
        rows.append(sel + (b_idx - a_idx) * place)
        cols.append(sel)
        vals.append(np.full(sel.size, coeffs[mu]))
    op = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(total, total),
        dtype=complex,
    )
    return op.tocsr()


def vacuum_populations(model: EnsembleModel, basis: tuple) -> np.ndarray:
    """Diagonal of the unpolarized initial mixture on the truncated basis.

    Every physical ground sublevel carries population 1/(2f_a+1); the
    aggregate "other" level absorbs whatever ground population the basis
    leaves out, so the product state has exactly unit trace.
    """
    mult = model.ground_multiplicity()
    n_ground = sum(1 for kind, _ in basis if kind == "a")
    if n_ground > mult:
        raise ValueError("basis lists more ground sublevels than the manifold has")
    single = np.zeros(len(basis))
    for k, (kind, _) in enumerate(basis):
        if kind == "a":
            single[k] = 1.0 / mult
        elif kind == "other":
            single[k] = (mult - n_ground) / mult
    _guard_dimension(len(basis), model.n_atoms)
    return reduce(np.kron, [single] * model.n_atoms)


def vacuum_pair_expectation(model: EnsembleModel, alpha: int, m, alpha2: int, m2) -> complex:
    """<s_alpha(m) s_alpha2(m2)^dag> in the unpolarized vacuum, explicitly.

    Both operators are materialized on a common truncated space and traced
    against the explicit product mixture.
    """
    basis = union_basis(model, [(alpha, HalfInt.of(m)), (alpha2, HalfInt.of(m2))])
    s1 = build_collective_operator(model, alpha, m, basis)
    s2 = build_collective_operator(model, alpha2, m2, basis)
    pops = vacuum_populations(model, basis)
    product = s1.getH() @ s2  # s1 built as raising operator; s = s1^dag
    return complex(pops @ product.diagonal())


def _mode_weights(table: BranchingTable, model: EnsembleModel, alpha: int):
    """Normalized branching weights w_m = X_m(alpha)/sqrt(sum X^2)."""
    norm_sq = table.sum_squares(alpha)
    if norm_sq == 0:
        raise ValueError(f"no allowed transition for helicity {alpha}")
    norm = math.sqrt(float(norm_sq))
    weights = {}
    for tm in range(-model.f_a.twice, model.f_a.twice + 2, 2):
        x = table.amplitude(HalfInt(tm), alpha)
        if x != 0.0:
            weights[tm] = x / norm
    return weights


def mode_basis(model: EnsembleModel, table: BranchingTable, alphas) -> tuple:
    """Union basis covering every sublevel the given helicity modes touch."""
    pairs = []
    for alpha in alphas:
        for tm in _mode_weights(table, model, alpha):
            pairs.append((alpha, HalfInt(tm)))
    return union_basis(model, pairs)


def normalized_mode_operator(
    model: EnsembleModel, table: BranchingTable, alpha: int, basis: tuple | None = None
) -> sp.csr_matrix:
    """Branching-weighted collective raising operator for one helicity.

    The weighted combination sum_m w_m s_alpha(m)^dag with sum w_m^2 = 1;
    its vacuum norm is 1 for any atom number and any positions.
    """
    weights = _mode_weights(table, model, alpha)
    if basis is None:
        basis = mode_basis(model, table, [alpha])
    op = None
    for tm, w in sorted(weights.items()):
        term = w * build_collective_operator(model, alpha, HalfInt(tm), basis)
        op = term if op is None else op + term
    return op.tocsr()


def mode_vacuum_overlap(
    model: EnsembleModel, table: BranchingTable, alpha: int, alpha2: int
) -> complex:
    """<s_alpha s_alpha2^dag> in the vacuum, by per-atom factorized trace.

    The N-atom trace of a two-atom operator string against a product state
    factorizes into single-atom traces, so this evaluates the same quantity
    as the explicit construction at a cost independent of 2^N, which keeps
    large-N checks exact.  Cross terms between different atoms pick up the
    off-diagonal single-atom traces (identically zero in the unpolarized
    mixture) times the position-phase structure factor.
    """
    w1 = _mode_weights(table, model, alpha)
    w2 = _mode_weights(table, model, alpha2)
    mult = model.ground_multiplicity()
    dim = mult + model.f_b.twice + 1

    def a_slot(tm):
        return (tm + model.f_a.twice) // 2

    def b_slot(tb):
        return mult + (tb + model.f_b.twice) // 2

    rho1 = np.zeros((dim, dim))
    rho1[np.arange(mult), np.arange(mult)] = 1.0 / mult

    phases = model.phases()
    structure = abs(np.sum(phases.conj())) ** 2 - model.n_atoms

    total = 0.0 + 0.0j
    g_sq = mult / model.n_atoms
    for tm, wa in w1.items():
        lower = np.zeros((dim, dim))  # s-side single-atom factor |a,m><b|
        lower[a_slot(tm), b_slot(tm + 2 + 2 * alpha)] = 1.0
        for tm2, wb in w2.items():
            raise_ = np.zeros((dim, dim))  # s^dag-side factor |b'><a,m'|
            raise_[b_slot(tm2 + 2 + 2 * alpha2), a_slot(tm2)] = 1.0
            same_atom = np.trace(rho1 @ lower @ raise_)
            cross_atoms = np.trace(rho1 @ lower) * np.trace(rho1 @ raise_)
            total += g_sq * wa * wb * (
                model.n_atoms * same_atom + structure * cross_atoms
            )
    return complex(total)


def excited_commutator_deviation(model: EnsembleModel, alpha: int, m) -> float:
    """How far [s, s^dag] sits from the bosonic value on one excitation.

    Builds the commutator explicitly on the truncated space and evaluates
    its expectation in the normalized single-excitation state created out
    of the unpolarized vacuum; for a bosonic mode this is exactly 1.  The
    deviation shrinks as 1/N.
    """
    basis = single_operator_basis(model, alpha, HalfInt.of(m))
    raising = build_collective_operator(model, alpha, m, basis)
    lowering = raising.getH()
    commutator = lowering @ raising - raising @ lowering
    pops = vacuum_populations(model, basis)
    norm = (pops @ (lowering @ raising).diagonal()).real
    if norm <= 0:
        raise ValueError("vacuum does not couple to this operator")
    weighted = (pops @ (lowering @ (commutator @ raising)).diagonal()).real
    return abs(weighted / norm - 1.0)

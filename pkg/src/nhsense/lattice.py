"""
Quadrature-basis dynamical matrices of the squeezed SSH chain.

The chain has ``N`` unit cells with sublattices A and B.  An *odd* chain has a
broken last cell (``2N-1`` sites, the last site is ``(N, A)``); an *even* chain
keeps the full last cell (``2N`` sites).  A coherent drive and the waveguide
damping act on site ``(m, A)``.

Indices follow a 1-based convention throughout: site ``(n, A)`` is row
``2n-1`` and ``(n, B)`` is row ``2n`` of a quadrature block; in the full
``x (+) p`` space the p-block is offset by the number of sites.  All
closed-form expressions in :mod:`nhsense.closed_form` are written in these
indices, so the conversion to numpy's 0-based indexing happens in exactly one
place (:meth:`DynamicalMatrix.el`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigvalsh_tridiagonal

from .errors import InstabilityError

__all__ = [
    "Parity",
    "Block",
    "ChainSpec",
    "IndexMap",
    "DynamicalMatrix",
    "SqueezingParams",
    "StabilityReport",
    "StabilityReason",
    "squeezing_params",
    "squeezing_transform",
    "build_quadrature_block",
    "build_tilde_h",
    "build_unperturbed",
    "check_stability",
    "MARGINAL_TOL",
]

# max real eigenvalue within this distance of zero counts as marginal (unstable)
MARGINAL_TOL = 1e-12
# subchain spectra closer than this (relative to the largest hopping) count as shared
DARK_MODE_TOL = 1e-9


class Parity(str, enum.Enum):
    ODD = "odd"
    EVEN = "even"


class Block(str, enum.Enum):
    X = "x"
    P = "p"


@dataclass(frozen=True)
class ChainSpec:
    """Geometry and couplings of a driven squeezed SSH chain.

    Parameters
    ----------
    n_cells:
        Number of unit cells ``N``.
    parity:
        ``Parity.ODD`` (``2N-1`` sites) or ``Parity.EVEN`` (``2N`` sites).
    t1, t2:
        Intra- and intercell squeezing strengths.
    gamma1, gamma2:
        Intra- and intercell hopping strengths (positive).
    kappa:
        Waveguide decay rate at the driven site.
    m:
        Unit cell of the driven/measured A site, ``1 <= m <= N``.
    """

    n_cells: int
    t1: float
    t2: float
    gamma1: float
    gamma2: float
    kappa: float = 0.05
    m: int = 1
    parity: Parity = Parity.ODD

    def __post_init__(self):
        object.__setattr__(self, "parity", Parity(self.parity))
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells!r}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "m", int(self.m))
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("hopping strengths gamma1, gamma2 must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 1 <= self.m <= self.n_cells:
            raise ValueError(f"drive cell m={self.m} outside [1, {self.n_cells}]")

    @property
    def n_sites(self) -> int:
        return 2 * self.n_cells - 1 if self.parity is Parity.ODD else 2 * self.n_cells

    @property
    def index(self) -> "IndexMap":
        return IndexMap(self.n_cells, self.parity)

    @property
    def squeezable(self) -> bool:
        return self.gamma1 > abs(self.t1) and self.gamma2 > abs(self.t2)

    def with_(self, **changes) -> "ChainSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class IndexMap:
    """Bijection between (quadrature, cell, sublattice) and 1-based rows."""

    n_cells: int
    parity: Parity

    @property
    def n_sites(self) -> int:
        return 2 * self.n_cells - 1 if self.parity is Parity.ODD else 2 * self.n_cells

    @property
    def last_site(self) -> tuple[int, str]:
        return (self.n_cells, "A") if self.parity is Parity.ODD else (self.n_cells, "B")

    def site(self, cell: int, sub: str) -> int:
        """Row of site ``(cell, sub)`` inside one quadrature block."""
        if not 1 <= cell <= self.n_cells:
            raise IndexError(f"cell {cell} outside [1, {self.n_cells}]")
        if sub == "A":
            return 2 * cell - 1
        if sub == "B":
            if self.parity is Parity.ODD and cell == self.n_cells:
                raise IndexError("odd chain has no B site in the last cell")
            return 2 * cell
        raise ValueError(f"unknown sublattice {sub!r}")

    def x(self, cell: int, sub: str = "A") -> int:
        return self.site(cell, sub)

    def p(self, cell: int, sub: str = "A") -> int:
        return self.n_sites + self.site(cell, sub)

    def label(self, row: int) -> tuple[str, int, str]:
        """Inverse map: 1-based full-space row to ``(quadrature, cell, sub)``."""
        s = self.n_sites
        if not 1 <= row <= 2 * s:
            raise IndexError(row)
        quad = "x" if row <= s else "p"
        k = row if row <= s else row - s
        return quad, (k + 1) // 2, "A" if k % 2 else "B"

    def sites(self):
        """Iterate ``(cell, sub)`` in row order."""
        for k in range(1, self.n_sites + 1):
            yield (k + 1) // 2, "A" if k % 2 else "B"


@dataclass(frozen=True, eq=False)
class DynamicalMatrix:
    """Dense real matrix with the index map that defines its rows."""

    entries: NDArray[np.float64]
    index: IndexMap
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def el(self, i: int, j: int) -> float:
        """Element at 1-based position ``(i, j)``."""
        return float(self.entries[i - 1, j - 1])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class SqueezingParams:
    r: float
    s: float
    t1_tilde: float
    t2_tilde: float
    n0: float = 0.0
    m0: float = 0.0

    def site_factor(self, cell: int, sub: str) -> float:
        """Diagonal entry of the squeezing matrix for the x quadrature of a site."""
        return math.exp(self.log_site_factor(cell, sub))

    def log_site_factor(self, cell: int, sub: str) -> float:
        shift = 1 if sub == "B" else 0
        return -self.r * (cell + shift - self.n0) - self.s * (cell - self.m0)


def squeezing_params(chain: ChainSpec, n0: float = 0.0, m0: float = 0.0) -> SqueezingParams:
    """Squeezing exponents and reciprocal hoppings; requires gamma > |t| in both bonds."""
    g1, g2, t1, t2 = chain.gamma1, chain.gamma2, chain.t1, chain.t2
    if not chain.squeezable:
        raise InstabilityError(
            f"squeezing transform undefined for gamma1={g1}, t1={t1}, gamma2={g2}, t2={t2}: "
            "need gamma1 > |t1| and gamma2 > |t2|; outside this region the chain maps onto "
            "a purely parametric model and is dynamically unstable"
        )
    r = 0.5 * math.log((g1 + t1) / (g1 - t1))
    s = 0.5 * math.log((g2 + t2) / (g2 - t2))
    return SqueezingParams(r, s, math.sqrt(g1 * g1 - t1 * t1), math.sqrt(g2 * g2 - t2 * t2), n0, m0)


def squeezing_transform(
    chain: ChainSpec, n0: float = 0.0, m0: float = 0.0
) -> tuple[SqueezingParams, DynamicalMatrix]:
    """Return the squeezing parameters and the diagonal matrix ``T``.

    ``x = T x_tilde`` and ``p = T^{-1} p_tilde``; consequently
    ``h^X = T h_tilde T^{-1}`` and ``h^P = T^{-1} h_tilde T``.
    """
    sq = squeezing_params(chain, n0, m0)
    idx = chain.index
    diag = np.array([sq.site_factor(c, s) for c, s in idx.sites()])
    return sq, DynamicalMatrix(np.diag(diag), idx, "T")


def _ssh_block(chain: ChainSpec, c_ab: float, c_ba: float, c_a_prev_b: float, c_b_next_a: float):
    """Assemble one SSH quadrature block.

    ``c_ab``: row (n,A) <- (n,B); ``c_ba``: row (n,B) <- (n,A);
    ``c_a_prev_b``: row (n,A) <- (n-1,B); ``c_b_next_a``: row (n,B) <- (n+1,A).
    """
    idx = chain.index
    s = idx.n_sites
    h = np.zeros((s, s))
    for k in range(1, s + 1):
        if k % 2 == 0:  # B site of cell k/2
            h[k - 1, k - 2] = c_ba
            if k < s:
                h[k - 1, k] = c_b_next_a
        else:
            if k < s:
                h[k - 1, k] = c_ab
            if k > 1:
                h[k - 1, k - 2] = c_a_prev_b
    d = idx.x(chain.m) - 1
    h[d, d] -= 0.5 * chain.kappa
    return h


def build_quadrature_block(chain: ChainSpec, block: Block | str) -> DynamicalMatrix:
    """``h^X`` or ``h^P``: the lab-frame block of one quadrature at zero perturbation."""
    block = Block(block)
    g1, g2, t1, t2 = chain.gamma1, chain.gamma2, chain.t1, chain.t2
    if block is Block.X:
        h = _ssh_block(chain, -(g1 + t1), g1 - t1, g2 - t2, -(g2 + t2))
    else:
        h = _ssh_block(chain, -(g1 - t1), g1 + t1, g2 + t2, -(g2 - t2))
    return DynamicalMatrix(h, chain.index, f"h{block.value.upper()}")


def build_tilde_h(chain: ChainSpec, squeeze: SqueezingParams | None = None) -> DynamicalMatrix:
    """Squeezed-frame block: antisymmetric hopping ``t1_tilde, t2_tilde`` plus damping."""
    if squeeze is None:
        squeeze = squeezing_params(chain)
    a, b = squeeze.t1_tilde, squeeze.t2_tilde
    h = _ssh_block(chain, -a, a, b, -b)
    return DynamicalMatrix(h, chain.index, "h_tilde")


def build_unperturbed(chain: ChainSpec) -> NDArray[np.float64]:
    """Full lab-frame ``x (+) p`` matrix at zero perturbation (block diagonal)."""
    hx = build_quadrature_block(chain, Block.X).entries
    hp = build_quadrature_block(chain, Block.P).entries
    s = chain.n_sites
    full = np.zeros((2 * s, 2 * s))
    full[:s, :s] = hx
    full[s:, s:] = hp
    return full


class StabilityReason(str, enum.Enum):
    ALL_NEGATIVE = "AllNegative"
    POSITIVE_REAL_PART = "PositiveRealPart"
    MARGINAL = "Marginal"
    MAPPED_TO_PURE_PARAMETRIC = "MappedToPureParametric"


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real_eigenvalue: float
    reason: StabilityReason
    eigenvalues: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "max_real_eigenvalue": self.max_real_eigenvalue,
            "reason": self.reason.value,
        }


def _hopping_spectrum(off: np.ndarray) -> np.ndarray:
    if len(off) == 0:
        return np.zeros(1)
    return eigvalsh_tridiagonal(np.zeros(len(off) + 1), off)


def _dark_mode_damping(chain: ChainSpec) -> float | None:
    """Smallest damping rate of the squeezed-frame block, or ``None`` for a dark mode.

    ``h_tilde = A - (kappa/2) P_d`` with ``A`` antisymmetric tridiagonal, so
    every eigenvalue has real part ``-(kappa/2) |psi_d|^2`` to leading order,
    and a mode is undamped exactly when it vanishes on the damped site.  That
    happens iff the hopping spectra left and right of the damped site share
    an eigenvalue.  The weights follow from
    ``|psi_d|^2 = prod(lam - mu) / prod_{k != j}(lam - lam_k)`` with ``mu``
    the spectra of the two subchains, evaluated in log space.
    """
    if chain.kappa <= 0:
        return None
    sq = squeezing_params(chain)
    s = chain.n_sites
    off = np.array([sq.t1_tilde if k % 2 == 0 else sq.t2_tilde for k in range(s - 1)])
    d = chain.index.x(chain.m) - 1
    lam = _hopping_spectrum(off)
    if s == 1:
        return 0.5 * chain.kappa
    left = _hopping_spectrum(off[: d - 1]) if d > 0 else np.zeros(0)
    right = _hopping_spectrum(off[d + 1 :]) if d < s - 1 else np.zeros(0)
    scale = float(np.max(off))
    if len(left) and len(right):
        gap = float(np.min(np.abs(left[:, None] - right[None, :])))
        if gap <= DARK_MODE_TOL * scale:
            return None
    mu = np.concatenate([left, right])
    diff = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(diff, 1.0)
    with np.errstate(divide="ignore"):
        logw = np.sum(np.log(np.abs(lam[:, None] - mu[None, :])), axis=1) - np.sum(np.log(diff), axis=1)
    return 0.5 * chain.kappa * math.exp(float(np.min(logw)))


def check_stability(chain: ChainSpec, matrix: NDArray[np.float64] | None = None) -> StabilityReport:
    """Eigenvalue test of the full unperturbed dynamical matrix.

    For squeezable chains the spectrum is taken from the squeezed-frame
    block, which is similar to both quadrature blocks.  Marginal spectra
    (largest real part within ``MARGINAL_TOL`` of zero) are reported unstable
    because the steady-state inversion is then singular.  Modes that are
    damped only at the roundoff level are resolved by the dark-mode test of
    ``_dark_mode_damping``; their rate is then reported instead of the
    numerical eigenvalue.  A custom ``matrix`` (for instance a perturbed one)
    may be supplied.
    """
    if matrix is None and chain.squeezable:
        # both quadrature blocks are diagonally similar to h_tilde, whose
        # near-normal form keeps the eigenvalues accurate at any length
        ht = np.linalg.eigvals(build_tilde_h(chain).entries)
        eig = np.concatenate([ht, ht])
    else:
        eig = np.linalg.eigvals(build_unperturbed(chain) if matrix is None else np.asarray(matrix))
    max_re = float(np.max(eig.real))
    parametric = chain.gamma1 < abs(chain.t1) and chain.gamma2 < abs(chain.t2)
    if max_re >= -MARGINAL_TOL and matrix is None and chain.squeezable:
        rate = _dark_mode_damping(chain)
        if rate is not None:
            max_re = -rate
    if max_re < -MARGINAL_TOL or (max_re < 0 and matrix is None and chain.squeezable):
        stable, reason = True, StabilityReason.ALL_NEGATIVE
    elif parametric:
        stable, reason = False, StabilityReason.MAPPED_TO_PURE_PARAMETRIC
    elif max_re <= MARGINAL_TOL:
        stable, reason = False, StabilityReason.MARGINAL
    else:
        stable, reason = False, StabilityReason.POSITIVE_REAL_PART
    return StabilityReport(stable, max_re, reason, tuple(eig))

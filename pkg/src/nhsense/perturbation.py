"""
Perturbation matrices and the assembled dynamical matrix ``H(eps)``.

Two perturbations are supported.  ``OnSite`` is a number-operator term on the
last site of the chain; ``Nhse`` is a phase-``phi`` hopping between the first
A site and the last site.  For an odd chain the last site is ``(N, A)``.  For
an even chain it is ``(N, B)``: with a single drive on sublattice A the even
chain's A amplitudes vanish at zeroth order, so a perturbation confined to A
sites would be invisible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .lattice import (
    ChainSpec,
    DynamicalMatrix,
    SqueezingParams,
    build_tilde_h,
    build_unperturbed,
    squeezing_params,
)

__all__ = [
    "PertKind",
    "Frame",
    "PerturbationSpec",
    "AssembledSystem",
    "frame_log_scale",
    "perturbation_block",
    "assemble_full",
    "cos_sin",
]


class PertKind(str, enum.Enum):
    ONSITE = "onsite"
    NHSE = "nhse"


class Frame(str, enum.Enum):
    LAB = "lab"
    SQUEEZED = "squeezed"


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation kind, strength ``epsilon`` and (for ``Nhse``) phase ``phi`` in radians."""

    kind: PertKind
    epsilon: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PertKind(self.kind))
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @classmethod
    def onsite(cls, epsilon: float = 0.0) -> "PerturbationSpec":
        return cls(PertKind.ONSITE, epsilon)

    @classmethod
    def nhse(cls, epsilon: float = 0.0, phi: float = math.pi / 2) -> "PerturbationSpec":
        return cls(PertKind.NHSE, epsilon, phi)

    def with_epsilon(self, epsilon: float) -> "PerturbationSpec":
        return replace(self, epsilon=epsilon)


def cos_sin(angle: float, tol: float = 1e-12) -> tuple[float, float]:
    """``(cos, sin)`` of ``angle``, exact at multiples of ``pi/2``.

    ``math.cos(math.pi / 2)`` is ~6e-17, which would leave spurious x-p
    couplings of order ``eps * 1e-17`` in an otherwise block-diagonal matrix.
    """
    q = angle / (math.pi / 2)
    k = round(q)
    if abs(q - k) < tol:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k % 4]
    return math.cos(angle), math.sin(angle)


def _lab_entries(chain: ChainSpec, pert: PerturbationSpec) -> list[tuple[int, int, float]]:
    """Nonzero lab-frame entries as ``(row, col, value)`` with 1-based indices."""
    idx = chain.index
    s = idx.n_sites
    eps = pert.epsilon
    last = idx.site(*idx.last_site)
    if pert.kind is PertKind.ONSITE:
        return [(last, s + last, eps), (s + last, last, -eps)]
    first = idx.site(1, "A")
    cp, sp = cos_sin(pert.phi)
    c, sn = eps * cp, eps * sp
    x1, xl, p1, pl = first, last, s + first, s + last
    return [
        (x1, pl, c), (x1, xl, -sn),
        (xl, p1, c), (xl, x1, sn),
        (p1, xl, -c), (p1, pl, -sn),
        (pl, x1, -c), (pl, p1, sn),
    ]


def frame_log_scale(chain: ChainSpec, squeeze: SqueezingParams) -> np.ndarray:
    """Log of the diagonal of ``D = diag(T, T^-1)``, the lab-to-squeezed map ``v = D v_tilde``."""
    lt = np.array([squeeze.log_site_factor(c, s) for c, s in chain.index.sites()])
    return np.concatenate([lt, -lt])


def perturbation_block(
    chain: ChainSpec,
    pert: PerturbationSpec,
    frame: Frame | str = Frame.LAB,
    squeeze: SqueezingParams | None = None,
) -> DynamicalMatrix:
    """Full ``x (+) p`` perturbation matrix in the requested frame.

    In the squeezed frame each lab entry ``(i, j)`` is multiplied by
    ``D_jj / D_ii``; for the on-site term this is the familiar
    ``exp(+-2r(N-n0)) exp(+-2s(N-m0))`` pair.
    """
    frame = Frame(frame)
    s = chain.n_sites
    out = np.zeros((2 * s, 2 * s))
    entries = _lab_entries(chain, pert)
    if frame is Frame.SQUEEZED:
        squeeze = squeeze or squeezing_params(chain)
        logd = frame_log_scale(chain, squeeze)
        entries = [(i, j, v * math.exp(logd[j - 1] - logd[i - 1])) for i, j, v in entries]
    for i, j, v in entries:
        out[i - 1, j - 1] += v
    return DynamicalMatrix(out, chain.index, f"V[{pert.kind.value},{frame.value}]")


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    matrix: DynamicalMatrix
    frame: Frame
    chain: ChainSpec
    pert: PerturbationSpec
    squeeze: SqueezingParams | None = None

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries

    def lab_scale(self) -> np.ndarray:
        """Diagonal ``D`` with ``v_lab = D v_frame`` (all ones in the lab frame)."""
        if self.frame is Frame.LAB:
            return np.ones(2 * self.chain.n_sites)
        return np.exp(frame_log_scale(self.chain, self.squeeze))


def assemble_full(
    chain: ChainSpec,
    pert: PerturbationSpec,
    frame: Frame | str = Frame.LAB,
    squeeze: SqueezingParams | None = None,
) -> AssembledSystem:
    """``H(eps) = H(kappa) + V(eps)`` in the lab or squeezed frame."""
    frame = Frame(frame)
    if frame is Frame.LAB:
        base = build_unperturbed(chain)
    else:
        squeeze = squeeze or squeezing_params(chain)
        ht = build_tilde_h(chain, squeeze).entries
        s = chain.n_sites
        base = np.zeros((2 * s, 2 * s))
        base[:s, :s] = ht
        base[s:, s:] = ht
    full = base + perturbation_block(chain, pert, frame, squeeze).entries
    return AssembledSystem(DynamicalMatrix(full, chain.index, f"H[{frame.value}]"), frame, chain, pert, squeeze)

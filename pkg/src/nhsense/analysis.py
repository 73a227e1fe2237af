"""
Regime classification, drive placement, linear-regime breakdown and the scans
behind the phase diagram and the scaling curves.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .closed_form import analytic_full_report, analytic_linear_report
from .errors import (
    InstabilityError,
    NHSenseError,
    NoBreakdown,
    NoEnhancement,
    NotTabulated,
    PoleEncountered,
    SingularMatrixError,
)
from .lattice import ChainSpec, Parity, check_stability
from .perturbation import Frame, PertKind, PerturbationSpec
from .response import DriveSpec, Order, ResponseReport, compute_report

__all__ = [
    "BOUNDARY_TOL",
    "Regime",
    "RegimeLabel",
    "classify_regime",
    "EdgeModes",
    "even_edge_modes",
    "AlphaStar",
    "optimal_alpha",
    "drive_cell",
    "breakdown_size",
    "knee_location",
    "log_slope",
    "Axis",
    "ScanGrid",
    "PhaseCell",
    "phase_diagram_scan",
    "ScanMode",
    "ScalingRow",
    "scaling_scan",
]

BOUNDARY_TOL = 1e-12
WINNER_WINDOW = tuple(range(4, 9))
SCAN_EPSILON = 1e-6


class Regime(str, enum.Enum):
    I = "I"
    II_E = "II_e"
    II_O = "II_o"
    III = "III"


@dataclass(frozen=True)
class RegimeLabel:
    regime: Regime
    boundary: bool = False

    @property
    def family(self) -> str:
        """``"I"``, ``"II"`` or ``"III"``."""
        return "II" if self.regime in (Regime.II_E, Regime.II_O) else self.regime.value

    def __str__(self) -> str:
        return self.regime.value + ("*" if self.boundary else "")


def _near(a: float, b: float, tol: float = BOUNDARY_TOL) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def _ratios(t1, t2, g1, g2):
    """``(L, R)``: ``L = (g2+t2)/(g1-t1)``, ``R = (g1+t1)/(g2-t2)`` in magnitude."""
    with np.errstate(divide="ignore"):
        lv = abs(g2 + t2) / abs(g1 - t1) if g1 != t1 else math.inf
        rv = abs(g1 + t1) / abs(g2 - t2) if g2 != t2 else math.inf
    return lv, rv


def classify_regime(chain: ChainSpec) -> RegimeLabel:
    """Amplification regime from the two coupling inequalities; regime II split by the even-chain edge-mode condition."""
    t1, t2, g1, g2 = chain.t1, chain.t2, chain.gamma1, chain.gamma2
    a_l, a_r = abs(g2 + t2), abs(g1 - t1)
    b_l, b_r = abs(g2 - t2), abs(g1 + t1)
    boundary = _near(a_l, a_r) or _near(b_l, b_r)
    first, second = a_l > a_r, b_l > b_r
    if first and second:
        return RegimeLabel(Regime.I, boundary)
    if not first and not second:
        return RegimeLabel(Regime.III, boundary)
    lv, rv = _ratios(t1, t2, g1, g2)
    boundary = boundary or _near(lv, rv)
    return RegimeLabel(Regime.II_E if lv > rv else Regime.II_O, boundary)


@dataclass(frozen=True)
class EdgeModes:
    zero_mode_t1_values: list
    localized: bool


def even_edge_modes(chain_or_params) -> EdgeModes:
    """Values of ``t1`` at which the even chain acquires zero modes, and whether its edge modes are localized.

    Accepts a ``ChainSpec`` or a mapping with ``t1`` (optional), ``t2``, ``gamma1``, ``gamma2``.
    """
    if isinstance(chain_or_params, ChainSpec):
        t1, t2 = chain_or_params.t1, chain_or_params.t2
        g1, g2 = chain_or_params.gamma1, chain_or_params.gamma2
    else:
        p = dict(chain_or_params)
        t1, t2, g1, g2 = p.get("t1", 0.0), p["t2"], p["gamma1"], p["gamma2"]
    roots = []
    for sq in (g1**2 + t2**2 - g2**2, g1**2 - t2**2 + g2**2):
        if sq > 0:
            r = math.sqrt(sq)
            roots.extend([r, -r])
        elif sq == 0:
            roots.append(0.0)
    lv, rv = _ratios(t1, t2, g1, g2)
    return EdgeModes(roots, bool(lv > rv))


@dataclass(frozen=True)
class AlphaStar:
    alpha_star: float
    n_min: int

    def balance_residual(self, chain: ChainSpec) -> float:
        """``alpha ln L - (1 - alpha) ln R``: zero at the optimum (large-N, log form)."""
        lv, rv = _ratios(chain.t1, chain.t2, chain.gamma1, chain.gamma2)
        return self.alpha_star * math.log(lv) - (1 - self.alpha_star) * math.log(rv)


def optimal_alpha(chain: ChainSpec) -> AlphaStar:
    """Drive-placement fraction ``alpha* = ln R / (ln L + ln R)`` with the smallest useful chain ``ceil(1/alpha*)``."""
    lv, rv = _ratios(chain.t1, chain.t2, chain.gamma1, chain.gamma2)
    if not (math.isfinite(lv) and math.isfinite(rv)) or lv <= 1 or rv <= 1:
        raise NoEnhancement(f"no optimal drive position: L={lv:.6g}, R={rv:.6g} (both must exceed 1)")
    a = math.log(rv) / (math.log(lv) + math.log(rv))
    # guard ceil against 1/a landing a rounding error above an integer
    return AlphaStar(a, int(math.ceil(1.0 / a - 1e-12)))


def drive_cell(n_cells: int, alpha: float) -> int:
    """``m = floor(alpha N)`` clamped to ``[1, N]``."""
    return min(n_cells, max(1, int(math.floor(alpha * n_cells + 1e-12))))


def breakdown_size(
    chain: ChainSpec,
    drive: DriveSpec | None = None,
    pert_kind: PertKind | str = PertKind.ONSITE,
    eps0: float = 1e-6,
    alpha: float | None = None,
) -> float:
    """System size ``N*`` at which linear response stops describing the sensor.

    On-site: ``R^{2(N*-1)} = kappa / (4 eps0)``.  Skin-effect coupling with
    ``m = alpha N``: ``R^{N*(1-alpha)} L^{alpha N* - 1} = kappa / (2 eps0)``;
    ``alpha`` defaults to ``alpha*``.  ``drive`` is accepted for a uniform
    call signature; neither condition depends on it.
    """
    del drive
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    lv, rv = _ratios(chain.t1, chain.t2, chain.gamma1, chain.gamma2)
    kind = PertKind(pert_kind)
    k = chain.kappa
    if kind is PertKind.ONSITE:
        if rv <= 1:
            raise NoBreakdown(f"R = {rv:.6g} <= 1: the on-site response never leaves the linear regime")
        return 1.0 + math.log(k / (4 * eps0)) / (2 * math.log(rv))
    if alpha is None:
        alpha = optimal_alpha(chain).alpha_star
    rate = (1 - alpha) * math.log(rv) + alpha * math.log(lv)
    if rate <= 0:
        raise NoBreakdown(f"growth rate {rate:.6g} <= 0: the skin-effect response never leaves the linear regime")
    return (math.log(k / (2 * eps0)) + math.log(lv)) / rate


def log_slope(ns: Sequence[float], log_values: Sequence[float]) -> float:
    """Least-squares slope of ``log_values`` against ``ns`` (NaN entries dropped)."""
    x = np.asarray(ns, dtype=float)
    y = np.asarray(log_values, dtype=float)
    ok = np.isfinite(y)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def knee_location(ns: Sequence[float], log_values: Sequence[float]) -> float:
    """Position of maximum downward curvature of a log-scale curve on a uniform grid.

    The discrete second difference is minimised and the location refined by a
    parabola through the three neighbouring second differences.
    """
    x = np.asarray(ns, dtype=float)
    y = np.asarray(log_values, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least three points")
    h = x[1] - x[0]
    d2 = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    i = int(np.nanargmin(d2))
    centre = x[i + 1]
    if 0 < i < len(d2) - 1:
        a, b, c = d2[i - 1], d2[i], d2[i + 1]
        den = a - 2 * b + c
        if den > 0:
            centre += 0.5 * h * (a - c) / den
    return float(centre)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

_CHAIN_FIELDS = {f.name for f in fields(ChainSpec)}
_DRIVE_FIELDS = {f.name for f in fields(DriveSpec)}
_PERT_FIELDS = {"epsilon", "phi"}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError(f"axis {self.name!r}: steps must be >= 2")
        if self.name not in _CHAIN_FIELDS | _DRIVE_FIELDS | _PERT_FIELDS:
            raise ValueError(f"axis {self.name!r} is not a chain, drive or perturbation field")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.steps)


@dataclass(frozen=True)
class ScanGrid:
    """Up to two axes over a baseline chain, drive and perturbation."""

    axes: tuple
    chain: ChainSpec
    drive: DriveSpec = field(default_factory=DriveSpec)
    pert: PerturbationSpec = field(default_factory=PerturbationSpec.onsite)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a scan grid has one or two axes")

    @property
    def shape(self) -> tuple:
        return tuple(a.steps for a in self.axes)

    def points(self):
        """``(index, chain, drive, pert)`` in row-major order; an invalid chain yields ``chain=None``."""
        for idx in np.ndindex(*self.shape):
            ch, dr, pe = {}, {}, {}
            for ax, i in zip(self.axes, idx):
                v = float(ax.values[i])
                (ch if ax.name in _CHAIN_FIELDS else dr if ax.name in _DRIVE_FIELDS else pe)[ax.name] = v
            try:
                chain = self.chain.with_(**ch) if ch else self.chain
            except ValueError:
                chain = None
            yield idx, chain, replace(self.drive, **dr), replace(self.pert, **pe)


def _map(fn: Callable, items: list, threads: int = 1) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PhaseCell:
    t1: float
    t2: float
    regime: str
    onsite_winner: str
    nhse_enhanced: bool
    stable: bool
    odd_slope: float = math.nan
    even_slope: float = math.nan
    nhse_slope: float = math.nan


MASKED = "masked"


def _log_spp(chain: ChainSpec, drive: DriveSpec, pert: PerturbationSpec) -> float:
    # the squeezed frame is a diagonal similarity of the lab matrix and stays
    # well conditioned near t = gamma, where lab-frame rcond falls below 1e-16
    rep = compute_report(chain, drive, pert, SCAN_EPSILON, Order.LINEAR, Frame.SQUEEZED)
    return rep.log10_snr_per_photon * math.log(10)


def _phase_cell(args) -> PhaseCell:
    chain = args[0]
    try:
        return _phase_cell_unchecked(args)
    except (InstabilityError, SingularMatrixError):
        # marginal for some N or drive position inside the window
        return PhaseCell(chain.t1, chain.t2, MASKED, MASKED, False, False)


def _phase_cell_unchecked(args) -> PhaseCell:
    chain, drive, pert, window = args
    if chain is None:
        return PhaseCell(math.nan, math.nan, MASKED, MASKED, False, False)
    t1, t2 = chain.t1, chain.t2
    stable = check_stability(chain.with_(n_cells=max(window))).stable and chain.squeezable
    if not stable:
        return PhaseCell(t1, t2, MASKED, MASKED, False, False)
    label = classify_regime(chain)
    onsite = PerturbationSpec.onsite()
    slopes = {}
    for parity in Parity:
        vals = [_log_spp(chain.with_(n_cells=n, parity=parity), drive, onsite) for n in window]
        slopes[parity] = log_slope(window, vals)
    odd, even = slopes[Parity.ODD], slopes[Parity.EVEN]
    winner = "odd" if odd > even else "even" if even > odd else "tie"
    nhse_slope = math.nan
    enhanced = False
    try:
        a = optimal_alpha(chain)
    except NoEnhancement:
        pass
    else:
        nhse = PerturbationSpec.nhse(0.0, pert.phi if pert.kind is PertKind.NHSE else math.pi / 2)
        # sizes below n_min have m clamped to 1; keep them only if too few remain
        ns = [n for n in window if n >= a.n_min]
        if len(ns) < 2:
            ns = list(window)
        vals = [_log_spp(chain.with_(n_cells=n, m=drive_cell(n, a.alpha_star)), drive, nhse) for n in ns]
        nhse_slope = log_slope(ns, vals)
        enhanced = bool(nhse_slope > 0)
    return PhaseCell(t1, t2, str(label), winner, enhanced, True, odd, even, nhse_slope)


def phase_diagram_scan(grid: ScanGrid, window: Sequence[int] = WINNER_WINDOW, threads: int = 1) -> list[PhaseCell]:
    """Per-cell regime, on-site odd/even winner and skin-effect enhancement flag.

    The winner compares least-squares slopes of ``ln(snr per photon)`` over
    ``window`` computed at first order.  Unstable cells are masked.
    """
    names = {a.name for a in grid.axes}
    if names != {"t1", "t2"}:
        raise ValueError("phase diagram axes must be t1 and t2")
    window = tuple(window)
    items = [(ch, dr, pe, window) for _, ch, dr, pe in grid.points()]
    return _map(_phase_cell, items, threads)


class ScanMode(str, enum.Enum):
    LINEAR = "linear"
    ALL_ORDERS = "all_orders"


@dataclass(frozen=True)
class ScalingRow:
    n: int
    m: int
    signal_numeric: float
    signal_analytic: float
    noise_numeric: float
    noise_analytic: float
    n_tot_numeric: float
    n_tot_analytic: float
    snr: float
    snr_per_photon: float
    log10_signal: float
    log10_snr: float
    log10_snr_per_photon: float
    flags: str = ""

    @classmethod
    def from_reports(cls, n: int, m: int, num: ResponseReport | None, ana: ResponseReport | None, flags=()) -> "ScalingRow":
        nan = math.nan

        def g(rep, name):
            return getattr(rep, name) if rep is not None else nan

        return cls(
            n, m,
            g(num, "signal"), g(ana, "signal"),
            g(num, "noise_avg"), g(ana, "noise_avg"),
            g(num, "n_tot_avg"), g(ana, "n_tot_avg"),
            g(num, "snr"), g(num, "snr_per_photon"),
            g(num, "log10_signal"), g(num, "log10_snr"), g(num, "log10_snr_per_photon"),
            ";".join(flags),
        )


def _scaling_point(args) -> ScalingRow:
    chain, drive, pert, eps, mode = args
    order = Order.LINEAR if mode is ScanMode.LINEAR else Order.EXACT
    flags = []
    num = ana = None
    try:
        num = compute_report(chain, drive, pert, eps, order)
        if not num.perturbed_stable:
            flags.append("perturbed_unstable")
    except SingularMatrixError:
        flags.append("singular")
    except InstabilityError:
        flags.append("unstable")
    try:
        p = pert.with_epsilon(eps)
        ana = analytic_linear_report(chain, drive, p) if mode is ScanMode.LINEAR else analytic_full_report(chain, drive, p)
    except NotTabulated:
        flags.append("analytic_unavailable")
    except PoleEncountered:
        flags.append("pole")
    except NHSenseError:
        flags.append("analytic_failed")
    return ScalingRow.from_reports(chain.n_cells, chain.m, num, ana, flags)


def scaling_scan(
    chain: ChainSpec,
    drive: DriveSpec,
    pert: PerturbationSpec,
    epsilon: float | None = None,
    n_values: Sequence[int] = range(1, 13),
    mode: ScanMode | str = ScanMode.LINEAR,
    alpha: float | None = None,
    threads: int = 1,
) -> list[ScalingRow]:
    """Numeric and closed-form observables as a function of the number of cells.

    For the skin-effect coupling the drive sits at ``m = floor(alpha N)``
    with ``alpha`` defaulting to ``alpha*``; the on-site drive stays at the
    baseline ``m`` (clamped to ``N``).  Rows come back in ``n_values`` order.
    """
    mode = ScanMode(mode)
    eps = pert.epsilon if epsilon is None else epsilon
    if pert.kind is PertKind.NHSE and alpha is None:
        alpha = optimal_alpha(chain).alpha_star
    items = []
    for n in n_values:
        n = int(n)
        m = drive_cell(n, alpha) if pert.kind is PertKind.NHSE else min(chain.m, n)
        items.append((chain.with_(n_cells=n, m=m), drive, pert, eps, mode))
    return _map(_scaling_point, items, threads)

"""
Closed-form inverse elements and figures of merit.

All functions work in terms of the squeezed-frame hoppings ``t1_tilde``,
``t2_tilde`` and the squeezing exponents ``r``, ``s``.  Ratios that grow
like ``R**(4N)`` are handled as logarithms and exponentiated once at the
end, so the reports stay finite (or carry finite ``log10_*`` fields) for
large chains.

Shorthand used throughout::

    R  = (g1 + t1) / (g2 - t2)      L  = (g2 + t2) / (g1 - t1)
    q  = t2_tilde / t1_tilde        q2 = q**2 = (g2^2 - t2^2) / (g1^2 - t1^2)

so that ``R = e^{r+s} / q`` and ``L = e^{r+s} q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, NotTabulated, PoleEncountered
from .lattice import Block, ChainSpec, Parity, SqueezingParams, squeezing_params
from .perturbation import PertKind, PerturbationSpec, cos_sin
from .response import DriveSpec, ResponseReport

__all__ = [
    "Ratios",
    "ratios",
    "tilde_h_inv_element",
    "hxp_inv_element",
    "appendix_e_factor",
    "FIRST_ORDER_ELEMENTS",
    "element_index",
    "inv_element_first_order",
    "inv_element_all_orders",
    "theta_factor",
    "nhse_t_factor",
    "analytic_linear_report",
    "analytic_full_report",
    "bkc_linear_report",
    "log_geo",
]

POLE_TOL = 1e-12
LN10 = math.log(10.0)


@dataclass(frozen=True)
class Ratios:
    """Logarithms of the amplification ratios of a squeezable chain."""

    lR: float
    lL: float
    lq: float
    sq: SqueezingParams

    @property
    def lq2(self) -> float:
        return 2.0 * self.lq


def ratios(chain: ChainSpec, squeeze: SqueezingParams | None = None) -> Ratios:
    sq = squeeze or squeezing_params(chain)
    g1, g2, t1, t2 = chain.gamma1, chain.gamma2, chain.t1, chain.t2
    return Ratios(
        math.log(g1 + t1) - math.log(g2 - t2),
        math.log(g2 + t2) - math.log(g1 - t1),
        math.log(sq.t2_tilde) - math.log(sq.t1_tilde),
        sq,
    )


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else float("inf")


def log_geo(ly: float, n: int) -> float:
    """``log((1 - y**n) / (1 - y))`` for ``y = exp(ly) > 0``; ``n`` terms of a geometric series."""
    if n <= 0:
        return float("-inf")
    if ly == 0.0:
        return math.log(n)
    if ly > 0:
        return n * ly + math.log(-math.expm1(-n * ly)) - ly - math.log(-math.expm1(-ly))
    return math.log(-math.expm1(n * ly)) - math.log(-math.expm1(ly))


def _signed_lse(terms) -> tuple[float, float]:
    """Sum of ``sign * exp(log)`` pairs as ``(sign, log|sum|)``."""
    terms = [(s, l) for s, l in terms if s != 0 and l != float("-inf")]
    if not terms:
        return 0.0, float("-inf")
    top = max(l for _, l in terms)
    acc = math.fsum(s * math.exp(l - top) for s, l in terms)
    if acc == 0.0:
        return 0.0, float("-inf")
    return math.copysign(1.0, acc), top + math.log(abs(acc))


def _lse(logs) -> float:
    return _signed_lse([(1.0, l) for l in logs])[1]


def _require_odd(chain: ChainSpec, what: str) -> None:
    if chain.parity is not Parity.ODD:
        raise NotTabulated(f"{what} is only tabulated for the odd chain")


# ---------------------------------------------------------------------------
# inverse of h~
# ---------------------------------------------------------------------------


def tilde_h_inv_element(chain: ChainSpec, row: int, col: int, squeeze: SqueezingParams | None = None) -> float:
    """Closed-form ``[h~^{-1}]_{row, col}`` (1-based) for the odd chain.

    Columns ``1``, ``2N-1`` and ``2m-1`` are tabulated, for every row.
    """
    _require_odd(chain, "inverse of h~")
    sq = squeeze or squeezing_params(chain)
    n_cells, m, k = chain.n_cells, chain.m, chain.kappa
    dim = 2 * n_cells - 1
    if not (1 <= row <= dim and 1 <= col <= dim):
        raise IndexError(f"({row}, {col}) outside a {dim}x{dim} matrix")
    q = sq.t2_tilde / sq.t1_tilde
    even_row = row % 2 == 0
    n = row // 2 if even_row else (row + 1) // 2
    # the three column families agree wherever they overlap (m = 1 or m = N)
    if col == 2 * m - 1:
        return 0.0 if even_row else -(2.0 / k) * q ** (m - n)
    if col == 1:
        if even_row:
            return -(1.0 / sq.t1_tilde) * q ** (n - 1) if n <= m - 1 else 0.0
        return -(2.0 / k) * q ** (2 * m - n - 1)
    if col == dim:
        if even_row:
            return (1.0 / sq.t2_tilde) * q ** (-(n_cells - n - 1)) if n >= m else 0.0
        return -(2.0 / k) * q ** (-(n_cells + n - 2 * m))
    raise NotTabulated(f"column {col} is not in the closed-form catalogue (1, 2N-1, 2m-1)")


def appendix_e_factor(chain: ChainSpec, block: Block | str, row: int, col: int, squeeze: SqueezingParams | None = None) -> float:
    """Parity-dependent factor ``f`` with ``(h^X)^{-1}_{ij} = f (h~)^{-1}_{ij}`` (or ``h^P``)."""
    sq = squeeze or squeezing_params(chain)
    block = Block(block)
    r, s = sq.r, sq.s
    i, j = row, col
    if i % 2 == j % 2:
        ex = 0.5 * (r + s) * (j - i)
    elif i % 2 == 1:
        ex = 0.5 * (r + s) * (j - i) + 0.5 * (r - s)
    else:
        ex = 0.5 * (r + s) * (j - i) + 0.5 * (s - r)
    return math.exp(ex if block is Block.X else -ex)


def hxp_inv_element(chain: ChainSpec, block: Block | str, row: int, col: int, squeeze: SqueezingParams | None = None) -> float:
    """Closed-form inverse element of a lab-frame quadrature block."""
    return tilde_h_inv_element(chain, row, col, squeeze) * appendix_e_factor(chain, block, row, col, squeeze)


# ---------------------------------------------------------------------------
# H~(eps)^{-1}: first order and all orders
# ---------------------------------------------------------------------------

FIRST_ORDER_ELEMENTS = ("xx", "xp", "px", "pp")


def element_index(chain: ChainSpec, which: str) -> tuple[int, int]:
    """1-based ``(row, col)`` of the named drive-site element: ``x`` is ``2m-1``, ``p`` is ``2N+2m-2``."""
    if which not in FIRST_ORDER_ELEMENTS:
        raise NotTabulated(f"unknown element id {which!r}; expected one of {FIRST_ORDER_ELEMENTS}")
    idx = chain.index
    pos = {"x": idx.x(chain.m), "p": idx.p(chain.m)}
    return pos[which[0]], pos[which[1]]


def _gauge_exp(chain: ChainSpec, sq: SqueezingParams) -> tuple[float, float, float]:
    """``(ln e_onsite, ln e_cross, ln e_intra)`` for the squeezed perturbation entries."""
    N = chain.n_cells
    onsite = 2 * sq.r * (N - sq.n0) + 2 * sq.s * (N - sq.m0)
    cross = sq.r * (N + 1 - 2 * sq.n0) + sq.s * (N + 1 - 2 * sq.m0)
    intra = (sq.r + sq.s) * (N - 1)
    return onsite, cross, intra


def inv_element_first_order(
    chain: ChainSpec,
    pert: PerturbationSpec | PertKind | str,
    which: str,
    squeeze: SqueezingParams | None = None,
) -> float:
    """Coefficient of ``eps`` in a squeezed-frame ``[H~(eps)]^{-1}`` drive-site element.

    ``which`` is one of ``"xx"``, ``"xp"``, ``"px"``, ``"pp"``.  For the
    skin-effect coupling the phase is taken from ``pert`` (default ``pi/2``
    when only a kind is given).
    """
    _require_odd(chain, "first-order inverse")
    if not isinstance(pert, PerturbationSpec):
        kind = PertKind(pert)
        pert = PerturbationSpec(kind, 0.0, math.pi / 2 if kind is PertKind.NHSE else 0.0)
    if which not in FIRST_ORDER_ELEMENTS:
        raise NotTabulated(f"unknown element id {which!r}")
    sq = squeeze or squeezing_params(chain)
    N, m = chain.n_cells, chain.m
    h = lambda i, j: tilde_h_inv_element(chain, i, j, sq)  # noqa: E731
    a, last = 2 * m - 1, 2 * N - 1
    lon, lcross, lintra = _gauge_exp(chain, sq)
    if pert.kind is PertKind.ONSITE:
        prod = h(a, last) * h(last, a)
        return {
            "xx": 0.0,
            "xp": -math.exp(lon) * prod,
            "px": math.exp(-lon) * prod,
            "pp": 0.0,
        }[which]
    cp, sp = cos_sin(pert.phi)
    fwd = h(a, 1) * h(last, a)
    bwd = h(a, last) * h(1, a)
    if which == "xx":
        return sp * math.exp(-lintra) * fwd - sp * math.exp(lintra) * bwd
    if which == "pp":
        return sp * math.exp(lintra) * fwd - sp * math.exp(-lintra) * bwd
    if which == "xp":
        return -cp * math.exp(lcross) * (fwd + bwd)
    return cp * math.exp(-lcross) * (fwd + bwd)


def theta_factor(chain: ChainSpec, eps0: float, squeeze: SqueezingParams | None = None) -> float:
    """``Theta = 2 eps0 (t1~/t2~)^{N-2m+1} sinh((r+s)(N-1))``."""
    sq = squeeze or squeezing_params(chain)
    N, m = chain.n_cells, chain.m
    if eps0 == 0:
        return 0.0
    lrho = math.log(sq.t1_tilde / sq.t2_tilde)
    x = (sq.r + sq.s) * (N - 1)
    if x == 0:
        return 0.0
    # 2 sinh(x) = e^x (1 - e^{-2x})
    lmag = math.log(eps0) + lrho * (N - 2 * m + 1) + abs(x) + math.log(-math.expm1(-2 * abs(x)))
    return math.copysign(_exp(lmag), x)


def nhse_t_factor(chain: ChainSpec, squeeze: SqueezingParams | None = None) -> float:
    """``L^{m-1} R^{N-m} - R^{-(m-1)} L^{-(N-m)}``, equal to ``Theta / eps0``."""
    rt = ratios(chain, squeeze)
    N, m = chain.n_cells, chain.m
    sgn, lmag = _signed_lse([(1.0, rt.lL * (m - 1) + rt.lR * (N - m)), (-1.0, -rt.lR * (m - 1) - rt.lL * (N - m))])
    return sgn * _exp(lmag)


def _check_pole(denom: float, scale: float, what: str) -> None:
    if abs(denom) <= POLE_TOL * scale:
        raise PoleEncountered(f"{what}: denominator {denom:.3e} vanishes (kappa/2 = Theta)", distance=abs(denom))


def inv_element_all_orders(
    chain: ChainSpec,
    pert: PerturbationSpec | PertKind | str,
    eps0: float,
    row: int,
    col: int,
    squeeze: SqueezingParams | None = None,
) -> float:
    """All-order squeezed-frame ``[H~(eps0)]^{-1}_{row, col}`` (1-based).

    On-site: drive at ``m = 1``; columns ``1`` (rows ``2n-1``) and ``2N``
    (every row).  Skin-effect coupling at ``phi = pi/2``: columns ``2m-1``
    and ``2N+2m-2``, every row.
    """
    _require_odd(chain, "all-order inverse")
    if isinstance(pert, PerturbationSpec):
        kind, phi = pert.kind, pert.phi
    else:
        kind, phi = PertKind(pert), math.pi / 2
    sq = squeeze or squeezing_params(chain)
    N, m, k = chain.n_cells, chain.m, chain.kappa
    S = 2 * N - 1
    if not (1 <= row <= 2 * S and 1 <= col <= 2 * S):
        raise IndexError(f"({row}, {col}) outside a {2 * S}x{2 * S} matrix")
    lq = math.log(sq.t2_tilde / sq.t1_tilde)
    in_p = row > S
    local = row - S if in_p else row
    even_row = local % 2 == 0
    n = local // 2 if even_row else (local + 1) // 2

    if kind is PertKind.ONSITE:
        if m != 1:
            raise NotTabulated("all-order on-site elements are tabulated for a drive at m = 1")
        lk2 = math.log(k / 2)
        ldenom = _lse([2 * math.log(eps0) if eps0 > 0 else float("-inf"), 2 * lk2 + 4 * (N - 1) * lq])
        lon = _gauge_exp(chain, sq)[0]
        if col == 1:
            if in_p or even_row:
                raise NotTabulated("column 1 is tabulated for rows 2n-1 only")
            return -_exp(lq * (1 - n) + lk2 + 4 * (N - 1) * lq - ldenom)
        if col != 2 * N:
            raise NotTabulated("on-site all-order columns are 1 and 2N")
        if eps0 == 0 and (not in_p):
            return 0.0
        le = math.log(eps0) if eps0 > 0 else float("-inf")
        if not in_p and not even_row:
            return -_exp(lq * (N - n) + le + lon - ldenom + lq * (N - 1))
        if not in_p:
            return _exp(lq * (n - 1) + lk2 - math.log(sq.t1_tilde) + le + lon - ldenom + 2 * (N - 1) * lq)
        if not even_row:
            return -_exp(lq * (N - n) + lk2 - ldenom + 3 * (N - 1) * lq)
        if eps0 == 0:
            return 0.0
        return -_exp(lq * (n - 1) - math.log(sq.t1_tilde) + 2 * le - ldenom)

    if abs(math.cos(phi)) > 1e-12:
        raise NotTabulated("all-order skin-effect elements are tabulated for phi = pi/2")
    sgn = math.copysign(1.0, math.sin(phi))
    th = sgn * theta_factor(chain, eps0, sq)
    lintra = (sq.r + sq.s) * (N - 1)
    lrho = -lq
    xcol, pcol = 2 * m - 1, S + 2 * m - 1
    if col == xcol:
        if in_p:
            return 0.0
        d = th - k / 2
        _check_pole(d, k / 2, "x-block element")
        if not even_row:
            return math.exp(lq * (m - n)) / d
        if eps0 == 0:
            return 0.0
        if n <= m - 1:
            return -sgn * (eps0 / sq.t1_tilde) * _exp(lrho * (N - m - n + 1) - lintra) / d
        return -sgn * (eps0 / sq.t2_tilde) * _exp(lrho * (N - m - n) + lintra) / d
    if col == pcol:
        if not in_p:
            return 0.0
        d = k / 2 + th
        _check_pole(d, k / 2, "p-block element")
        if not even_row:
            return -math.exp(lq * (m - n)) / d
        if eps0 == 0:
            return 0.0
        if n <= m - 1:
            return sgn * (eps0 / sq.t1_tilde) * _exp(lrho * (N - m - n + 1) + lintra) / d
        return sgn * (eps0 / sq.t2_tilde) * _exp(lrho * (N - m - n) - lintra) / d
    raise NotTabulated("skin-effect all-order columns are 2m-1 and 2N+2m-2")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _report_from_logs(ls: float, noise: float, noise_zero: float, ln_eps: float, ln_zero: float, source: str) -> ResponseReport:
    signal = _exp(ls)
    n_eps, n_zero = _exp(ln_eps), _exp(ln_zero)
    l_navg = _lse([ln_eps, ln_zero]) - math.log(2.0)
    l_noise = math.log(0.5 * (noise + noise_zero))
    lsnr = ls - l_noise
    return ResponseReport.assemble(
        signal,
        noise,
        noise_zero,
        n_eps,
        n_zero,
        log10_signal=ls / LN10,
        log10_snr=lsnr / LN10,
        log10_snr_per_photon=(lsnr - l_navg) / LN10,
        source=source,
    )


def _log_photons_zeroth(chain: ChainSpec, drive: DriveSpec, rt: Ratios) -> float:
    N, m, k = chain.n_cells, chain.m, chain.kappa
    c2, s2 = math.cos(drive.theta) ** 2, math.sin(drive.theta) ** 2
    lb2 = 2 * math.log(drive.beta_abs)
    if chain.parity is Parity.ODD:
        terms = []
        if c2 > 0:
            terms.append(math.log(c2) + 2 * (m - 1) * rt.lL + log_geo(-2 * rt.lL, N))
        if s2 > 0:
            terms.append(math.log(s2) - 2 * (m - 1) * rt.lR + log_geo(2 * rt.lR, N))
        return math.log(4.0 / k) + lb2 + _lse(terms)
    g1, t1 = chain.gamma1, chain.t1
    terms = []
    if c2 > 0:
        terms.append(math.log(c2) - 2 * math.log(g1 + t1) + log_geo(-2 * rt.lR, N - m + 1))
    if s2 > 0:
        terms.append(math.log(s2) - 2 * math.log(g1 - t1) + log_geo(2 * rt.lL, N - m + 1))
    return math.log(k) + lb2 + _lse(terms)


def analytic_linear_report(
    chain: ChainSpec,
    drive: DriveSpec,
    pert: PerturbationSpec,
    epsilon: float | None = None,
    squeeze: SqueezingParams | None = None,
) -> ResponseReport:
    """First-order signal with zeroth-order noise and photons, at general angles.

    Covers the odd chain for both perturbations and the even chain for the
    on-site term; the even chain under the skin-effect coupling has no
    first-order signal and returns ``signal = 0``.
    """
    eps = pert.epsilon if epsilon is None else epsilon
    if not chain.squeezable:
        raise InstabilityError("closed forms need gamma1 > |t1| and gamma2 > |t2|")
    rt = ratios(chain, squeeze)
    N, m, k = chain.n_cells, chain.m, chain.kappa
    cph, sph = cos_sin(drive.phi_meas)
    cth, sth = cos_sin(drive.theta)
    noise = drive.n_th + 0.5
    ln0 = _log_photons_zeroth(chain, drive, rt)
    lpref = math.log(32 * drive.tau) + 2 * math.log(drive.beta_abs) - 2 * math.log(k) if drive.beta_abs > 0 else float("-inf")

    if chain.parity is Parity.EVEN:
        if pert.kind is PertKind.NHSE or eps == 0:
            return _report_from_logs(float("-inf"), noise, noise, ln0, ln0, "analytic-linear")
        g1, t1 = chain.gamma1, chain.t1
        _, lb = _signed_lse([
            (cph * sth, -2 * math.log(g1 - t1) + 2 * (N - m) * rt.lL),
            (-sph * cth, -2 * math.log(g1 + t1) - 2 * (N - m) * rt.lR),
        ])
        ls = math.log(2 * drive.tau) + 2 * math.log(k * eps * drive.beta_abs) + 2 * lb
        return _report_from_logs(ls, noise, noise, ln0, ln0, "analytic-linear")

    if eps == 0:
        return _report_from_logs(float("-inf"), noise, noise, ln0, ln0, "analytic-linear")
    if pert.kind is PertKind.ONSITE:
        terms = [(-cph * sth, 2 * (N - m) * rt.lR), (sph * cth, -2 * (N - m) * rt.lL)]
    else:
        cphi, sphi = cos_sin(pert.phi)
        # q2^m (R^N / L - R / L^N), kept as two signed log terms
        lq2m = m * rt.lq2
        br = [(1.0, lq2m + N * rt.lR - rt.lL), (-1.0, lq2m + rt.lR - N * rt.lL)]
        terms = [(-cph * sphi * cth * s, l) for s, l in br]
        terms.append((-cph * 2 * cphi * sth, (N - 2 * m + 1) * rt.lR))
        terms.append((sph * 2 * cphi * cth, -(N - 2 * m + 1) * rt.lL))
        terms += [(sph * sphi * sth * s, l) for s, l in br]
    _, lb = _signed_lse(terms)
    ls = lpref + 2 * math.log(eps) + 2 * lb
    return _report_from_logs(ls, noise, noise, ln0, ln0, "analytic-linear")


def bkc_linear_report(n_sites: int, j: int, t: float, gamma: float, kappa: float, drive: DriveSpec, epsilon: float) -> ResponseReport:
    """Linear-response figures of merit of a bosonic Kitaev chain.

    ``n_sites`` sites with uniform hopping ``gamma`` and squeezing ``t``,
    drive and on-site perturbation at sites ``j`` and ``n_sites``;
    ``e^{2r} = (gamma + t)/(gamma - t)``.  Only sites of the drive's
    sublattice are populated at zeroth order.
    """
    if not gamma > abs(t):
        raise InstabilityError("bosonic Kitaev chain needs gamma > |t|")
    two_r = math.log((gamma + t) / (gamma - t))
    d = n_sites - j
    cph, sph = math.cos(drive.phi_meas), math.sin(drive.phi_meas)
    cth, sth = math.cos(drive.theta), math.sin(drive.theta)
    _, lb = _signed_lse([(-cph * sth, two_r * d), (sph * cth, -two_r * d)])
    if epsilon > 0 and drive.beta_abs > 0:
        ls = math.log(32 * drive.tau) + 2 * math.log(epsilon / kappa) + 2 * math.log(drive.beta_abs) + 2 * lb
    else:
        ls = float("-inf")
    logs = []
    for site in range(j % 2 or 2, n_sites + 1, 2):
        if cth:
            logs.append(math.log(cth * cth) - two_r * (site - j))
        if sth:
            logs.append(math.log(sth * sth) + two_r * (site - j))
    ln0 = math.log(4.0 / kappa) + 2 * math.log(drive.beta_abs) + _lse(logs)
    noise = drive.n_th + 0.5
    return _report_from_logs(ls, noise, noise, ln0, ln0, "analytic-bkc")


def _onsite_full(chain: ChainSpec, drive: DriveSpec, eps0: float, rt: Ratios) -> ResponseReport:
    if chain.m != 1 or abs(drive.phi_meas) > 1e-12 or abs(math.sin(drive.theta) - 1) > 1e-12:
        raise NotTabulated("all-order on-site closed forms need m = 1, phi_meas = 0, theta = pi/2")
    N, k = chain.n_cells, chain.kappa
    g1, t1 = chain.gamma1, chain.t1
    lk2 = math.log(k / 2)
    le = math.log(eps0) if eps0 > 0 else float("-inf")
    lb2 = 2 * math.log(drive.beta_abs)
    lD = _lse([2 * le, 2 * lk2 + 2 * (N - 1) * rt.lq2])
    L4 = 4 * (N - 1) * rt.lL
    ls = math.log(2 * drive.tau) + 2 * le + 2 * math.log(k) + lb2 + L4 - 2 * lD
    # averaged noise: (n_th + 1/2)/D^2 [ (k/2)^4 q2^{4(N-1)} + eps^2 k^2 L^{4(N-1)}/2 + eps^4 ]
    lnum = _lse([4 * lk2 + 4 * (N - 1) * rt.lq2, 2 * le + 2 * math.log(k) + L4 - math.log(2), 4 * le])
    noise_avg = (drive.n_th + 0.5) * _exp(lnum - 2 * lD)
    noise_zero = drive.n_th + 0.5
    noise = 2 * noise_avg - noise_zero
    # photons at eps0
    ln_terms = [
        2 * lk2 + 4 * (N - 1) * rt.lq2 + log_geo(2 * rt.lR, N),
        2 * le + 2 * (N - 1) * rt.lL + log_geo(2 * rt.lL, N),
        4 * le - 2 * math.log(g1 - t1) + log_geo(2 * rt.lL, N - 1),
        2 * lk2 + 2 * le - 2 * math.log(g1 + t1) + L4 + log_geo(-2 * rt.lR, N - 1),
    ]
    ln_eps = math.log(k) + lb2 - 2 * lD + _lse(ln_terms)
    ln_zero = _log_photons_zeroth(chain, drive, rt)
    rep = _report_from_logs(ls, noise, noise_zero, ln_eps, ln_zero, "analytic-all-orders")
    # the averaged noise is the primary quantity; recompute the log SNR from it
    lsnr = ls - math.log(noise_avg)
    l_navg = _lse([ln_eps, ln_zero]) - math.log(2.0)
    return _with_logs(rep, lsnr, l_navg)


def _with_logs(rep: ResponseReport, lsnr: float, l_navg: float) -> ResponseReport:
    from dataclasses import replace

    return replace(rep, log10_snr=lsnr / LN10, log10_snr_per_photon=(lsnr - l_navg) / LN10)


def _nhse_full(chain: ChainSpec, drive: DriveSpec, pert: PerturbationSpec, eps0: float, sq: SqueezingParams) -> ResponseReport:
    if abs(math.cos(pert.phi)) > 1e-12:
        raise NotTabulated("all-order skin-effect closed forms need phi = pi/2")
    N, m, k = chain.n_cells, chain.m, chain.kappa
    S = 2 * N - 1
    th = math.copysign(1.0, math.sin(pert.phi)) * theta_factor(chain, eps0, sq)
    dx, dp = th - k / 2, th + k / 2
    _check_pole(dx, k / 2, "skin-effect response")
    amp = math.sqrt(2 * k) * drive.beta_abs
    cth, sth = math.cos(drive.theta), math.sin(drive.theta)
    cph, sph = math.cos(drive.phi_meas), math.sin(drive.phi_meas)
    # drive-site moment shifts, (x, p) = G_diag * b with G_xx = 1/(Theta - k/2), G_pp = -1/(Theta + k/2)
    ddx = amp * cth * th / ((k / 2) * dx)
    ddp = amp * sth * th / ((k / 2) * dp)
    proj = cph * ddx + sph * ddp
    signal = k * drive.tau * proj * proj
    gx, gp = 1 + k / dx, 1 - k / dp
    noise = (drive.n_th + 0.5) * (cph * cph * gx * gx + sph * sph * gp * gp)
    noise_zero = drive.n_th + 0.5

    def log_photons(eps: float) -> float:
        logs = []
        lt_m = sq.log_site_factor(m, "A")
        for cell, sub in chain.index.sites():
            row = 2 * cell - 1 if sub == "A" else 2 * cell
            lt = sq.log_site_factor(cell, sub)
            if cth:
                g = inv_element_all_orders(chain, pert, eps, row, 2 * m - 1, sq)
                if g:
                    logs.append(2 * (math.log(abs(g)) + lt - lt_m + math.log(amp * abs(cth))))
            if sth:
                g = inv_element_all_orders(chain, pert, eps, S + row, S + 2 * m - 1, sq)
                if g:
                    logs.append(2 * (math.log(abs(g)) - lt + lt_m + math.log(amp * abs(sth))))
        return _lse(logs) - math.log(2.0)

    ls = math.log(signal) if signal > 0 else float("-inf")
    return _report_from_logs(ls, noise, noise_zero, log_photons(eps0), log_photons(0.0), "analytic-all-orders")


def analytic_full_report(
    chain: ChainSpec,
    drive: DriveSpec,
    pert: PerturbationSpec,
    epsilon: float | None = None,
    squeeze: SqueezingParams | None = None,
) -> ResponseReport:
    """All-order figures of merit for the odd chain.

    On-site: drive and measurement at ``m = 1`` with ``theta = pi/2`` and
    ``phi_meas = 0``.  Skin-effect coupling: ``phi = pi/2``, any drive
    position and drive/measurement angle (the x and p chains stay
    decoupled at this phase).

    Raises
    ------
    PoleEncountered
        When ``Theta = kappa/2`` for the skin-effect coupling.
    NotTabulated
        Outside the protocols above.
    """
    eps0 = pert.epsilon if epsilon is None else epsilon
    _require_odd(chain, "all-order report")
    if not chain.squeezable:
        raise InstabilityError("closed forms need gamma1 > |t1| and gamma2 > |t2|")
    sq = squeeze or squeezing_params(chain)
    if pert.kind is PertKind.ONSITE:
        return _onsite_full(chain, drive, eps0, ratios(chain, sq))
    return _nhse_full(chain, drive, pert, eps0, sq)


def tilde_h_inverse_numeric(chain: ChainSpec, squeeze: SqueezingParams | None = None) -> np.ndarray:
    """Dense inverse of ``h~``; the fallback when an element is not tabulated."""
    from .lattice import build_tilde_h

    return np.linalg.inv(build_tilde_h(chain, squeeze).entries)

"""
Numerical steady-state engine.

The first moments obey ``dv/dt = H v - b`` with ``H = H(eps)`` the full
``x (+) p`` dynamical matrix and ``b`` the coherent drive injected at
``(m, A)``; the steady state is ``v = H^{-1} b``.  Signal, noise, photon
number and SNR are assembled from ``v`` and from four elements of
``H^{-1}``.  :func:`time_domain_oracle` integrates the ODE directly and is
used to check the inversion.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, InstabilityError, SingularMatrixError
from .lattice import ChainSpec, check_stability
from .perturbation import AssembledSystem, Frame, PerturbationSpec, assemble_full, cos_sin

__all__ = [
    "DriveSpec",
    "Order",
    "Moments",
    "ResponseReport",
    "drive_vector",
    "solve_dense",
    "steady_state_moments",
    "noise_from_inverse",
    "compute_report",
    "OracleResult",
    "time_domain_oracle",
    "safe_log10",
]

# reciprocal condition number below which a solve is declared singular
RCOND_MIN = np.finfo(float).eps


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive and homodyne protocol.

    Parameters
    ----------
    beta_abs:
        Drive amplitude ``|beta|``.
    theta:
        Drive phase; ``cos(theta)`` feeds ``x_{m,A}`` and ``sin(theta)`` feeds ``p_{m,A}``.
    phi_meas:
        Homodyne angle.
    tau:
        Integration window.
    n_th:
        Thermal occupation of the input noise.
    """

    beta_abs: float = 1.0
    theta: float = 0.0
    phi_meas: float = 0.0
    tau: float = 100.0
    n_th: float = 0.0

    def __post_init__(self):
        if self.beta_abs < 0:
            raise ValueError("beta_abs must be non-negative")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


class Order(str, enum.Enum):
    EXACT = "exact"
    LINEAR = "linear"


def safe_log10(x: float) -> float:
    return math.log10(x) if x > 0 else float("-inf")


@dataclass(frozen=True)
class ResponseReport:
    """Steady-state figures of merit at one parameter point.

    ``noise``/``n_tot`` are the values at the perturbed point; the
    ``*_zero`` fields hold the unperturbed values and ``*_avg`` the
    symmetric averages that enter ``snr`` and ``snr_per_photon``.
    """

    signal: float
    noise: float
    noise_zero: float
    n_tot: float
    n_tot_zero: float
    snr: float
    snr_per_photon: float
    log10_signal: float = float("nan")
    log10_snr: float = float("nan")
    log10_snr_per_photon: float = float("nan")
    cond: float = float("nan")
    perturbed_stable: bool = True
    source: str = "numeric"

    @property
    def noise_avg(self) -> float:
        return 0.5 * (self.noise + self.noise_zero)

    @property
    def n_tot_avg(self) -> float:
        return 0.5 * (self.n_tot + self.n_tot_zero)

    @classmethod
    def assemble(cls, signal, noise, noise_zero, n_tot, n_tot_zero, **extra) -> "ResponseReport":
        noise_avg = 0.5 * (noise + noise_zero)
        n_avg = 0.5 * (n_tot + n_tot_zero)
        snr = signal / noise_avg
        spp = snr / n_avg
        logs = {
            "log10_signal": safe_log10(signal),
            "log10_snr": safe_log10(snr),
            "log10_snr_per_photon": safe_log10(spp),
        }
        logs.update({k: v for k, v in extra.items() if k.startswith("log10_")})
        rest = {k: v for k, v in extra.items() if not k.startswith("log10_")}
        return cls(signal, noise, noise_zero, n_tot, n_tot_zero, snr, spp, **logs, **rest)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise_avg"] = self.noise_avg
        d["n_tot_avg"] = self.n_tot_avg
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseReport":
        names = cls.__dataclass_fields__.keys()
        kw = {}
        for k in names:
            if k not in d:
                continue
            v = d[k]
            if v is None and k.startswith("log10_"):
                v = float("-inf")
            kw[k] = v
        return cls(**kw)


def drive_vector(chain: ChainSpec, drive: DriveSpec) -> np.ndarray:
    """Lab-frame drive ``b = sqrt(2 kappa) |beta| (cos theta e_x + sin theta e_p)`` at ``(m, A)``."""
    idx = chain.index
    amp = math.sqrt(2.0 * chain.kappa) * drive.beta_abs
    c, s = cos_sin(drive.theta)
    b = np.zeros(2 * chain.n_sites)
    b[idx.x(chain.m) - 1] = amp * c
    b[idx.p(chain.m) - 1] = amp * s
    return b


@dataclass
class _Factored:
    lu: tuple
    rcond: float

    def solve(self, rhs):
        return sla.lu_solve(self.lu, rhs)


def _factor(h: np.ndarray) -> _Factored:
    if not np.all(np.isfinite(h)):
        raise SingularMatrixError("dynamical matrix has non-finite entries")
    anorm = np.linalg.norm(h, 1)
    lu, piv = sla.lu_factor(h, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("dynamical matrix is exactly singular")
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if rcond < RCOND_MIN:
        raise SingularMatrixError(
            f"dynamical matrix is numerically singular (rcond={rcond:.3e}); "
            "the chain is marginal or eps sits on a fine-tuned pole"
        )
    return _Factored((lu, piv), float(rcond))


def solve_dense(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve with partial pivoting; raises on (numerical) singularity."""
    return _factor(np.asarray(h, dtype=float)).solve(rhs)


@dataclass(frozen=True)
class Moments:
    """Lab-frame first moments; ``x``/``p`` are indexed by 1-based site row minus one."""

    x: np.ndarray
    p: np.ndarray
    cond: float = float("nan")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @property
    def photons(self) -> float:
        return 0.5 * float(np.dot(self.x, self.x) + np.dot(self.p, self.p))

    def at(self, chain: ChainSpec, cell: int, sub: str = "A") -> tuple[float, float]:
        k = chain.index.site(cell, sub) - 1
        return float(self.x[k]), float(self.p[k])


def _require_stable(chain: ChainSpec) -> None:
    rep = check_stability(chain)
    if not rep.stable:
        raise InstabilityError(
            f"unperturbed chain is not dynamically stable (max Re lambda = "
            f"{rep.max_real_eigenvalue:.3e}, reason {rep.reason.value}); stability requires "
            "gamma1 > |t1| and gamma2 > |t2|, and beyond both bounds the model is similar to a "
            "purely parametric chain with growing modes"
        )


def steady_state_moments(sys: AssembledSystem, drive: DriveSpec, check: bool = True) -> Moments:
    """Solve ``H v = b`` and return lab-frame moments.

    Works in either frame: in the squeezed frame the drive is mapped with
    ``D^{-1}`` and the solution mapped back with ``D``.
    """
    chain = sys.chain
    if check:
        _require_stable(chain)
    b = drive_vector(chain, drive)
    scale = sys.lab_scale()
    fac = _factor(sys.entries)
    v = fac.solve(b / scale) * scale
    s = chain.n_sites
    return Moments(v[:s], v[s:], 1.0 / fac.rcond)


def noise_from_inverse(g: np.ndarray, chain: ChainSpec, drive: DriveSpec) -> float:
    """Homodyne noise from the four lab-frame inverse elements at ``(m, A)``.

    The output quadrature is ``cos(phi) dX + sin(phi) dP`` with
    ``dX = (1 + kappa G_xx) X_in + kappa G_xp P_in`` and
    ``dP = kappa G_px X_in + (1 + kappa G_pp) P_in``.
    """
    idx = chain.index
    i, j = idx.x(chain.m) - 1, idx.p(chain.m) - 1
    k = chain.kappa
    c, s = math.cos(drive.phi_meas), math.sin(drive.phi_meas)
    a = c * (1 + k * g[i, i]) + s * k * g[j, i]
    b = c * k * g[i, j] + s * (1 + k * g[j, j])
    return (drive.n_th + 0.5) * (a * a + b * b)


def _inverse_columns(fac: _Factored, chain: ChainSpec, scale: np.ndarray) -> np.ndarray:
    """Lab-frame ``H^{-1}`` restricted to the two drive columns (dense 2S x 2S with other columns zero)."""
    idx = chain.index
    n = 2 * chain.n_sites
    cols = [idx.x(chain.m) - 1, idx.p(chain.m) - 1]
    g = np.zeros((n, n))
    for c in cols:
        e = np.zeros(n)
        e[c] = 1.0
        # lab G = D G_frame D^{-1}
        g[:, c] = fac.solve(e / scale) * scale
    return g


def _is_stable_matrix(h: np.ndarray) -> bool:
    return bool(np.max(np.linalg.eigvals(h).real) < 0)


def compute_report(
    chain: ChainSpec,
    drive: DriveSpec,
    pert: PerturbationSpec,
    epsilon: float | None = None,
    order: Order | str = Order.EXACT,
    frame: Frame | str | None = None,
    squeeze=None,
) -> ResponseReport:
    """Signal, noise, photons and SNR from dense linear algebra.

    ``order="exact"`` solves at the perturbed point.  ``order="linear"``
    keeps the first-order moment shift ``-H0^{-1} V v0`` and zeroth-order
    noise and photons, matching the linear-response figures of merit.
    The moment shift is always formed as a solve against ``V v0`` rather than
    as a difference of two steady states, so tiny ``eps`` does not cancel.

    ``frame=None`` solves in the lab frame and retries in the squeezed frame
    if the lab matrix is numerically singular.  The squeezed frame is a
    diagonal similarity that keeps long amplifying chains well conditioned,
    but its perturbation entries spread over ``exp(+-2(r+s)N)``, so neither
    frame is better everywhere.  Results are reported in the lab frame
    either way.
    """
    if frame is None:
        try:
            return compute_report(chain, drive, pert, epsilon, order, Frame.LAB, squeeze)
        except SingularMatrixError:
            if not chain.squeezable:
                raise
            return compute_report(chain, drive, pert, epsilon, order, Frame.SQUEEZED, squeeze)
    if epsilon is not None:
        pert = pert.with_epsilon(epsilon)
    order = Order(order)
    _require_stable(chain)
    sys0 = assemble_full(chain, pert.with_epsilon(0.0), frame, squeeze)
    syse = assemble_full(chain, pert, frame, squeeze)
    scale = sys0.lab_scale()
    b = drive_vector(chain, drive) / scale

    f0 = _factor(sys0.entries)
    v0 = f0.solve(b)
    vmat = syse.entries - sys0.entries
    if order is Order.EXACT:
        fe = _factor(syse.entries)
        dv = -fe.solve(vmat @ v0)
    else:
        fe = f0
        dv = -f0.solve(vmat @ v0)
    v0l, dvl = v0 * scale, dv * scale

    idx = chain.index
    i, j = idx.x(chain.m) - 1, idx.p(chain.m) - 1
    proj = math.cos(drive.phi_meas) * dvl[i] + math.sin(drive.phi_meas) * dvl[j]
    signal = chain.kappa * drive.tau * proj * proj

    g0 = _inverse_columns(f0, chain, scale)
    noise_zero = noise_from_inverse(g0, chain, drive)
    n_zero = 0.5 * float(np.dot(v0l, v0l))
    if order is Order.EXACT:
        noise = noise_from_inverse(_inverse_columns(fe, chain, scale), chain, drive)
        ve = v0l + dvl
        n_eps = 0.5 * float(np.dot(ve, ve))
        stable_e = _is_stable_matrix(syse.entries)
    else:
        noise, n_eps, stable_e = noise_zero, n_zero, True
    return ResponseReport.assemble(
        signal,
        noise,
        noise_zero,
        n_eps,
        n_zero,
        cond=1.0 / fe.rcond,
        perturbed_stable=stable_e,
        source=f"numeric-{order.value}",
    )


@dataclass
class OracleResult:
    times: np.ndarray
    norms: np.ndarray
    moments: Moments
    residual: float
    steps: int
    dt: float
    trajectory: list = field(default_factory=list, repr=False)


def time_domain_oracle(
    sys: AssembledSystem,
    drive: DriveSpec,
    t_end: float = 1e9,
    dt: float | None = None,
    tol: float = 1e-12,
) -> OracleResult:
    """Integrate ``dv/dt = H v - b`` from ``v(0) = 0`` with classical RK4.

    The step is fixed (default ``1/||H||_2``).  Because the system is linear
    and autonomous, one RK4 step is a fixed matrix ``P`` acting on the
    augmented state ``(v, 1)``; ``2**k`` steps are taken at once by repeated
    squaring of ``P``.  This is the same fixed-step iteration, evaluated with
    ``O(log n)`` matrix products, and makes times of order ``1/|Re lambda|``
    for slowly damped modes affordable.  Each doubling is a checkpoint on the
    returned trajectory.

    Raises
    ------
    ConvergenceError
        If ``||dv/dt|| / ||b||`` has not dropped below ``tol`` by ``t_end``,
        or if the trajectory blows up (``diverged=True``).
    """
    h = np.asarray(sys.entries, dtype=float)
    scale = sys.lab_scale()
    b = drive_vector(sys.chain, drive) / scale
    n = h.shape[0]
    if dt is None:
        dt = 1.0 / max(np.linalg.norm(h, 2), 1e-300)
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = h
    m[:n, n] = -b
    hm = dt * m
    step = np.eye(n + 1)
    term = np.eye(n + 1)
    for k in range(1, 5):
        term = term @ hm / k
        step = step + term
    z0 = np.zeros(n + 1)
    z0[n] = 1.0
    bnorm = max(float(np.linalg.norm(b)), 1e-300)

    times, norms, traj = [0.0], [0.0], [np.zeros(n)]
    prop, nsteps = step, 1
    residual = float("inf")
    while True:
        z = prop @ z0
        v = z[:n]
        t = nsteps * dt
        nv = float(np.linalg.norm(v * scale))
        times.append(t)
        norms.append(nv)
        traj.append(v * scale)
        if not np.isfinite(nv) or nv > 1e150:
            raise ConvergenceError(
                f"trajectory diverged at t={t:.3e} (|v|={nv:.3e}); the system is dynamically unstable",
                residual=float("inf"),
                diverged=True,
            )
        residual = float(np.linalg.norm(h @ v - b)) / bnorm
        if residual < tol:
            break
        if t >= t_end:
            grew = len(norms) > 3 and norms[-1] > 10 * max(norms[-3], 1e-300) and norms[-1] > 1e3 * bnorm
            raise ConvergenceError(
                f"no steady state by t_end={t_end:.3e}: relative residual {residual:.3e}",
                residual=residual,
                diverged=grew,
            )
        prop = prop @ prop
        nsteps *= 2
    s = sys.chain.n_sites
    vl = v * scale
    return OracleResult(np.array(times), np.array(norms), Moments(vl[:s], vl[s:]), residual, nsteps, dt, traj)

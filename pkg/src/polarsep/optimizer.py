"""Global diffuse/specular separation by ADMM.

The observation ``I`` (the constant radiance image, N x 3) is split as
``I = R_D + R_S``. ``R_D`` is tied to the cluster-wise low-rank model
``f(R_D)`` and ``R_S`` is sparse and nonnegative. Energy::

    ||I - R_D - R_S||^2 + ||R_D - f(D)||^2 + lambda * ||R_S||_1

with scaled multipliers ``y = S / rho`` and ``y_pol = S_pol / rho_pol``.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .chroma import chromaticity, classify_pixels
from .cluster import DEFAULT_T, MIN_CLUSTER_SIZE, ClusterSet, build_clusters
from .imagestack import PolarizedStack
from .rpca import RpcaOptions, pgm_apply, soft_threshold
from .trs import RawComponents, TRSMaps, fit_trs, raw_components

log = logging.getLogger(__name__)

CLOSED_FORM = "closed_form"
LBFGS = "lbfgs"
SOLVERS = (CLOSED_FORM, LBFGS)

# a pixel counts as specular when any channel of R_S exceeds this
ACTIVE_SPECULAR = 1e-6

CONVERGED = "converged"
MAX_ITER = "max_iter"


@dataclass
class SeparationParams:
    rho_pol0: float = 1.1
    rho0: float = 1.1
    penalty_growth: float = 1.05
    max_iter: int = 50
    epsilon: float = 1e-3
    t: float = DEFAULT_T
    tau_s: float = 0.02
    solver: str = CLOSED_FORM
    consistent_output: bool = False
    min_cluster_size: int = MIN_CLUSTER_SIZE
    rpca_max_iter: int = 100
    rpca_tol: float = 1e-6
    rpca_mu_growth: float = 1.2
    threads: int | None = None

    def __post_init__(self):
        for name in ("rho_pol0", "rho0", "penalty_growth", "epsilon", "t", "tau_s",
                     "rpca_tol", "rpca_mu_growth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.rpca_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be at least 1")

    def rpca_options(self) -> RpcaOptions:
        return RpcaOptions(max_iter=self.rpca_max_iter, tol=self.rpca_tol,
                           mu_growth=self.rpca_mu_growth)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SeparationParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class SeparationState:
    obs: np.ndarray       # I, N x 3
    r_d: np.ndarray
    r_s: np.ndarray
    s_mul: np.ndarray     # S
    s_pol: np.ndarray     # S_pol
    rho: float
    rho_pol: float
    lam: float
    f_d: np.ndarray
    k: int = 0            # multiplier updates performed so far
    rho0: float = 1.1
    rho_pol0: float = 1.1
    growth: float = 1.05

    @property
    def y(self) -> np.ndarray:
        return self.s_mul / self.rho

    @property
    def y_pol(self) -> np.ndarray:
        return self.s_pol / self.rho_pol


@dataclass
class IterationRecord:
    k: int
    delta_s: float        # ||S^{k+1} - S^k||_F / sqrt(3N)
    delta_s_pol: float
    primal: float         # ||I - R_D - R_S||_F / sqrt(3N)
    coupling: float       # ||R_D - f(D)||_F / sqrt(3N)
    rho: float            # penalties used in this iteration
    rho_pol: float
    lam: float
    n_s: int


@dataclass
class SeparationResult:
    diffuse: np.ndarray
    specular: np.ndarray
    iterations: int
    stop_reason: str
    history: list
    params: dict
    raw: RawComponents | None = None
    n_clusters: int = 0
    diagnostics: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "n_clusters": self.n_clusters,
            "diagnostics": self.diagnostics,
            "params": self.params,
            "residual_history": [dataclasses.asdict(r) for r in self.history],
        }


def solve_rd(f_d, y_pol, i, r_s, y, rho_pol: float, rho: float,
             method: str = CLOSED_FORM, x0=None) -> np.ndarray:
    """Minimize ``rho_pol/2 ||R - A||^2 + rho/2 ||R - B||^2``.

    ``A = f(D) - y_pol`` and ``B = I - R_S + y``. The minimizer is the weighted
    average of the two targets; ``method="lbfgs"`` reaches it iteratively.
    """
    if rho <= 0 or rho_pol <= 0:
        raise ValueError("penalties must be positive")
    a = np.asarray(f_d, dtype=np.float64) - y_pol
    b = np.asarray(i, dtype=np.float64) - r_s + y
    closed = (rho_pol * a + rho * b) / (rho_pol + rho)
    if method == CLOSED_FORM:
        return closed
    if method != LBFGS:
        raise ValueError(f"unknown solver {method!r}")

    shape = a.shape
    av, bv = a.ravel(), b.ravel()

    def fun(x):
        da = x - av
        db = x - bv
        val = 0.5 * rho_pol * da @ da + 0.5 * rho * db @ db
        return val, rho_pol * da + rho * db

    start = b if x0 is None else np.asarray(x0, dtype=np.float64)
    res = minimize(fun, start.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxcor": 10, "gtol": 1e-8, "ftol": 0.0, "maxiter": 100})
    g = fun(res.x)[1]
    if not np.all(np.isfinite(res.x)) or np.abs(g).max() > 1e-8:
        log.warning("L-BFGS stopped early (%s); using the closed form", res.message)
        return closed
    return res.x.reshape(shape)


def solve_rs(i, r_d, y, lam: float, rho: float) -> np.ndarray:
    """l1 proximal step followed by clamping negatives to zero."""
    if rho <= 0 or lam < 0:
        raise ValueError("need rho > 0 and lambda >= 0")
    return np.maximum(soft_threshold(np.asarray(i) - r_d + y, lam / rho), 0.0)


def active_specular_count(r_s) -> int:
    r_s = np.asarray(r_s)
    return int(np.count_nonzero(np.any(r_s.reshape(-1, r_s.shape[-1]) > ACTIVE_SPECULAR, axis=1)))


def update_lambda(r_s) -> float:
    """``1 / sqrt(N_s)`` over active specular pixels, all pixels if none."""
    n_s = active_specular_count(r_s)
    if n_s == 0:
        r_s = np.asarray(r_s)
        n_s = r_s.size // r_s.shape[-1]
    return 1.0 / np.sqrt(n_s)


def penalty(p0: float, growth: float, k: int) -> float:
    return p0 * growth ** k


def update_multipliers(state: SeparationState) -> SeparationState:
    s_pol = state.s_pol + state.rho_pol * (state.r_d - state.f_d)
    s_mul = state.s_mul + state.rho * (state.obs - state.r_d - state.r_s)
    k = state.k + 1
    return dataclasses.replace(
        state, s_pol=s_pol, s_mul=s_mul, k=k,
        rho=penalty(state.rho0, state.growth, k),
        rho_pol=penalty(state.rho_pol0, state.growth, k))


def prepare(stack: PolarizedStack, params: SeparationParams):
    """Front end shared by ``separate`` and ``inspect``."""
    maps = fit_trs(stack)
    raw = raw_components(maps)
    chro = chromaticity(raw.raw_d)
    classes = classify_pixels(maps, raw, params.tau_s)
    clusters = build_clusters(chro, classes, params.t, params.min_cluster_size)
    return maps, raw, chro, classes, clusters


def separate(stack: PolarizedStack, params: SeparationParams | None = None,
             callback=None) -> SeparationResult:
    params = params or SeparationParams()
    maps, raw, _, classes, clusters = prepare(stack, params)
    return run_admm(maps, raw, clusters, params,
                    diagnostics={"pure_diffuse_pixels": classes.n_pure,
                                 "trs_clamped": maps.clamp_count,
                                 "raw_d_clamped": raw.clamp_count},
                    callback=callback)


def run_admm(maps: TRSMaps, raw: RawComponents, clusters: ClusterSet,
             params: SeparationParams, diagnostics: dict | None = None,
             callback=None) -> SeparationResult:
    """Outer loop. ``callback(record, before, after)`` is called once per
    iteration with the state before the iteration and after its multiplier
    update."""
    h, w, _ = maps.i_c.shape
    n = h * w
    scale = np.sqrt(3.0 * n)
    obs = maps.i_c
    zeros = np.zeros_like(obs)
    state = SeparationState(
        obs=obs, r_d=raw.raw_d.copy(), r_s=raw.raw_s.copy(), s_mul=zeros, s_pol=zeros.copy(),
        rho=params.rho0, rho_pol=params.rho_pol0, lam=update_lambda(raw.raw_s), f_d=raw.raw_d,
        rho0=params.rho0, rho_pol0=params.rho_pol0, growth=params.penalty_growth)
    rpca_opts = params.rpca_options()
    history = []
    stop = MAX_ITER
    pgm_failed = pgm_unconverged = 0

    for it in range(1, params.max_iter + 1):
        before = state
        pgm = pgm_apply(state.r_d, clusters, rpca_opts, params.threads)
        pgm_failed += pgm.n_failed
        pgm_unconverged += pgm.n_unconverged
        f_d = pgm.image
        r_d = solve_rd(f_d, state.y_pol, obs, state.r_s, state.y, state.rho_pol, state.rho,
                       params.solver, x0=state.r_d)
        lam = update_lambda(state.r_s)
        n_s = active_specular_count(state.r_s)
        r_s = solve_rs(obs, r_d, state.y, lam, state.rho)
        state = dataclasses.replace(state, r_d=r_d, r_s=r_s, f_d=f_d, lam=lam)
        new = update_multipliers(state)
        rec = IterationRecord(
            k=it,
            delta_s=float(np.linalg.norm(new.s_mul - state.s_mul) / scale),
            delta_s_pol=float(np.linalg.norm(new.s_pol - state.s_pol) / scale),
            primal=float(np.linalg.norm(obs - r_d - r_s) / scale),
            coupling=float(np.linalg.norm(r_d - f_d) / scale),
            rho=state.rho, rho_pol=state.rho_pol, lam=float(lam), n_s=n_s)
        history.append(rec)
        state = new
        if callback is not None:
            callback(rec, before, state)
        if rec.delta_s < params.epsilon and rec.delta_s_pol < params.epsilon:
            stop = CONVERGED
            break

    if params.consistent_output:
        diffuse = np.maximum(obs - state.r_s, 0.0)
    else:
        diffuse = np.maximum(state.r_d, 0.0)
    diag = dict(diagnostics or {})
    diag.update(pgm_failed_clusters=pgm_failed, pgm_unconverged_clusters=pgm_unconverged,
                merged_pixels=int(np.count_nonzero(clusters.merged)))
    return SeparationResult(
        diffuse=diffuse, specular=state.r_s.copy(), iterations=len(history), stop_reason=stop,
        history=history, params=params.to_dict(), raw=raw, n_clusters=clusters.n_clusters,
        diagnostics=diag)


def write_history_csv(history, path) -> None:
    names = [f.name for f in dataclasses.fields(IterationRecord)]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=names)
        wr.writeheader()
        for rec in history:
            wr.writerow(dataclasses.asdict(rec))

"""
Auto-conditioned stepsize schedulers.

Base methods (PDHG, ADMM) and accelerated methods share one recursion; they
differ only in the curvature term entering the caps: ``4 L^2`` for the base
methods and ``4 mu_d L_smooth + 4 L^2`` for the accelerated ones.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..core.estimators import CurvatureHistory
from ..utils.config import BETA_MAX
from ..utils.errors import ConfigError, SchedulerError
from ..utils.logger import get_logger

logger = get_logger("solvers.scheduler")

AUDIT_SLACK = 1e-12
LOWER_BOUND_SLACK = 1e-9
MAX_HALVINGS = 200


@dataclass(frozen=True)
class SchedulerConfig:
    """Hyper-parameters of the stepsize policy."""

    mu_d: float
    beta: float = BETA_MAX
    alpha: float = 0.5
    zeta: float = 1.0
    eta1: Optional[float] = None
    initial_line_search: bool = False
    debug_checks: bool = False

    def __post_init__(self) -> None:
        if not self.mu_d > 0.0:
            raise ConfigError(f"mu_d out of range: {self.mu_d} (must be > 0)")
        if not 0.0 < self.beta <= BETA_MAX:
            raise ConfigError(
                f"beta out of range: {self.beta} (must be in (0, {BETA_MAX:.5f}])"
            )
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha out of range: {self.alpha} (must be in (0, 1])")
        if not self.zeta > 0.0:
            raise ConfigError(f"zeta out of range: {self.zeta} (must be > 0)")
        if self.eta1 is not None and not self.eta1 > 0.0:
            raise ConfigError(f"eta1 out of range: {self.eta1} (must be > 0)")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SchedulerConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if known.get("beta") is None:
            known.pop("beta", None)
        if "target_eps" in data and data["target_eps"] is not None:
            if data.get("D_Y") is None:
                raise ConfigError("target_eps needs D_Y to set mu_d")
            known["mu_d"] = data["target_eps"] / data["D_Y"] ** 2
        if known.get("mu_d") is None:
            raise ConfigError("scheduler.mu_d is required")
        return cls(**known)

    @classmethod
    def from_target(cls, eps: float, D_Y: float, **kwargs: Any) -> "SchedulerConfig":
        """Dual smoothing ``mu_d = eps / D_Y^2`` for a bounded dual domain."""
        if eps <= 0.0 or D_Y <= 0.0:
            raise ConfigError(f"target needs eps > 0 and D_Y > 0, got {eps}, {D_Y}")
        return cls(mu_d=eps / (D_Y * D_Y), **kwargs)

    def with_mu(self, mu_d: float) -> "SchedulerConfig":
        return replace(self, mu_d=mu_d)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StepHistory:
    """Complete stepsize record of a run, as consumed by the auditor."""

    mu_d: float
    beta: float
    alpha: float
    accelerated: bool
    etas: List[float]
    taus: List[float]
    tilde_taus: List[float] = field(default_factory=list)
    op_estimates: List[float] = field(default_factory=list)
    smooth_estimates: List[float] = field(default_factory=list)
    maxima: List[float] = field(default_factory=list)


def init_eta1(
    config: SchedulerConfig, op_seed: float, smooth_seed: float = 0.0
) -> float:
    """
    eta1 = zeta mu_d / (4 (1 - beta) (L_op0^2 + mu_d L_smooth0)).

    A user-supplied eta1 wins; a zero seed falls back to it.

    Raises:
        SchedulerError: If neither a positive seed nor a user eta1 exists
    """
    if config.eta1 is not None:
        return float(config.eta1)
    if op_seed < 0.0 or smooth_seed < 0.0:
        raise SchedulerError(f"negative curvature seed ({op_seed}, {smooth_seed})")
    curvature0 = op_seed * op_seed + config.mu_d * smooth_seed
    if curvature0 <= 0.0:
        raise SchedulerError(
            "zero curvature seed and no eta1 supplied; set scheduler.eta1 explicitly"
        )
    return config.zeta * config.mu_d / (4.0 * (1.0 - config.beta) * curvature0)


def pdhg_init_eta1(config: SchedulerConfig, seed_norm: float) -> float:
    """eta1 = zeta mu_d / (4 (1 - beta) L_{A,0}^2)."""
    return init_eta1(config, seed_norm)


class SchedulerState:
    """
    Stepsize state machine owned by one solver loop.

    ``etas[i]`` and ``taus[i]`` hold eta_{i+1}, tau_{i+1}. After ``t``
    calls to a step function, steps 1..t+1 are known and the history holds
    estimates L_1..L_t.
    """

    def __init__(self, config: SchedulerConfig, accelerated: bool = False):
        self.config = config
        self.accelerated = accelerated
        self.etas: List[float] = []
        self.taus: List[float] = []
        self.tilde_taus: List[float] = []
        self.history: Optional[CurvatureHistory] = None
        self.logger = logger

    @property
    def initialized(self) -> bool:
        return self.history is not None

    def start(self, eta1: float) -> None:
        """Fix eta1 and set tau_1 = 0 (and tilde tau_1 = 0)."""
        if not eta1 > 0.0:
            raise SchedulerError(f"eta1 must be positive, got {eta1}")
        self.etas = [float(eta1)]
        self.taus = [0.0]
        self.tilde_taus = [0.0] if self.accelerated else []
        self.history = CurvatureHistory(
            self.config.mu_d, self.config.beta, float(eta1), self.accelerated
        )

    @property
    def t(self) -> int:
        """Index of the step currently available (eta_t, tau_t)."""
        return len(self.etas)

    @property
    def eta(self) -> float:
        return self.etas[-1]

    @property
    def tau(self) -> float:
        return self.taus[-1]

    @property
    def tilde_tau(self) -> Optional[float]:
        return self.tilde_taus[-1] if self.accelerated else None

    @property
    def eta1(self) -> float:
        return self.etas[0]

    def advance(self, op_recent: float, smooth_recent: float = 0.0) -> Tuple[float, float]:
        """
        Consume L_{t} (and L_smooth_{t}) and produce (eta_{t+1}, tau_{t+1}).

        Raises:
            SchedulerError: If called before ``start``
        """
        if self.history is None:
            raise SchedulerError("scheduler stepped before initialization")
        if not self.accelerated and smooth_recent != 0.0:
            raise SchedulerError("base scheduler received a smoothness estimate")

        cfg = self.config
        mu = cfg.mu_d
        self.history.push(op_recent, smooth_recent)
        if self.accelerated:
            curv = 4.0 * mu * smooth_recent + 4.0 * op_recent * op_recent
        else:
            curv = 4.0 * op_recent * op_recent

        step = len(self.etas) + 1
        if step == 2:
            eta = (1.0 - cfg.beta) * self.etas[0]
            if curv > 0.0:
                eta = min(eta, mu / curv)
            tau = mu
        else:
            eta_prev = self.etas[-1]
            tau_prev = self.taus[-1]
            tau_prev2 = self.taus[-2]
            eta = min(
                (4.0 / 3.0) * eta_prev, ((tau_prev2 + mu) / tau_prev) * eta_prev
            )
            if curv > 0.0:
                eta = min(eta, tau_prev / curv)
            tau = tau_prev + 0.5 * mu * (
                cfg.alpha + (1.0 - cfg.alpha) * eta * curv / tau_prev
            )

        self.etas.append(eta)
        self.taus.append(tau)
        if self.accelerated:
            self.tilde_taus.append(tau / mu)

        if cfg.debug_checks:
            problems = check_invariants(self.snapshot())
            if problems:
                raise SchedulerError(f"scheduler invariant broken: {problems[0]}")
        return eta, tau

    def snapshot(self) -> StepHistory:
        history = self.history
        return StepHistory(
            mu_d=self.config.mu_d,
            beta=self.config.beta,
            alpha=self.config.alpha,
            accelerated=self.accelerated,
            etas=list(self.etas),
            taus=list(self.taus),
            tilde_taus=list(self.tilde_taus),
            op_estimates=list(history.op_estimates) if history else [],
            smooth_estimates=list(history.smooth_estimates) if history else [],
            maxima=list(history.maxima) if history else [],
        )


def pdhg_step(state: SchedulerState, L_recent: float) -> Tuple[float, float]:
    """Next (eta, tau) of AC-PDHG from the latest operator estimate."""
    return state.advance(L_recent)


def admm_step(state: SchedulerState, L_recent: float) -> Tuple[float, float]:
    """Next (eta, tau) of AC-ADMM; the recursion is the PDHG one with K."""
    return state.advance(L_recent)


def accel_step(
    state: SchedulerState, L_op_recent: float, L_smooth_recent: float
) -> Tuple[float, float, float]:
    """Next (eta, tau, tilde tau) of the accelerated methods."""
    if not state.accelerated:
        raise SchedulerError("accel_step needs an accelerated scheduler")
    eta, tau = state.advance(L_op_recent, L_smooth_recent)
    return eta, tau, state.tilde_taus[-1]


def _violated(lhs: float, rhs: float) -> bool:
    return lhs - rhs > AUDIT_SLACK * max(1.0, abs(rhs))


def audit_conditions(history: StepHistory) -> List[str]:
    """
    Check the stepsize conditions behind the convergence guarantees.

    Returns:
        One message per violated inequality; empty when all hold
    """
    out: List[str] = []
    etas, taus, mu, beta = history.etas, history.taus, history.mu_d, history.beta
    L = history.op_estimates
    Lf = history.smooth_estimates if history.accelerated else [0.0] * len(L)
    ttaus = history.tilde_taus

    if taus and taus[0] != 0.0:
        out.append("τ_1 = 0 at t=1")
    if history.accelerated and ttaus and ttaus[0] != 0.0:
        out.append("τ̃_1 = 0 at t=1")

    for t in range(2, len(etas) + 1):
        eta, eta_prev = etas[t - 1], etas[t - 2]
        L_prev, Lf_prev = L[t - 2], Lf[t - 2]
        if t == 2:
            if _violated(eta, (1.0 - beta) * eta_prev):
                out.append("η_t ≤ (1−β)η_{t−1} at t=2")
            curv = 4.0 * L_prev * L_prev + 4.0 * mu * Lf_prev
            if curv > 0.0 and _violated(eta, mu / curv):
                if history.accelerated:
                    out.append("η_t ≤ (4L²_{t−1}/μ_d + 4L_{f,t−1})^{-1} at t=2")
                else:
                    out.append("η_t ≤ μ_d/(4L²_{t−1}) at t=2")
            if abs(taus[1] - mu) > AUDIT_SLACK * max(1.0, mu):
                out.append("τ_2 = μ_d at t=2")
            continue

        tau_prev, tau_prev2 = taus[t - 2], taus[t - 3]
        if _violated(eta, 2.0 * (1.0 - beta) ** 2 * eta_prev):
            out.append(f"η_t ≤ 2(1−β)²η_{{t−1}} at t={t}")
        if _violated(eta, (tau_prev2 + mu) / tau_prev * eta_prev):
            out.append(f"η_t ≤ (τ_{{t−2}}+μ_d)/τ_{{t−1}}·η_{{t−1}} at t={t}")
        if history.accelerated:
            tt_prev, tt_prev2 = ttaus[t - 2], ttaus[t - 3]
            if _violated(eta, (tt_prev2 + 1.0) / tt_prev * eta_prev):
                out.append(f"η_t ≤ (τ̃_{{t−2}}+1)/τ̃_{{t−1}}·η_{{t−1}} at t={t}")
            load = 4.0 * L_prev * L_prev / tau_prev + 4.0 * Lf_prev / tt_prev
            if load > 0.0 and _violated(eta, 1.0 / load):
                out.append(
                    "η_t ≤ (4L²_{t−1}/τ_{t−1} + 4L_{f,t−1}/τ̃_{t−1})^{-1}"
                    f" at t={t}"
                )
        elif L_prev > 0.0 and _violated(eta, tau_prev / (4.0 * L_prev * L_prev)):
            out.append(f"η_t ≤ τ_{{t−1}}/(4L²_{{t−1}}) at t={t}")

    if history.accelerated:
        for t, (tau, ttau) in enumerate(zip(taus, ttaus), start=1):
            if abs(ttau * mu - tau) > AUDIT_SLACK * max(1.0, tau):
                out.append(f"τ̃_t = τ_t/μ_d at t={t}")
    return out


def check_invariants(history: StepHistory) -> List[str]:
    """
    Check the derived properties every policy run must satisfy: tau growth
    and ceiling, the stepsize lower bound and nonnegative dual-average weights.
    """
    out: List[str] = []
    etas, taus, mu, alpha = history.etas, history.taus, history.mu_d, history.alpha
    for t in range(2, len(taus) + 1):
        tau, tau_prev = taus[t - 1], taus[t - 2]
        if tau < tau_prev:
            out.append(f"τ nondecreasing at t={t}")
        if tau - tau_prev > 0.5 * mu * (1.0 + AUDIT_SLACK):
            out.append(f"τ_t − τ_{{t−1}} ≤ μ_d/2 at t={t}")
        if tau > t * mu / 2.0 * (1.0 + AUDIT_SLACK):
            out.append(f"τ_t ≤ tμ_d/2 at t={t}")

    # maxima[i] is the running max after i estimates; eta_t uses maxima[t-1].
    for t in range(2, len(etas) + 1):
        if t - 1 >= len(history.maxima):
            break
        hat = history.maxima[t - 1]
        required = 3.0 + alpha * (t - 3)
        if history.accelerated:
            achieved = etas[t - 1] * 12.0 * hat
        else:
            achieved = etas[t - 1] * 12.0 * hat * hat / mu
        if achieved < required - LOWER_BOUND_SLACK * max(1.0, required):
            out.append(f"η_t ≥ (3+α(t−3))/(12 L̂_{{t−1}}) at t={t}")

    for t in range(1, len(etas) - 1):
        weight = etas[t] * (mu + taus[t - 1]) - etas[t + 1] * taus[t]
        if weight < -AUDIT_SLACK * max(1.0, etas[t] * (mu + taus[t - 1])):
            out.append(f"dual average weight nonnegative at t={t}")
    return out


def initial_line_search(
    first_step: Callable[[float], Tuple[float, float]],
    eta1: float,
    mu_d: float,
    max_halvings: int = MAX_HALVINGS,
) -> Tuple[float, int]:
    """
    Halve eta1 until ``eta1 <= 2 / (5 (L_1^2 / mu_d + L_smooth_1))``.

    Args:
        first_step: Runs iteration 1 under a trial eta1 and returns
            (L_op_1, L_smooth_1)
        eta1: Starting value
        mu_d: Dual smoothing weight

    Returns:
        Accepted eta1 and the number of halvings

    Raises:
        SchedulerError: After ``max_halvings`` unsuccessful halvings
    """
    halvings = 0
    while True:
        L1, Lf1 = first_step(eta1)
        load = L1 * L1 + mu_d * Lf1
        if load <= 0.0 or 5.0 * eta1 * load <= 2.0 * mu_d:
            logger.info(f"initial line search accepted eta1={eta1:.6g} after {halvings} halvings")
            return eta1, halvings
        if halvings >= max_halvings:
            raise SchedulerError(
                f"initial line search exceeded {max_halvings} halvings (eta1={eta1:.3g})"
            )
        eta1 *= 0.5
        halvings += 1

"""Joint regression model: two rectangular-beta margins tied by a copula.

Each margin mean follows a logit regression with optional group-level
random intercepts,

    mu_ji = expit(x_ji' beta_j + b_j,k(i)),      b_jk ~ N(0, sigma_j^2),

margin j has free dispersion rho_j and mixing weight phi_j (phi pinned at
0 turns the margin into a plain mean-precision beta), and the pair
(y_1i, y_2i) is coupled through a one-parameter copula density evaluated
at the margin probability transforms F_j(y_ji).

Priors: beta ~ N(0, sd^2) per coefficient, sigma ~ half-t, phi ~ U(0,1),
rho ~ Gamma, tau uniform over the family's admissible range.  All
normalizing constants are kept so the log-posterior is usable for
marginal-likelihood estimation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .copulas import (CopulaFamily, CopulaSpec, log_density_kernel,
                      sample_pairs, theta_from_tau)
from .rectbeta import quantile_kernel

__all__ = [
    "MARGIN_BETA",
    "MARGIN_RECTBETA",
    "Dataset",
    "ModelSpec",
    "PriorConfig",
    "ParameterState",
    "JointDensity",
    "standard_variants",
    "margin_mean",
    "joint_loglik",
    "log_prior",
    "log_posterior_unnormalized",
    "simulate_dataset",
]

MARGIN_BETA = "beta"
MARGIN_RECTBETA = "rectbeta"

# margin probability transforms are clamped into this interval before the
# copula density sees them; clamp events are counted on the JointDensity
PIT_CLAMP = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Dataset:
    """Paired responses with per-margin design matrices and optional groups.

    Responses must lie strictly inside (0, 1).  Design matrices carry the
    intercept as their first column.  Group codes, when present, must be
    dense integers 0..K-1.
    """

    y1: np.ndarray
    y2: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    group: np.ndarray | None = None
    n_groups: int = 0

    def __post_init__(self) -> None:
        self.y1 = np.asarray(self.y1, dtype=float)
        self.y2 = np.asarray(self.y2, dtype=float)
        self.x1 = np.atleast_2d(np.asarray(self.x1, dtype=float))
        self.x2 = np.atleast_2d(np.asarray(self.x2, dtype=float))
        n = self.y1.shape[0]
        if self.y2.shape != (n,) or self.x1.shape[0] != n or self.x2.shape[0] != n:
            raise ValueError("response and design lengths disagree")
        for name, y in (("y1", self.y1), ("y2", self.y2)):
            bad = np.where(~np.isfinite(y) | (y <= 0.0) | (y >= 1.0))[0]
            if bad.size:
                raise ValueError(
                    f"{name} must lie strictly inside (0, 1); "
                    f"observation {bad[0] + 1} is {y[bad[0]]!r}"
                )
        for name, x in (("x1", self.x1), ("x2", self.x2)):
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.group is not None:
            self.group = np.asarray(self.group)
            if self.group.shape != (n,):
                raise ValueError("group length disagrees with responses")
            if not np.issubdtype(self.group.dtype, np.integer):
                raise ValueError("group codes must be integers")
            k = int(self.group.max()) + 1 if n else 0
            if self.n_groups == 0:
                self.n_groups = k
            seen = np.unique(self.group)
            if seen[0] < 0 or not np.array_equal(seen, np.arange(self.n_groups)):
                raise ValueError(
                    f"group codes must be dense 0..K-1; saw {seen.tolist()[:10]}"
                )

    @property
    def n(self) -> int:
        return self.y1.shape[0]

    @property
    def p1(self) -> int:
        return self.x1.shape[1]

    @property
    def p2(self) -> int:
        return self.x2.shape[1]


@dataclass
class ModelSpec:
    """Which margin forms, which copula, and whether groups get intercepts."""

    margin1: str = MARGIN_RECTBETA
    margin2: str = MARGIN_RECTBETA
    copula: CopulaFamily = CopulaFamily.GAUSSIAN
    random_intercepts: bool = False

    def __post_init__(self) -> None:
        for m in (self.margin1, self.margin2):
            if m not in (MARGIN_BETA, MARGIN_RECTBETA):
                raise ValueError(f"unknown margin family {m!r}")
        self.copula = CopulaFamily(self.copula)

    @property
    def has_tau(self) -> bool:
        return self.copula is not CopulaFamily.INDEPENDENCE

    def margin_is_rect(self, j: int) -> bool:
        return (self.margin1 if j == 1 else self.margin2) == MARGIN_RECTBETA


def standard_variants(random_intercepts: bool = False) -> dict[str, ModelSpec]:
    """The five model variants used throughout: beta/rect-beta margins
    crossed with independence or one of the three copulas."""
    mk = lambda m, c: ModelSpec(m, m, c, random_intercepts)
    return {
        "beta_indep": mk(MARGIN_BETA, CopulaFamily.INDEPENDENCE),
        "rectbeta_indep": mk(MARGIN_RECTBETA, CopulaFamily.INDEPENDENCE),
        "rectbeta_gaussian": mk(MARGIN_RECTBETA, CopulaFamily.GAUSSIAN),
        "rectbeta_gumbel": mk(MARGIN_RECTBETA, CopulaFamily.GUMBEL),
        "rectbeta_clayton": mk(MARGIN_RECTBETA, CopulaFamily.CLAYTON),
    }


@dataclass
class PriorConfig:
    """Hyperparameters; defaults are deliberately weakly informative."""

    beta_sd: float = 100.0
    sigma_scale: float = 2.5
    sigma_df: float = 3.0
    rho_shape: float = 1e-4
    rho_rate: float = 1e-4


@dataclass
class ParameterState:
    beta1: np.ndarray
    beta2: np.ndarray
    phi1: float
    phi2: float
    rho1: float
    rho2: float
    sigma1: float | None = None
    sigma2: float | None = None
    tau: float | None = None
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.beta1 = np.atleast_1d(np.asarray(self.beta1, dtype=float))
        self.beta2 = np.atleast_1d(np.asarray(self.beta2, dtype=float))
        if self.b1 is not None:
            self.b1 = np.atleast_1d(np.asarray(self.b1, dtype=float))
        if self.b2 is not None:
            self.b2 = np.atleast_1d(np.asarray(self.b2, dtype=float))


def margin_mean(beta, x, b=None, group=None):
    """Unit-level means expit(x beta + b[group]); b optional."""
    eta = np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float)
    if b is not None:
        if group is None:
            raise ValueError("group codes are required with random intercepts")
        eta = eta + np.asarray(b, dtype=float)[group]
    return special.expit(eta)


class JointDensity:
    """Precomputed evaluation context for one dataset under one model.

    Keeps the fixed response transforms around so repeated likelihood
    evaluations inside the sampler stay cheap, and counts how many margin
    probability transforms had to be clamped away from 0/1 before the
    copula density saw them (a fit-quality signal surfaced with the fit).
    """

    def __init__(self, data: Dataset, spec: ModelSpec,
                 priors: PriorConfig | None = None) -> None:
        if spec.random_intercepts and data.group is None:
            raise ValueError("model has random intercepts but data carry no groups")
        self.data = data
        self.spec = spec
        self.priors = priors or PriorConfig()
        self.clamp_events = 0
        self._ly1 = np.log(data.y1)
        self._l1y1 = np.log1p(-data.y1)
        self._ly2 = np.log(data.y2)
        self._l1y2 = np.log1p(-data.y2)
        # designs with few distinct rows (factorial simulations) let the
        # shape work run on unique rows only; random intercepts make eta
        # vary within a cell, so the shortcut is skipped there
        self._cells: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        if not spec.random_intercepts:
            for j, x in ((1, data.x1), (2, data.x2)):
                xu, inv = np.unique(x, axis=0, return_inverse=True)
                if xu.shape[0] <= 32:
                    self._cells[j] = (xu, np.ravel(inv))

    # -- likelihood ---------------------------------------------------------

    def _margin_terms(self, j: int, state: ParameterState, want_cdf: bool):
        data = self.data
        if j == 1:
            x, beta, b = data.x1, state.beta1, state.b1
            y, ly, l1y = data.y1, self._ly1, self._l1y1
            phi, rho = state.phi1, state.rho1
        else:
            x, beta, b = data.x2, state.beta2, state.b2
            y, ly, l1y = data.y2, self._ly2, self._l1y2
            phi, rho = state.phi2, state.rho2
        cells = self._cells.get(j)
        if cells is not None:
            xu, inv = cells
            mu_u = special.expit(xu @ beta)
            if np.any(mu_u <= 0.0) or np.any(mu_u >= 1.0):
                return None, None
            om_u = phi * (1.0 - np.abs(2.0 * mu_u - 1.0))
            de_u = (mu_u - 0.5 * om_u) / (1.0 - om_u)
            k1_u = rho * de_u
            k2_u = rho - k1_u
            c_u = (special.gammaln(rho) - special.gammaln(k1_u)
                   - special.gammaln(k2_u))
            omega, k1, k2 = om_u[inv], k1_u[inv], k2_u[inv]
            log_core = (k1 - 1.0) * ly + (k2 - 1.0) * l1y + c_u[inv]
        else:
            eta = x @ beta
            if self.spec.random_intercepts:
                eta = eta + b[data.group]
            mu = special.expit(eta)
            if np.any(mu <= 0.0) or np.any(mu >= 1.0):
                return None, None
            omega = phi * (1.0 - np.abs(2.0 * mu - 1.0))
            delta = (mu - 0.5 * omega) / (1.0 - omega)
            k1 = rho * delta
            k2 = rho - k1
            log_core = (
                (k1 - 1.0) * ly
                + (k2 - 1.0) * l1y
                + special.gammaln(rho)
                - special.gammaln(k1)
                - special.gammaln(k2)
            )
        # logaddexp(-inf, x) = x, so phi = 0 collapses to the plain beta
        with np.errstate(divide="ignore"):
            logf = np.logaddexp(np.log(omega), np.log1p(-omega) + log_core)
        u = None
        if want_cdf:
            u = omega * y + (1.0 - omega) * special.betainc(k1, k2, y)
            n_clamped = int(np.sum(u < PIT_CLAMP) + np.sum(u > 1.0 - PIT_CLAMP))
            if n_clamped:
                self.clamp_events += n_clamped
                u = np.clip(u, PIT_CLAMP, 1.0 - PIT_CLAMP)
        return logf, u

    def margin_block(self, j: int, state: ParameterState):
        """(sum of margin log-pdf, clamped probability transforms) for one
        margin, or None when the linear predictor saturates the mean.  The
        transforms are None under independence (nothing downstream needs
        them)."""
        logf, u = self._margin_terms(j, state, self.spec.has_tau)
        if logf is None:
            return None
        return float(np.sum(logf)), u

    def copula_block(self, u, v, tau: float) -> float:
        theta = theta_from_tau(self.spec.copula, tau)
        return float(np.sum(log_density_kernel(self.spec.copula, theta, u, v)))

    def re_block(self, b: np.ndarray, sigma: float) -> float:
        k = b.shape[0]
        return (
            -0.5 * k * _LOG_2PI
            - k * math.log(sigma)
            - float(b @ b) / (2.0 * sigma * sigma)
        )

    def _check_state(self, state: ParameterState) -> None:
        if self.spec.has_tau and state.tau is None:
            raise ValueError("state.tau is required under a copula model")
        if self.spec.random_intercepts and (
            state.b1 is None or state.b2 is None
            or state.sigma1 is None or state.sigma2 is None
        ):
            raise ValueError(
                "random-intercept model needs b1, b2, sigma1, sigma2 in the state"
            )

    def loglik(self, state: ParameterState) -> float:
        """Joint log-likelihood (copula + margins + random-effect terms)."""
        self._check_state(state)
        mb1 = self.margin_block(1, state)
        if mb1 is None:
            return -math.inf
        mb2 = self.margin_block(2, state)
        if mb2 is None:
            return -math.inf
        cop = (self.copula_block(mb1[1], mb2[1], state.tau)
               if self.spec.has_tau else 0.0)
        if self.spec.random_intercepts:
            re1 = self.re_block(state.b1, state.sigma1)
            re2 = self.re_block(state.b2, state.sigma2)
        else:
            re1 = re2 = 0.0
        return compose_loglik(mb1[0], mb2[0], cop, re1, re2)

    # -- prior --------------------------------------------------------------

    def _prior_consts(self):
        pc = getattr(self, "_pc", None)
        if pc is None:
            pr = self.priors
            pc = self._pc = (
                -0.5 * _LOG_2PI - math.log(pr.beta_sd),          # per-beta const
                0.5 / (pr.beta_sd * pr.beta_sd),                 # beta quadratic
                pr.rho_shape * math.log(pr.rho_rate)
                - float(special.gammaln(pr.rho_shape)),          # gamma const
                math.log(2.0)
                + float(special.gammaln((pr.sigma_df + 1.0) / 2.0))
                - float(special.gammaln(pr.sigma_df / 2.0))
                - 0.5 * math.log(pr.sigma_df * math.pi)
                - math.log(pr.sigma_scale),                      # half-t const
            )
        return pc

    def log_prior(self, state: ParameterState) -> float:
        pr = self.priors
        spec = self.spec
        c_beta, q_beta, c_rho, c_sig = self._prior_consts()
        total = 0.0
        for beta in (state.beta1, state.beta2):
            if not np.all(np.isfinite(beta)):
                return -math.inf
            total += beta.size * c_beta - q_beta * float(beta @ beta)
        for j, phi in ((1, state.phi1), (2, state.phi2)):
            if spec.margin_is_rect(j):
                if not 0.0 <= phi < 1.0:
                    return -math.inf
                # U(0,1): zero contribution
            elif phi != 0.0:
                return -math.inf
        for rho in (state.rho1, state.rho2):
            if not (rho > 0.0 and math.isfinite(rho)):
                return -math.inf
            total += (c_rho + (pr.rho_shape - 1.0) * math.log(rho)
                      - pr.rho_rate * rho)
        if spec.random_intercepts:
            for sigma in (state.sigma1, state.sigma2):
                if sigma is None or not (sigma > 0.0 and math.isfinite(sigma)):
                    return -math.inf
                total += c_sig - ((pr.sigma_df + 1.0) / 2.0) * math.log1p(
                    (sigma / pr.sigma_scale) ** 2 / pr.sigma_df)
        if spec.has_tau:
            tau = state.tau
            if tau is None or not math.isfinite(tau):
                return -math.inf
            if spec.copula is CopulaFamily.GAUSSIAN:
                if not -1.0 < tau < 1.0:
                    return -math.inf
                total += math.log(0.5)  # U(-1, 1)
            else:
                if not 0.0 <= tau < 1.0:
                    return -math.inf
                # U(0, 1): zero contribution
        return total

    def log_posterior(self, state: ParameterState) -> float:
        lp = self.log_prior(state)
        if lp == -math.inf:
            return lp
        return lp + self.loglik(state)


def compose_loglik(sum1: float, sum2: float, cop: float,
                   re1: float, re2: float) -> float:
    """Single composition point so cached and fresh evaluations agree
    bitwise; +inf and NaN (only reachable through density spikes at the
    support edge or inf - inf pathologies) map to the rejection sentinel,
    since a proposal must never be auto-accepted on a numerical blowup."""
    total = sum1 + sum2 + cop + re1 + re2
    if math.isnan(total) or total == math.inf:
        return -math.inf
    return total


# ---------------------------------------------------------------------------
# module-level convenience wrappers
# ---------------------------------------------------------------------------

def joint_loglik(state: ParameterState, data: Dataset, spec: ModelSpec) -> float:
    return JointDensity(data, spec).loglik(state)


def log_prior(state: ParameterState, spec: ModelSpec,
              priors: PriorConfig | None = None) -> float:
    jd = JointDensity.__new__(JointDensity)
    jd.spec = spec
    jd.priors = priors or PriorConfig()
    return JointDensity.log_prior(jd, state)


def log_posterior_unnormalized(state: ParameterState, data: Dataset,
                               spec: ModelSpec,
                               priors: PriorConfig | None = None) -> float:
    return JointDensity(data, spec, priors).log_posterior(state)


# ---------------------------------------------------------------------------
# forward simulation
# ---------------------------------------------------------------------------

def simulate_dataset(truth: ParameterState, spec: ModelSpec, design: Dataset,
                     rng: np.random.Generator) -> Dataset:
    """Simulate responses at the design's covariates under known parameters.

    Group intercepts are taken from `truth` when present, otherwise drawn
    fresh from N(0, sigma_j^2).  Pairs come from the copula and are pushed
    through the margin quantile.  rng order: b1, b2 (when drawn), then the
    copula pairs.
    """
    n = design.n
    b1, b2 = truth.b1, truth.b2
    if spec.random_intercepts:
        if b1 is None:
            b1 = rng.normal(0.0, truth.sigma1, design.n_groups)
        if b2 is None:
            b2 = rng.normal(0.0, truth.sigma2, design.n_groups)
    tau = truth.tau if spec.has_tau else 0.0
    if spec.has_tau and tau is None:
        raise ValueError("truth.tau is required under a copula model")
    pairs = sample_pairs(CopulaSpec(spec.copula, tau), n, rng)
    u = np.clip(pairs[:, 0], 1e-15, 1.0 - 1e-15)
    v = np.clip(pairs[:, 1], 1e-15, 1.0 - 1e-15)

    mu1 = margin_mean(truth.beta1, design.x1,
                      b1 if spec.random_intercepts else None, design.group)
    mu2 = margin_mean(truth.beta2, design.x2,
                      b2 if spec.random_intercepts else None, design.group)
    if np.any(mu1 <= 0.0) or np.any(mu1 >= 1.0) or np.any(mu2 <= 0.0) or np.any(mu2 >= 1.0):
        raise ValueError("linear predictor saturated the mean at 0 or 1")
    y1 = quantile_kernel(u, mu1, truth.phi1, truth.rho1)
    y2 = quantile_kernel(v, mu2, truth.phi2, truth.rho2)
    tiny = np.finfo(float).tiny
    y1 = np.clip(y1, tiny, 1.0 - 1e-16)
    y2 = np.clip(y2, tiny, 1.0 - 1e-16)
    return Dataset(y1, y2, design.x1, design.x2, design.group, design.n_groups)

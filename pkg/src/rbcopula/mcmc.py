"""Adaptive random-walk Metropolis-within-Gibbs for the joint model.

Parameters are mapped to an unconstrained scale (log for rho and sigma,
logit for phi and the Archimedean tau, a symmetric logit onto (-1, 1) for
the Gaussian tau), proposals are Gaussian per block (each coefficient
vector is one block, every scalar and every random intercept its own
block), and step sizes adapt by Robbins-Monro during burn-in only, frozen
afterwards so the post-burn-in chain is a genuine Markov chain.

Expensive per-margin likelihood pieces are cached between proposals: a
proposal that only moves tau reuses both margins' stored sums and
probability transforms.  The cached composition goes through the same
block functions as a fresh evaluation, so the two agree bitwise (tested).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .copulas import CopulaFamily
from .model import (
    Dataset,
    JointDensity,
    ModelSpec,
    ParameterState,
    PriorConfig,
    compose_loglik,
)

__all__ = [
    "ChainConfig",
    "Transform",
    "Block",
    "ParameterLayout",
    "CachedPosterior",
    "Draws",
    "initial_state",
    "fit",
    "make_transformed_target",
    "psrf",
    "hpd_interval",
    "posterior_summary",
]


@dataclass
class ChainConfig:
    """Sampler budget.  Defaults suit a real analysis; simulation studies
    pass something smaller."""

    n_chains: int = 4
    n_iter: int = 40000
    burn_in: int = 15000
    thin: int = 25
    seed: int = 0
    target_accept: float = 0.44
    adapt_window: int = 25
    init_step: float = 0.2

    def __post_init__(self) -> None:
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1 or (self.n_iter - self.burn_in) < self.thin:
            raise ValueError("thinning leaves no retained draws")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be inside (0, 1)")
        if self.init_step <= 0 or self.adapt_window < 1:
            raise ValueError("init_step and adapt_window must be positive")

    @property
    def n_kept(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


class Transform(enum.IntEnum):
    IDENT = 0
    LOG = 1
    LOGIT = 2
    TAU_SYM = 3  # (-1, 1) via 2*expit(z) - 1


@dataclass(frozen=True)
class Block:
    """One proposal block and which cached pieces it invalidates."""

    name: str
    idx: np.ndarray
    dirty1: bool = False
    dirty2: bool = False
    dirty_re1: bool = False
    dirty_re2: bool = False
    dirty_cop: bool = False


@dataclass
class ParameterLayout:
    """Flat parameter vector layout for one model (names, transforms,
    proposal blocks, and the mapping to and from ParameterState)."""

    spec: ModelSpec
    p1: int
    p2: int
    n_groups: int = 0
    names: list[str] = field(init=False)
    transforms: np.ndarray = field(init=False)
    blocks: list[Block] = field(init=False)

    def __post_init__(self) -> None:
        spec = self.spec
        if spec.random_intercepts and self.n_groups < 1:
            raise ValueError("random intercepts need n_groups >= 1")
        names: list[str] = []
        codes: list[int] = []
        idx: dict[str, np.ndarray] = {}

        def add(key, labels, tcode):
            start = len(names)
            names.extend(labels)
            codes.extend([int(tcode)] * len(labels))
            idx[key] = np.arange(start, len(names))

        add("beta1", [f"beta1_{i}" for i in range(self.p1)], Transform.IDENT)
        add("beta2", [f"beta2_{i}" for i in range(self.p2)], Transform.IDENT)
        if spec.margin_is_rect(1):
            add("phi1", ["phi1"], Transform.LOGIT)
        if spec.margin_is_rect(2):
            add("phi2", ["phi2"], Transform.LOGIT)
        add("rho1", ["rho1"], Transform.LOG)
        add("rho2", ["rho2"], Transform.LOG)
        if spec.random_intercepts:
            add("sigma1", ["sigma1"], Transform.LOG)
            add("sigma2", ["sigma2"], Transform.LOG)
        if spec.has_tau:
            tcode = (Transform.TAU_SYM if spec.copula is CopulaFamily.GAUSSIAN
                     else Transform.LOGIT)
            add("tau", ["tau"], tcode)
        if spec.random_intercepts:
            add("b1", [f"b1_{k + 1}" for k in range(self.n_groups)],
                Transform.IDENT)
            add("b2", [f"b2_{k + 1}" for k in range(self.n_groups)],
                Transform.IDENT)

        self.names = names
        self.transforms = np.asarray(codes, dtype=np.int8)
        self._idx = idx
        self._m_log = self.transforms == Transform.LOG
        self._m_logit = self.transforms == Transform.LOGIT
        self._m_tau = self.transforms == Transform.TAU_SYM
        self._any_log = bool(self._m_log.any())
        self._any_logit = bool(self._m_logit.any())
        self._any_tau = bool(self._m_tau.any())

        blocks = [
            Block("beta1", idx["beta1"], dirty1=True, dirty_cop=True),
            Block("beta2", idx["beta2"], dirty2=True, dirty_cop=True),
        ]
        for key in ("phi1", "rho1"):
            if key in idx:
                blocks.append(Block(key, idx[key], dirty1=True, dirty_cop=True))
        for key in ("phi2", "rho2"):
            if key in idx:
                blocks.append(Block(key, idx[key], dirty2=True, dirty_cop=True))
        if spec.random_intercepts:
            blocks.append(Block("sigma1", idx["sigma1"], dirty_re1=True))
            blocks.append(Block("sigma2", idx["sigma2"], dirty_re2=True))
        if spec.has_tau:
            blocks.append(Block("tau", idx["tau"], dirty_cop=True))
        if spec.random_intercepts:
            for k in range(self.n_groups):
                blocks.append(Block(f"b1_{k + 1}", idx["b1"][k:k + 1],
                                    dirty1=True, dirty_re1=True,
                                    dirty_cop=True))
            for k in range(self.n_groups):
                blocks.append(Block(f"b2_{k + 1}", idx["b2"][k:k + 1],
                                    dirty2=True, dirty_re2=True,
                                    dirty_cop=True))
        self.blocks = blocks

    @property
    def d(self) -> int:
        return len(self.names)

    # -- vector <-> state -----------------------------------------------

    def natural_from_state(self, state: ParameterState) -> np.ndarray:
        x = np.empty(self.d)
        idx = self._idx
        x[idx["beta1"]] = state.beta1
        x[idx["beta2"]] = state.beta2
        if "phi1" in idx:
            x[idx["phi1"]] = state.phi1
        if "phi2" in idx:
            x[idx["phi2"]] = state.phi2
        x[idx["rho1"]] = state.rho1
        x[idx["rho2"]] = state.rho2
        if "sigma1" in idx:
            x[idx["sigma1"]] = state.sigma1
            x[idx["sigma2"]] = state.sigma2
        if "tau" in idx:
            x[idx["tau"]] = state.tau
        if "b1" in idx:
            x[idx["b1"]] = state.b1
            x[idx["b2"]] = state.b2
        return x

    def state_from_natural(self, x: np.ndarray) -> ParameterState:
        idx = self._idx
        sc = lambda key: float(x[idx[key][0]])
        return ParameterState(
            beta1=x[idx["beta1"]],
            beta2=x[idx["beta2"]],
            phi1=sc("phi1") if "phi1" in idx else 0.0,
            phi2=sc("phi2") if "phi2" in idx else 0.0,
            rho1=sc("rho1"),
            rho2=sc("rho2"),
            sigma1=sc("sigma1") if "sigma1" in idx else None,
            sigma2=sc("sigma2") if "sigma2" in idx else None,
            tau=sc("tau") if "tau" in idx else None,
            b1=x[idx["b1"]] if "b1" in idx else None,
            b2=x[idx["b2"]] if "b2" in idx else None,
        )

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        x = z.copy()
        if self._any_log:
            x[self._m_log] = np.exp(z[self._m_log])
        if self._any_logit:
            x[self._m_logit] = special.expit(z[self._m_logit])
        if self._any_tau:
            x[self._m_tau] = 2.0 * special.expit(z[self._m_tau]) - 1.0
        return x

    def z_from_natural(self, x: np.ndarray) -> np.ndarray:
        z = np.array(x, dtype=float, copy=True)
        if self._any_log:
            z[..., self._m_log] = np.log(x[..., self._m_log])
        if self._any_logit:
            z[..., self._m_logit] = special.logit(x[..., self._m_logit])
        if self._any_tau:
            z[..., self._m_tau] = special.logit(
                0.5 * (1.0 + x[..., self._m_tau]))
        return z

    def log_jacobian(self, z: np.ndarray) -> float:
        """log |dx/dz| of the natural-from-unconstrained map."""
        j = 0.0
        if self._any_log:
            j += float(np.sum(z[self._m_log]))
        if self._any_logit:
            zl = z[self._m_logit]
            j += float(np.sum(special.log_expit(zl) + special.log_expit(-zl)))
        if self._any_tau:
            zt = z[self._m_tau]
            j += zt.size * math.log(2.0) + float(
                np.sum(special.log_expit(zt) + special.log_expit(-zt)))
        return j

    def pack(self, state: ParameterState) -> np.ndarray:
        return self.z_from_natural(self.natural_from_state(state))

    def unpack(self, z: np.ndarray) -> ParameterState:
        return self.state_from_natural(self.to_natural(z))


class CachedPosterior:
    """Transformed-scale log posterior with per-block reuse.

    The cache tuple holds (sum1, u1, sum2, u2, cop, re1, re2); propose()
    recomputes only the pieces the block invalidates.  Values match a
    fresh full() evaluation bitwise because both run the same block
    functions and the same composition helper.
    """

    def __init__(self, jd: JointDensity, layout: ParameterLayout) -> None:
        self.jd = jd
        self.layout = layout

    def _finish(self, prior: float, parts: tuple, z: np.ndarray):
        ll = compose_loglik(parts[0], parts[2], parts[4], parts[5], parts[6])
        if ll == -math.inf:
            return -math.inf, None
        return (prior + ll) + self.layout.log_jacobian(z), parts

    def full(self, z: np.ndarray):
        jd, layout = self.jd, self.layout
        state = layout.unpack(z)
        prior = jd.log_prior(state)
        if prior == -math.inf:
            return -math.inf, None
        mb1 = jd.margin_block(1, state)
        if mb1 is None:
            return -math.inf, None
        mb2 = jd.margin_block(2, state)
        if mb2 is None:
            return -math.inf, None
        cop = (jd.copula_block(mb1[1], mb2[1], state.tau)
               if jd.spec.has_tau else 0.0)
        if jd.spec.random_intercepts:
            re1 = jd.re_block(state.b1, state.sigma1)
            re2 = jd.re_block(state.b2, state.sigma2)
        else:
            re1 = re2 = 0.0
        return self._finish(prior, (mb1[0], mb1[1], mb2[0], mb2[1],
                                    cop, re1, re2), z)

    def propose(self, block: Block, z: np.ndarray, cache: tuple):
        jd, layout = self.jd, self.layout
        state = layout.unpack(z)
        prior = jd.log_prior(state)
        if prior == -math.inf:
            return -math.inf, None
        s1, u1, s2, u2, cop, re1, re2 = cache
        if block.dirty1:
            mb = jd.margin_block(1, state)
            if mb is None:
                return -math.inf, None
            s1, u1 = mb
        if block.dirty2:
            mb = jd.margin_block(2, state)
            if mb is None:
                return -math.inf, None
            s2, u2 = mb
        if block.dirty_cop and jd.spec.has_tau:
            cop = jd.copula_block(u1, u2, state.tau)
        if jd.spec.random_intercepts:
            if block.dirty_re1:
                re1 = jd.re_block(state.b1, state.sigma1)
            if block.dirty_re2:
                re2 = jd.re_block(state.b2, state.sigma2)
        return self._finish(prior, (s1, u1, s2, u2, cop, re1, re2), z)


def make_transformed_target(jd: JointDensity, layout: ParameterLayout):
    """Fresh (uncached) log target on the unconstrained scale; this is
    what bridge sampling integrates."""

    def log_target(z: np.ndarray) -> float:
        t = jd.log_posterior(layout.unpack(z))
        if t == -math.inf:
            return t
        return t + layout.log_jacobian(z)

    return log_target


def initial_state(data: Dataset, spec: ModelSpec) -> ParameterState:
    """Deterministic initializer: least squares on the logit of the
    response, mid-range dispersion, small positive mixing weight, tau at
    the center of its range (nudged off the boundary where 0 is one)."""
    beta1 = np.linalg.lstsq(data.x1, special.logit(data.y1), rcond=None)[0]
    beta2 = np.linalg.lstsq(data.x2, special.logit(data.y2), rcond=None)[0]
    tau = None
    if spec.has_tau:
        tau = 0.0 if spec.copula is CopulaFamily.GAUSSIAN else 0.1
    extra = {}
    if spec.random_intercepts:
        extra = dict(sigma1=0.5, sigma2=0.5,
                     b1=np.zeros(data.n_groups), b2=np.zeros(data.n_groups))
    return ParameterState(
        beta1=beta1, beta2=beta2,
        phi1=0.1 if spec.margin_is_rect(1) else 0.0,
        phi2=0.1 if spec.margin_is_rect(2) else 0.0,
        rho1=10.0, rho2=10.0, tau=tau, **extra)


def _run_chain(target, layout, cfg: ChainConfig, chain_id: int,
               z0: np.ndarray):
    """One chain of the blocked adaptive random-walk kernel.

    `target` provides full(z) and propose(block, z, cache); `layout`
    provides blocks, d, and to_natural.  The model sampler passes a
    CachedPosterior; run_chains passes a bare function wrapper, so both
    run exactly this kernel.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(chain_id,)))
    z = z0.copy()
    cur, cache = target.full(z)
    if not math.isfinite(cur):
        raise RuntimeError("initial state has zero posterior density")
    nb = len(layout.blocks)
    log_step = np.full(nb, math.log(cfg.init_step))
    win_acc = np.zeros(nb, dtype=np.int64)
    post_acc = np.zeros(nb, dtype=np.int64)
    n_post = 0
    out = np.empty((cfg.n_kept, layout.d))
    out_iter = np.empty(cfg.n_kept, dtype=np.int64)
    ki = 0
    for it in range(1, cfg.n_iter + 1):
        burn = it <= cfg.burn_in
        for bi, blk in enumerate(layout.blocks):
            prop = z.copy()
            prop[blk.idx] += (math.exp(log_step[bi])
                              * rng.standard_normal(blk.idx.size))
            new, new_cache = target.propose(blk, prop, cache)
            # 1 - U keeps the argument in (0, 1]; the uniform is always
            # drawn so the stream does not depend on the proposal value
            logu = math.log(1.0 - rng.random())
            if logu < new - cur:
                z, cur, cache = prop, new, new_cache
                if burn:
                    win_acc[bi] += 1
                else:
                    post_acc[bi] += 1
        if burn:
            if it % cfg.adapt_window == 0:
                batch = it // cfg.adapt_window
                step_change = min(0.5, 2.0 / math.sqrt(batch))
                rates = win_acc / cfg.adapt_window
                log_step += np.where(rates > cfg.target_accept,
                                     step_change, -step_change)
                win_acc[:] = 0
        else:
            n_post += 1
            if (it - cfg.burn_in) % cfg.thin == 0:
                out[ki] = layout.to_natural(z)
                out_iter[ki] = it
                ki += 1
    rates = post_acc / max(n_post, 1)
    return out, out_iter, rates, np.exp(log_step)


@dataclass
class Draws:
    """Retained posterior draws on the natural scale, stacked over chains."""

    values: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    names: list[str]
    layout: ParameterLayout | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return int(np.unique(self.chain).size)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def per_chain(self, name: str) -> np.ndarray:
        """(n_chains, draws_per_chain) matrix for one parameter."""
        j = self.names.index(name)
        ids = np.unique(self.chain)
        cols = [self.values[self.chain == c, j] for c in ids]
        if len({c.size for c in cols}) != 1:
            raise ValueError("chains carry unequal draw counts")
        return np.vstack(cols)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(["chain", "iteration", *self.names]) + "\n")
            for i in range(self.values.shape[0]):
                cells = [str(int(self.chain[i])), str(int(self.iteration[i]))]
                cells.extend(repr(float(v)) for v in self.values[i])
                fh.write(",".join(cells) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Draws":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split(",")
            if header[:2] != ["chain", "iteration"]:
                raise ValueError(f"{path}: not a draws file (bad header)")
            names = header[2:]
            chain, iters, rows = [], [], []
            for ln, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != len(header):
                    raise ValueError(f"{path}: row {ln} has {len(parts)} "
                                     f"fields, expected {len(header)}")
                chain.append(int(parts[0]))
                iters.append(int(parts[1]))
                rows.append([float(p) for p in parts[2:]])
        return cls(np.asarray(rows, dtype=float),
                   np.asarray(chain, dtype=np.int64),
                   np.asarray(iters, dtype=np.int64), names)


def fit(data: Dataset, spec: ModelSpec, chains: ChainConfig | None = None,
        priors: PriorConfig | None = None) -> Draws:
    """Run the sampler and return stacked draws with acceptance metadata."""
    cfg = chains or ChainConfig()
    jd = JointDensity(data, spec, priors)
    layout = ParameterLayout(
        spec, data.p1, data.p2,
        data.n_groups if spec.random_intercepts else 0)
    z0 = layout.pack(initial_state(data, spec))
    vals, chain_col, iter_col = [], [], []
    acc = np.empty((cfg.n_chains, len(layout.blocks)))
    steps = np.empty_like(acc)
    target = CachedPosterior(jd, layout)
    for c in range(cfg.n_chains):
        out, oit, rates, fsteps = _run_chain(target, layout, cfg, c, z0)
        vals.append(out)
        iter_col.append(oit)
        chain_col.append(np.full(out.shape[0], c, dtype=np.int64))
        acc[c] = rates
        steps[c] = fsteps
    block_names = [b.name for b in layout.blocks]
    for bi, bname in enumerate(block_names):
        mean_rate = float(acc[:, bi].mean())
        if not 0.1 <= mean_rate <= 0.8:
            warnings.warn(
                f"proposal block {bname!r} has post-burn-in acceptance "
                f"{mean_rate:.3f}, outside [0.1, 0.8]; treat the fit with "
                "suspicion", RuntimeWarning, stacklevel=2)
    meta = {
        "model": {
            "margin1": spec.margin1,
            "margin2": spec.margin2,
            "copula": spec.copula.value,
            "random_intercepts": spec.random_intercepts,
        },
        "seed": cfg.seed,
        "n_chains": cfg.n_chains,
        "n_iter": cfg.n_iter,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "acceptance": {b: [float(acc[c, i]) for c in range(cfg.n_chains)]
                       for i, b in enumerate(block_names)},
        "final_steps": {b: [float(steps[c, i]) for c in range(cfg.n_chains)]
                        for i, b in enumerate(block_names)},
        "clamp_events": jd.clamp_events,
    }
    return Draws(np.vstack(vals), np.concatenate(chain_col),
                 np.concatenate(iter_col), list(layout.names), layout, meta)


class _BareTarget:
    """Adapter giving a plain log-density the CachedPosterior protocol."""

    def __init__(self, log_target):
        self.f = log_target

    def full(self, z):
        return float(self.f(z)), ()

    def propose(self, block, z, cache):
        return float(self.f(z)), ()


class _FlatLayout:
    """Single identity-transformed proposal block over all coordinates."""

    def __init__(self, d: int):
        self.d = d
        self.blocks = [Block("all", np.arange(d))]

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        return z.copy()


def run_chains(log_target, d: int, chains: ChainConfig | None = None,
               x0=None, names: list[str] | None = None) -> Draws:
    """Run the adaptive random-walk kernel on a bare log-density.

    Validation entry point: targets with known posteriors (conjugate
    toys, standard normals) go through the very same kernel the model
    sampler uses, with one proposal block covering all d coordinates and
    no reparameterization.  Returns stacked Draws like fit() does.
    """
    cfg = chains or ChainConfig()
    if names is None:
        names = [f"z_{i}" for i in range(d)]
    if len(names) != d:
        raise ValueError(f"need {d} names, got {len(names)}")
    z0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).copy()
    if z0.shape != (d,):
        raise ValueError(f"x0 must have shape ({d},)")
    target = _BareTarget(log_target)
    layout = _FlatLayout(d)
    if not math.isfinite(target.full(z0)[0]):
        raise ValueError("log_target is not finite at the initial point")
    vals, chain_col, iter_col, acc = [], [], [], []
    for c in range(cfg.n_chains):
        out, oit, rates, _ = _run_chain(target, layout, cfg, c, z0)
        vals.append(out)
        iter_col.append(oit)
        chain_col.append(np.full(out.shape[0], c, dtype=np.int64))
        acc.append(float(rates[0]))
    meta = {"seed": cfg.seed, "n_chains": cfg.n_chains, "n_iter": cfg.n_iter,
            "burn_in": cfg.burn_in, "thin": cfg.thin,
            "acceptance": {"all": acc}}
    return Draws(np.vstack(vals), np.concatenate(chain_col),
                 np.concatenate(iter_col), list(names), None, meta)


# ---------------------------------------------------------------------------
# convergence and summarization
# ---------------------------------------------------------------------------

def psrf(chains: np.ndarray) -> float:
    """Rank-normalized split potential scale reduction factor.

    Takes an (n_chains, n_draws) matrix.  Chains are split in half, all
    draws are jointly rank-normalized through the normal quantile
    function, and the classic between/within variance ratio is applied to
    the transformed values.  Constant input returns exactly 1.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected an (n_chains, n_draws) matrix")
    m, n = x.shape
    if n < 4:
        return math.nan
    half = n // 2
    x = x[:, : 2 * half].reshape(2 * m, half)
    ranks = stats.rankdata(x, axis=None).reshape(x.shape)
    z = special.ndtri((ranks - 0.375) / (x.size + 0.25))
    within = z.var(axis=1, ddof=1).mean()
    if within == 0.0:
        return 1.0
    between_over_n = z.mean(axis=1).var(ddof=1)
    var_hat = (half - 1) / half * within + between_over_n
    return float(np.sqrt(var_hat / within))


def hpd_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ceil(level * n) of the sampled points
    (earliest such window on ties)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be inside (0, 1)")
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise ValueError("no samples")
    m = int(math.ceil(level * n))
    if m >= n:
        return float(s[0]), float(s[-1])
    widths = s[m - 1:] - s[: n - m + 1]
    i = int(np.argmin(widths))
    return float(s[i]), float(s[i + m - 1])


def posterior_summary(draws: Draws, level: float = 0.95) -> list[dict]:
    """Per-parameter median, HPD interval, and split-R-hat rows."""
    rows = []
    multi = draws.n_chains >= 2
    for name in draws.names:
        col = draws.column(name)
        lo, hi = hpd_interval(col, level)
        rows.append({
            "name": name,
            "median": float(np.median(col)),
            "hpd_low": lo,
            "hpd_high": hi,
            "psrf": psrf(draws.per_chain(name)) if multi else math.nan,
        })
    return rows

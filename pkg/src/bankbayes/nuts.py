"""No-U-Turn Hamiltonian Monte Carlo with dual-averaging step-size adaptation.

Identity mass matrix, multinomial sampling over the trajectory, divergence
declared when the energy error exceeds 1000 (log scale).  Each chain owns an
independent RNG stream derived from the run seed, so results are bitwise
identical regardless of how chains are scheduled.

The trajectory tree may double up to ``max_treedepth + 1`` times, counting
from a single-state tree; ``max_treedepth = 0`` therefore degenerates to one
leapfrog step followed by an accept/reject choice.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DIVERGENCE_THRESHOLD = 1000.0

# dual-averaging constants
DA_GAMMA = 0.05
DA_T0 = 10.0
DA_KAPPA = 0.75

MIN_STEP_SIZE = 1e-12


class NonFiniteGradient(RuntimeError):
    pass


class StepSizeCollapse(RuntimeError):
    pass


class ChainFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings; ``seed`` is mandatory and fully determines the run."""

    seed: int
    chains: int = 4
    warmup: int = 2000
    draws: int = 2000
    target_accept: float = 0.8
    max_treedepth: int = 10
    init_radius: float = 2.0

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.warmup < 100:
            raise ValueError("warmup must be >= 100")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_treedepth < 0:
            raise ValueError("max_treedepth must be >= 0")
        if self.init_radius <= 0.0:
            raise ValueError("init_radius must be positive")


@dataclass(frozen=True)
class PosteriorDraws:
    """Post-warmup samples (chains x draws x p) plus per-iteration statistics."""

    values: np.ndarray
    param_names: tuple[str, ...]
    divergent: np.ndarray
    tree_depth: np.ndarray
    step_size: np.ndarray
    accept_stat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "param_names", tuple(self.param_names))
        if self.values.ndim != 3:
            raise ValueError("values must be chains x draws x params")
        if self.values.shape[2] != len(self.param_names):
            raise ValueError("param_names length does not match parameter count")
        for name in ("divergent", "tree_depth", "step_size", "accept_stat"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != self.values.shape[:2]:
                raise ValueError(f"stats array {name!r} not congruent with values")
        if not np.isfinite(self.values).all():
            raise ValueError("draws contain non-finite values")

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def n_draws(self) -> int:
        return self.values.shape[1]

    @property
    def n_params(self) -> int:
        return self.values.shape[2]

    def pooled(self) -> np.ndarray:
        """All chains concatenated: (chains * draws) x p."""
        return self.values.reshape(-1, self.n_params)

    def parameter(self, index: int) -> np.ndarray:
        """Draws for one parameter, keeping the chain axis."""
        return self.values[:, :, index]

    def divergences_per_chain(self) -> np.ndarray:
        return self.divergent.sum(axis=1).astype(int)

    def to_json_dict(self) -> dict:
        """Documented serialization layout; values flattened row-major."""
        return {
            "format_version": 1,
            "param_names": list(self.param_names),
            "n_chains": self.n_chains,
            "n_draws": self.n_draws,
            "values": self.values.ravel(order="C").tolist(),
            "stats": {
                "divergent": self.divergent.astype(int).ravel(order="C").tolist(),
                "tree_depth": self.tree_depth.astype(int).ravel(order="C").tolist(),
                "step_size": self.step_size.ravel(order="C").tolist(),
                "accept_stat": self.accept_stat.ravel(order="C").tolist(),
            },
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "PosteriorDraws":
        try:
            names = tuple(payload["param_names"])
            chains = int(payload["n_chains"])
            draws = int(payload["n_draws"])
            values = np.array(payload["values"], dtype=np.float64).reshape(
                chains, draws, len(names)
            )
            stats = payload["stats"]
            shape = (chains, draws)
            return cls(
                values=values,
                param_names=names,
                divergent=np.array(stats["divergent"], dtype=bool).reshape(shape),
                tree_depth=np.array(stats["tree_depth"], dtype=np.int64).reshape(shape),
                step_size=np.array(stats["step_size"], dtype=np.float64).reshape(shape),
                accept_stat=np.array(stats["accept_stat"], dtype=np.float64).reshape(shape),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed draws payload: {exc}") from exc


class _State(NamedTuple):
    q: np.ndarray
    p: np.ndarray
    logp: float
    grad: np.ndarray


class _Tree(NamedTuple):
    near: _State          # endpoint adjacent to the start of this subtree
    far: _State           # endpoint reached last, in integration direction
    proposal: _State
    log_w: float          # log sum of multinomial weights in the subtree
    sum_accept: float
    n_states: int
    divergent: bool
    turning: bool


def leapfrog(position, momentum, step, grad_fn):
    """One symplectic leapfrog step against the negative log posterior.

    ``grad_fn`` returns the gradient of the log posterior.  Raises
    :class:`NonFiniteGradient` when a gradient evaluation blows up, which
    callers record as a divergence.
    """
    position = np.asarray(position, dtype=np.float64)
    momentum = np.asarray(momentum, dtype=np.float64)
    grad = np.asarray(grad_fn(position), dtype=np.float64)
    if not np.isfinite(grad).all():
        raise NonFiniteGradient("gradient non-finite at starting position")
    p_half = momentum + 0.5 * step * grad
    q_new = position + step * p_half
    grad_new = np.asarray(grad_fn(q_new), dtype=np.float64)
    if not np.isfinite(grad_new).all():
        raise NonFiniteGradient("gradient non-finite after position update")
    p_new = p_half + 0.5 * step * grad_new
    return q_new, p_new


def _leapfrog_state(state: _State, eps: float, target) -> _State:
    p_half = state.p + 0.5 * eps * state.grad
    q = state.q + eps * p_half
    with np.errstate(all="ignore"):
        logp, grad = target.logp_and_grad(q)
    if not (np.isfinite(logp) and np.isfinite(grad).all()):
        return _State(q, p_half, -np.inf, np.zeros_like(q))
    p = p_half + 0.5 * eps * grad
    return _State(q, p, float(logp), grad)


def _energy(state: _State) -> float:
    if not np.isfinite(state.logp):
        return np.inf
    return -state.logp + 0.5 * float(state.p @ state.p)


def _segment_turning(near: _State, far: _State, direction: float) -> bool:
    dq = direction * (far.q - near.q)
    return float(near.p @ dq) <= 0.0 or float(far.p @ dq) <= 0.0


def _build_tree(state, depth, direction, eps, h0, rng, target) -> _Tree:
    if depth == 0:
        new = _leapfrog_state(state, direction * eps, target)
        h = _energy(new)
        delta = h - h0
        divergent = not np.isfinite(delta) or delta > DIVERGENCE_THRESHOLD
        log_w = -np.inf if divergent else -delta
        accept = 0.0 if divergent else float(min(1.0, np.exp(min(0.0, -delta))))
        return _Tree(new, new, new, log_w, accept, 1, divergent, False)

    first = _build_tree(state, depth - 1, direction, eps, h0, rng, target)
    if first.divergent or first.turning:
        return first
    second = _build_tree(first.far, depth - 1, direction, eps, h0, rng, target)

    sum_accept = first.sum_accept + second.sum_accept
    n_states = first.n_states + second.n_states
    if second.divergent or second.turning:
        return _Tree(first.near, second.far, first.proposal, first.log_w,
                     sum_accept, n_states, second.divergent, second.turning)

    log_w = np.logaddexp(first.log_w, second.log_w)
    # uniform multinomial choice between the two halves of this subtree
    take_second = np.log(rng.random()) < second.log_w - log_w
    proposal = second.proposal if take_second else first.proposal
    turning = _segment_turning(first.near, second.far, direction)
    return _Tree(first.near, second.far, proposal, log_w,
                 sum_accept, n_states, False, turning)


def nuts_transition(current, step, rng, target, max_treedepth=10, cache=None):
    """One NUTS update from ``current``; returns ``(next_position, info)``.

    ``info`` carries the divergence flag, tree depth (doublings performed),
    the averaged acceptance statistic, and the cached ``(logp, grad)`` of the
    returned position so the caller can chain transitions cheaply.
    """
    q0 = np.asarray(current, dtype=np.float64)
    if cache is None:
        logp0, grad0 = target.logp_and_grad(q0)
    else:
        logp0, grad0 = cache
    if not (np.isfinite(logp0) and np.isfinite(grad0).all()):
        raise NonFiniteGradient("log posterior non-finite at current position")

    p0 = rng.standard_normal(q0.shape[0])
    start = _State(q0, p0, float(logp0), grad0)
    h0 = _energy(start)

    left = right = start
    proposal = start
    log_sum_w = 0.0
    sum_accept = 0.0
    n_states = 0
    divergent = False
    depth = 0

    while depth <= max_treedepth:
        direction = 1.0 if rng.random() < 0.5 else -1.0
        edge = right if direction > 0 else left
        subtree = _build_tree(edge, depth, direction, step, h0, rng, target)
        sum_accept += subtree.sum_accept
        n_states += subtree.n_states
        depth += 1
        if subtree.divergent or subtree.turning:
            divergent = divergent or subtree.divergent
            break
        # biased progressive sampling favouring the new subtree
        if np.log(rng.random()) < subtree.log_w - log_sum_w:
            proposal = subtree.proposal
        log_sum_w = float(np.logaddexp(log_sum_w, subtree.log_w))
        if direction > 0:
            right = subtree.far
        else:
            left = subtree.far
        if _segment_turning(left, right, 1.0):
            break

    info = {
        "divergent": divergent,
        "tree_depth": depth,
        "accept_stat": sum_accept / max(n_states, 1),
        "n_leapfrog": n_states,
        "energy": h0,
        "cache": (proposal.logp, proposal.grad),
    }
    return proposal.q, info


def _find_initial_step(state: _State, rng, target) -> float:
    """Double/halve a unit step until the one-step acceptance crosses 0.5."""
    eps = 1.0
    p = rng.standard_normal(state.q.shape[0])
    probe = _State(state.q, p, state.logp, state.grad)
    h0 = _energy(probe)

    def log_ratio(eps):
        h1 = _energy(_leapfrog_state(probe, eps, target))
        return h0 - h1 if np.isfinite(h1) else -np.inf

    direction = 1.0 if log_ratio(eps) > np.log(0.5) else -1.0
    for _ in range(100):
        eps_next = eps * 2.0**direction
        if eps_next < MIN_STEP_SIZE or eps_next > 1e7:
            break
        if direction * log_ratio(eps_next) <= direction * np.log(0.5):
            eps = eps_next
            break
        eps = eps_next
    return eps


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, initial_step: float, target_accept: float):
        self.target = target_accept
        self.mu = np.log(10.0 * initial_step)
        self.log_step = np.log(initial_step)
        self.log_step_avg = np.log(initial_step)
        self.h_bar = 0.0
        self.t = 0

    def update(self, accept_stat: float) -> float:
        """Feed one acceptance statistic; returns the step for the next iteration."""
        self.t += 1
        frac = 1.0 / (self.t + DA_T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_step = self.mu - np.sqrt(self.t) / DA_GAMMA * self.h_bar
        w = self.t ** (-DA_KAPPA)
        self.log_step_avg = w * self.log_step + (1.0 - w) * self.log_step_avg
        step = float(np.exp(self.log_step))
        if not np.isfinite(step) or step < MIN_STEP_SIZE:
            raise StepSizeCollapse(f"step size collapsed to {step!r} at iteration {self.t}")
        return step

    @property
    def current_step(self) -> float:
        return float(np.exp(self.log_step))

    @property
    def adapted_step(self) -> float:
        """The frozen post-warmup step: the averaged iterate."""
        return float(np.exp(self.log_step_avg))


def _chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(chain_index,))
    )


def _run_single_chain(target, config: SamplerConfig, chain_index: int):
    rng = _chain_rng(config.seed, chain_index)
    dim = target.dim

    state = None
    for _ in range(100):
        q = rng.uniform(-config.init_radius, config.init_radius, dim)
        with np.errstate(all="ignore"):
            logp, grad = target.logp_and_grad(q)
        if np.isfinite(logp) and np.isfinite(grad).all():
            state = _State(q, np.zeros(dim), float(logp), grad)
            break
    if state is None:
        raise ChainFailed(
            f"chain {chain_index}: no finite log posterior found in 100 "
            f"initialization draws (radius {config.init_radius})"
        )

    try:
        step = _find_initial_step(state, rng, target)
        adapter = DualAveraging(step, config.target_accept)

        q, cache = state.q, (state.logp, state.grad)
        for _ in range(config.warmup):
            q, info = nuts_transition(
                q, step, rng, target, config.max_treedepth, cache=cache
            )
            cache = info["cache"]
            step = adapter.update(info["accept_stat"])
        step = adapter.adapted_step
        if step < MIN_STEP_SIZE:
            raise StepSizeCollapse(f"adapted step size {step!r} below minimum")
    except StepSizeCollapse as exc:
        raise ChainFailed(f"chain {chain_index}: {exc}") from exc

    values = np.empty((config.draws, dim))
    divergent = np.zeros(config.draws, dtype=bool)
    tree_depth = np.zeros(config.draws, dtype=np.int64)
    accept_stat = np.zeros(config.draws)
    for i in range(config.draws):
        q, info = nuts_transition(
            q, step, rng, target, config.max_treedepth, cache=cache
        )
        cache = info["cache"]
        values[i] = q
        divergent[i] = info["divergent"]
        tree_depth[i] = info["tree_depth"]
        accept_stat[i] = info["accept_stat"]
    step_size = np.full(config.draws, step)
    return values, divergent, tree_depth, step_size, accept_stat


def _max_workers(requested: int) -> int:
    env = os.environ.get("BB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested, cap))


def run_chains(target, config: SamplerConfig, param_names=None) -> PosteriorDraws:
    """Run ``config.chains`` independent NUTS chains over ``target``.

    ``target`` needs a ``dim`` attribute and a ``logp_and_grad(q)`` method.
    Chains run in a thread pool capped by ``BB_THREADS``; per-chain RNG
    streams make the output independent of the schedule.
    """
    if param_names is None:
        param_names = getattr(
            target, "param_names", tuple(f"p{i}" for i in range(target.dim))
        )
    workers = _max_workers(config.chains)
    if workers > 1 and config.chains > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda c: _run_single_chain(target, config, c),
                    range(config.chains),
                )
            )
    else:
        results = [_run_single_chain(target, config, c) for c in range(config.chains)]

    return PosteriorDraws(
        values=np.stack([r[0] for r in results]),
        param_names=tuple(param_names),
        divergent=np.stack([r[1] for r in results]),
        tree_depth=np.stack([r[2] for r in results]),
        step_size=np.stack([r[3] for r in results]),
        accept_stat=np.stack([r[4] for r in results]),
    )

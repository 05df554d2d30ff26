"""Seeded desk-scale simulator of noisy FedSGD on synthetic quadratic losses.

The loss family is l(w, x) = 0.5 ||w - x||^2, which is 1-smooth and
1-strongly convex and has the analytic optimum w* = mean of the pooled data,
so the optimality gap of any iterate is exactly 0.5 ||w - w*||^2 and no data
pass is needed to evaluate it.  Each round every user Poisson-samples its
dataset, averages per-point gradients, clips to norm C, adds Gaussian noise
with per-dimension std C * sigma_k, and the server applies the
sample-size-weighted step with learning rate G / (C * lambda * t).

Randomness is split from one root seed into documented streams:

  data for user k:        SeedSequence([seed, 1, k])
  initial weight:         SeedSequence([seed, 2])
  rounds of (rep, user):  SeedSequence([seed, 3, rep, k]); round t consumes,
                          in order, |D_k| uniforms for the Poisson mask and
                          then d standard normals for the noise (the noise
                          block is absent when the sample is empty or
                          sigma_k = 0, so sampling masks are common random
                          numbers across noise levels).

Any component is therefore reproducible in isolation by regenerating its
stream.  Repetitions are independent; aggregation sums users in fixed index
order so results are bit-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DomainError, GradBoundExceededError

__all__ = [
    "SimConfig",
    "QuadraticProblem",
    "RoundState",
    "SimResult",
    "make_quadratic_problem",
    "quadratic_loss",
    "local_gradient",
    "clip_gradient",
    "poisson_sample",
    "perturb",
    "run_round",
    "run_simulation",
    "aggregate_noise_sq",
]

_STREAM_DATA = 1
_STREAM_INIT = 2
_STREAM_ROUNDS = 3


def _as_tuple(value: Any, count: int) -> tuple:
    if isinstance(value, (list, tuple, np.ndarray)):
        out = tuple(value)
        if len(out) != count:
            raise DomainError(f"per-user sequence has length {len(out)}, expected {count}")
        return out
    return (value,) * count


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation study.

    ``per_user_data``, ``q`` and ``sigma`` accept either a scalar (homogeneous
    fleet) or one value per user.  ``lam`` and ``mu`` must both be 1.0: the
    generated quadratic family has curvature exactly 1, so any other value
    would make the learning rate and the reported bound inconsistent with the
    loss actually optimized (rescale the data instead).

    ``data_radius`` is the radius of the ball the data points are drawn from;
    when omitted it defaults to grad_bound / 2 so that worst-case in-hull
    gradients match the configured bound.  ``validate_grad_bound`` makes the
    run fail as soon as a realized raw gradient norm exceeds ``grad_bound``;
    noisy runs can legitimately exceed a bound calibrated on a noiseless
    pilot, so the check can be disabled while the realized maximum is still
    recorded.
    """

    users: int
    dim: int
    per_user_data: int | Sequence[int]
    q: float | Sequence[float]
    sigma: float | Sequence[float]
    clip: float
    rounds: int
    grad_bound: float
    seed: int
    repetitions: int
    lam: float = 1.0
    mu: float = 1.0
    data_radius: float | None = None
    validate_grad_bound: bool = True

    def __post_init__(self) -> None:
        if self.users < 1:
            raise DomainError(f"users must be >= 1, got {self.users}")
        if self.dim < 1:
            raise DomainError(f"dim must be >= 1, got {self.dim}")
        if self.rounds < 1:
            raise DomainError(f"rounds must be >= 1, got {self.rounds}")
        if self.repetitions < 1:
            raise DomainError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0 <= int(self.seed) < 2**64 or int(self.seed) != self.seed:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if not self.clip > 0:
            raise DomainError(f"clip must be positive, got {self.clip}")
        if not self.clip <= self.grad_bound:
            raise DomainError(
                f"clip {self.clip} must not exceed grad_bound {self.grad_bound}"
            )
        if self.lam != 1.0 or self.mu != 1.0:
            raise DomainError(
                "the quadratic loss family has curvature 1; lam and mu must be 1.0"
            )
        object.__setattr__(self, "per_user_data", _as_tuple(self.per_user_data, self.users))
        object.__setattr__(self, "q", _as_tuple(self.q, self.users))
        object.__setattr__(self, "sigma", _as_tuple(self.sigma, self.users))
        for n in self.per_user_data:
            if int(n) != n or n < 1:
                raise DomainError(f"per_user_data entries must be positive integers, got {n}")
        for qk in self.q:
            if not 0 < qk < 1:
                raise DomainError(f"q entries must be in (0, 1), got {qk}")
        for sk in self.sigma:
            if sk < 0:
                raise DomainError(f"sigma entries must be nonnegative, got {sk}")
        if self.data_radius is not None and not self.data_radius > 0:
            raise DomainError(f"data_radius must be positive, got {self.data_radius}")

    @property
    def radius(self) -> float:
        return self.data_radius if self.data_radius is not None else self.grad_bound / 2.0

    _FIELDS = {
        "users": int,
        "dim": int,
        "per_user_data": None,
        "q": None,
        "sigma": None,
        "clip": float,
        "rounds": int,
        "grad_bound": float,
        "seed": int,
        "repetitions": int,
        "lambda": float,
        "mu": float,
        "data_radius": None,
        "validate_grad_bound": bool,
    }
    _REQUIRED = (
        "users", "dim", "per_user_data", "q", "sigma", "clip", "rounds",
        "grad_bound", "seed", "repetitions",
    )

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        """Build a config from a parsed JSON document, naming bad fields."""
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key in doc:
            if key not in cls._FIELDS:
                raise ConfigError(key, "unknown field")
        for key in cls._REQUIRED:
            if key not in doc:
                raise ConfigError(key, "required field is missing")
        kwargs: dict[str, Any] = {}
        for key, value in doc.items():
            name = "lam" if key == "lambda" else key
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except DomainError as exc:
            raise ConfigError("<config>", str(exc)) from exc


@dataclass(frozen=True)
class QuadraticProblem:
    """Per-user datasets plus the analytic optimum of the pooled loss."""

    datasets: tuple[np.ndarray, ...]
    optimum: np.ndarray
    radius: float

    @classmethod
    def from_datasets(cls, datasets: Sequence[np.ndarray], radius: float) -> "QuadraticProblem":
        pooled = np.concatenate([np.asarray(d, dtype=float) for d in datasets], axis=0)
        return cls(
            datasets=tuple(np.asarray(d, dtype=float) for d in datasets),
            optimum=pooled.mean(axis=0),
            radius=float(radius),
        )

    def loss_gap(self, w: np.ndarray) -> float:
        # Pooled loss minus its minimum; exact for the quadratic family.
        diff = w - self.optimum
        return 0.5 * float(diff @ diff)

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.datasets, axis=0)


@dataclass
class RoundState:
    weights: np.ndarray
    realized_grad_norm_max: float = 0.0


@dataclass(frozen=True)
class SimResult:
    """Trajectories averaged over repetitions, plus per-repetition finals.

    Index t of the trajectory arrays is the state distributed at round t + 1,
    i.e. entry 0 is the initial weight and the last entry is the state after
    all T updates.  ``empirical_utility`` is 1 / (mean final loss gap).
    """

    round_index: np.ndarray
    mean_loss_gap: np.ndarray
    stderr_loss_gap: np.ndarray
    mean_mse: np.ndarray
    stderr_mse: np.ndarray
    per_rep_final_loss_gap: np.ndarray
    empirical_utility: float
    realized_grad_norm_max: float


def make_quadratic_problem(cfg: SimConfig) -> QuadraticProblem:
    """Sample each user's dataset uniformly from the ball of the config radius."""
    datasets = []
    for k in range(cfg.users):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_DATA, k]))
        n = int(cfg.per_user_data[k])
        directions = rng.standard_normal((n, cfg.dim))
        norms = np.linalg.norm(directions, axis=1)
        norms[norms == 0.0] = 1.0
        radii = cfg.radius * rng.random(n) ** (1.0 / cfg.dim)
        datasets.append(directions / norms[:, None] * radii[:, None])
    return QuadraticProblem.from_datasets(datasets, cfg.radius)


def quadratic_loss(w: np.ndarray, points: np.ndarray) -> float:
    """Mean of 0.5 ||w - x||^2 over the given points."""
    diffs = w - points
    return 0.5 * float(np.mean(np.einsum("ij,ij->i", diffs, diffs)))


def local_gradient(w: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Mean per-point gradient of the quadratic loss: w - mean(points)."""
    if len(points) == 0:
        raise DomainError("local gradient of an empty sample is undefined")
    # np.add.reduce skips ndarray.mean's wrapper overhead in the round loop.
    return w - np.add.reduce(points, axis=0) / len(points)


def clip_gradient(g: np.ndarray, clip: float) -> np.ndarray:
    """Rescale the gradient vector to norm at most clip, preserving direction."""
    if not clip > 0:
        raise DomainError(f"clip must be positive, got {clip}")
    norm = math.sqrt(float(g @ g))
    return g / max(1.0, norm / clip)


def poisson_sample(points: np.ndarray, q: float, rng: np.random.Generator) -> np.ndarray:
    """Include each point independently with probability q."""
    if not 0 < q < 1:
        raise DomainError(f"q must be in (0, 1), got {q}")
    mask = rng.random(len(points)) < q
    return points[mask]


def perturb(
    g: np.ndarray, clip: float, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Add independent per-dimension Gaussian noise with std clip * sigma.

    sigma = 0 is the identity and consumes no randomness.  Batched inputs are
    supported: noise matches g's shape with the last axis as the dimension.
    """
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0.0:
        return g
    return g + clip * sigma * rng.standard_normal(g.shape)


def run_round(
    state: RoundState,
    problem: QuadraticProblem,
    cfg: SimConfig,
    t: int,
    rngs: Sequence[np.random.Generator],
) -> RoundState:
    """One FedSGD round: sample, gradient, clip, perturb, weighted step.

    Users with an empty Poisson sample contribute weight zero; if every user
    is empty the round applies no update (the learning-rate index still
    advances with t).
    """
    if t < 1:
        raise DomainError(f"round index starts at 1, got {t}")
    w = state.weights
    realized = state.realized_grad_norm_max
    weighted_sum = np.zeros(cfg.dim)
    total = 0
    for k in range(cfg.users):
        pts = poisson_sample(problem.datasets[k], cfg.q[k], rngs[k])
        if len(pts) == 0:
            continue
        g = local_gradient(w, pts)
        norm = math.sqrt(float(g @ g))
        realized = max(realized, norm)
        g_clip = clip_gradient(g, cfg.clip)
        clipped_norm = norm / max(1.0, norm / cfg.clip)
        assert clipped_norm <= cfg.clip * (1.0 + 1e-9)
        g_noisy = perturb(g_clip, cfg.clip, cfg.sigma[k], rngs[k])
        weighted_sum += len(pts) * g_noisy
        total += len(pts)
    if total == 0:
        return RoundState(w.copy(), realized)
    lr = cfg.grad_bound / (cfg.clip * cfg.lam * t)
    return RoundState(w - lr * (weighted_sum / total), realized)


def _initial_weight(cfg: SimConfig, problem: QuadraticProblem) -> np.ndarray:
    # Start on the data-ball boundary so trajectories traverse a nontrivial
    # approach to the optimum instead of starting on top of it.
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_INIT]))
    direction = rng.standard_normal(cfg.dim)
    return problem.radius * direction / float(np.linalg.norm(direction))


def run_simulation(cfg: SimConfig) -> SimResult:
    """Run all repetitions and average trajectories; deterministic in (seed, cfg)."""
    problem = make_quadratic_problem(cfg)
    w0 = _initial_weight(cfg, problem)
    steps = cfg.rounds + 1
    sum_gap = np.zeros(steps)
    sumsq_gap = np.zeros(steps)
    sum_mse = np.zeros(steps)
    sumsq_mse = np.zeros(steps)
    per_rep_final = np.zeros(cfg.repetitions)
    realized_max = 0.0
    gaps = np.empty(steps)
    mses = np.empty(steps)
    for rep in range(cfg.repetitions):
        rngs = [
            np.random.default_rng(np.random.SeedSequence([cfg.seed, _STREAM_ROUNDS, rep, k]))
            for k in range(cfg.users)
        ]
        state = RoundState(w0.copy(), 0.0)
        diff = state.weights - problem.optimum
        mses[0] = float(diff @ diff)
        gaps[0] = 0.5 * mses[0]
        for t in range(1, cfg.rounds + 1):
            state = run_round(state, problem, cfg, t, rngs)
            if cfg.validate_grad_bound and state.realized_grad_norm_max > cfg.grad_bound:
                raise GradBoundExceededError(
                    f"repetition {rep}, round {t}: realized gradient norm "
                    f"{state.realized_grad_norm_max} exceeds grad_bound {cfg.grad_bound}"
                )
            diff = state.weights - problem.optimum
            mses[t] = float(diff @ diff)
            gaps[t] = 0.5 * mses[t]
        sum_gap += gaps
        sumsq_gap += gaps * gaps
        sum_mse += mses
        sumsq_mse += mses * mses
        per_rep_final[rep] = gaps[-1]
        realized_max = max(realized_max, state.realized_grad_norm_max)
    reps = cfg.repetitions
    mean_gap = sum_gap / reps
    mean_mse = sum_mse / reps
    if reps > 1:
        var_gap = np.maximum(sumsq_gap - reps * mean_gap**2, 0.0) / (reps - 1)
        var_mse = np.maximum(sumsq_mse - reps * mean_mse**2, 0.0) / (reps - 1)
        se_gap = np.sqrt(var_gap / reps)
        se_mse = np.sqrt(var_mse / reps)
    else:
        se_gap = np.zeros(steps)
        se_mse = np.zeros(steps)
    return SimResult(
        round_index=np.arange(1, steps + 1),
        mean_loss_gap=mean_gap,
        stderr_loss_gap=se_gap,
        mean_mse=mean_mse,
        stderr_mse=se_mse,
        per_rep_final_loss_gap=per_rep_final,
        empirical_utility=float(1.0 / mean_gap[-1]),
        realized_grad_norm_max=realized_max,
    )


def aggregate_noise_sq(cfg: SimConfig) -> float:
    """Fleet noise variance sum(n_k q_k sigma_k)^2 / sum(n_k q_k)^2 for the config.

    Same aggregation rule as the tradeoff module, evaluated on the expected
    sample weights of this configuration (sigma_k = 0 entries are allowed).
    """
    num = sum((n * qk * sk) ** 2 for n, qk, sk in zip(cfg.per_user_data, cfg.q, cfg.sigma))
    den = sum(n * qk for n, qk in zip(cfg.per_user_data, cfg.q)) ** 2
    return num / den

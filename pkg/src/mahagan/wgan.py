"""WGAN-GP training on the detected minority set and pool sampling.

The critic minimizes  E[D(G(eps))] - E[D(z)] + lambda_gp * E[(||grad_u
D(u_hat)||_2 - 1)^2]  on interpolates u_hat = alpha*z + (1-alpha)*G(eps)
with one alpha ~ U(0,1) per row; the generator minimizes -E[D(G(eps))].
Training is sequential and fully deterministic given the config seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from . import neuralnet as nn

DEFAULT_GENERATOR_HIDDEN = (128, 256, 128)
DEFAULT_CRITIC_HIDDEN = (256, 256, 128)


@dataclass
class GanConfig:
    """Hyperparameters for minority-set WGAN-GP training.

    ``batch_size=None`` resolves to min(64, |minority set|) at train time.
    Hidden-layer tuples exclude the data-dependent input/output widths.
    """

    latent_dim: int = 64
    lambda_gp: float = 10.0
    pool_size: int = 10_000
    critic_steps_per_gen: int = 5
    batch_size: int | None = None
    total_gen_iterations: int = 2000
    seed: int = 0
    generator_hidden: tuple[int, ...] = DEFAULT_GENERATOR_HIDDEN
    critic_hidden: tuple[int, ...] = DEFAULT_CRITIC_HIDDEN
    learning_rate: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.latent_dim < 1:
            raise DataError("latent_dim must be >= 1")
        if self.lambda_gp < 0:
            raise DataError("lambda_gp must be >= 0")
        if self.critic_steps_per_gen < 1:
            raise DataError("critic_steps_per_gen must be >= 1")
        if self.total_gen_iterations < 0:
            raise DataError("total_gen_iterations must be >= 0")

    def resolved_batch_size(self, n_minority: int) -> int:
        if self.batch_size is None:
            return min(64, n_minority)
        if self.batch_size > n_minority:
            raise DataError(
                f"batch_size {self.batch_size} exceeds minority count {n_minority}"
            )
        return self.batch_size

    def validate_for(self, n_minority: int) -> None:
        if self.pool_size < n_minority:
            raise DataError(
                f"pool_size {self.pool_size} smaller than minority count {n_minority}"
            )
        self.resolved_batch_size(n_minority)

    def to_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "lambda_gp": self.lambda_gp,
            "pool_size": self.pool_size,
            "critic_steps_per_gen": self.critic_steps_per_gen,
            "batch_size": self.batch_size,
            "total_gen_iterations": self.total_gen_iterations,
            "seed": self.seed,
            "generator_hidden": list(self.generator_hidden),
            "critic_hidden": list(self.critic_hidden),
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }

    @staticmethod
    def from_dict(d: dict) -> "GanConfig":
        d = dict(d)
        d["generator_hidden"] = tuple(d.get("generator_hidden", DEFAULT_GENERATOR_HIDDEN))
        d["critic_hidden"] = tuple(d.get("critic_hidden", DEFAULT_CRITIC_HIDDEN))
        return GanConfig(**d)


@dataclass
class TrainedGan:
    """Generator/critic parameters plus the per-iteration loss history.

    ``loss_history`` has one (critic_loss, generator_loss, penalty) row
    per generator iteration; the penalty column is the lambda-weighted
    term from the last critic step of that iteration.
    """

    generator: nn.MlpParams
    critic: nn.MlpParams
    loss_history: np.ndarray
    config: GanConfig

    def to_dict(self) -> dict:
        def params_dict(p: nn.MlpParams) -> dict:
            return {
                "layer_sizes": list(p.layer_sizes),
                "weights": [w.tolist() for w in p.weights],
                "biases": [b.tolist() for b in p.biases],
            }

        return {
            "config": self.config.to_dict(),
            "generator": params_dict(self.generator),
            "critic": params_dict(self.critic),
            "loss_history": self.loss_history.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(d: dict) -> "TrainedGan":
        def params_from(pd: dict) -> nn.MlpParams:
            return nn.MlpParams(
                tuple(pd["layer_sizes"]),
                [np.asarray(w, dtype=np.float64) for w in pd["weights"]],
                [np.asarray(b, dtype=np.float64) for b in pd["biases"]],
            )

        return TrainedGan(
            params_from(d["generator"]),
            params_from(d["critic"]),
            np.asarray(d["loss_history"], dtype=np.float64).reshape(-1, 3),
            GanConfig.from_dict(d["config"]),
        )

    @staticmethod
    def from_json(text: str) -> "TrainedGan":
        return TrainedGan.from_dict(json.loads(text))

    def write_loss_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,critic_loss,generator_loss,penalty\n")
            for i, (c, g, p) in enumerate(self.loss_history):
                fh.write(f"{i},{c!r},{g!r},{p!r}\n")


class GanDivergenceError(NumericalError):
    """Raised when training produces non-finite values; carries the last
    healthy parameter snapshot."""

    def __init__(self, message: str, iteration: int, checkpoint: "TrainedGan | None"):
        super().__init__(message)
        self.iteration = iteration
        self.checkpoint = checkpoint


def make_interpolates(real: np.ndarray, fake: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """u_hat = alpha*real + (1-alpha)*fake, one scalar alpha per row."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if real.shape != fake.shape or alpha.shape != (real.shape[0],):
        raise ValueError("batch shapes disagree in make_interpolates")
    if np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise ValueError("alpha entries must lie in [0, 1]")
    return alpha[:, None] * real + (1.0 - alpha[:, None]) * fake


def critic_loss(
    critic: nn.MlpParams,
    generator: nn.MlpParams,
    real_batch,
    noise_batch,
    alpha_batch,
    lambda_gp: float,
) -> float:
    """Critic objective: E[D(fake)] - E[D(real)] + lambda * penalty."""
    real = np.asarray(real_batch, dtype=np.float64)
    fake = nn.forward(generator, np.asarray(noise_batch, dtype=np.float64))
    interp = make_interpolates(real, fake, alpha_batch)
    d_fake = nn.forward(critic, fake)
    d_real = nn.forward(critic, real)
    penalty, _ = nn.grad_params_of_penalty(critic, interp, lambda_gp)
    value = float(d_fake.mean() - d_real.mean() + penalty)
    if not np.isfinite(value):
        raise NumericalError("non-finite critic loss")
    return value


def generator_loss(critic: nn.MlpParams, generator: nn.MlpParams, noise_batch) -> float:
    """Generator objective: -E[D(G(eps))]."""
    fake = nn.forward(generator, np.asarray(noise_batch, dtype=np.float64))
    value = float(-nn.forward(critic, fake).mean())
    if not np.isfinite(value):
        raise NumericalError("non-finite generator loss")
    return value


def _critic_step_grads(critic, generator, real, noise, alpha, lambda_gp):
    """(loss, penalty, grads) for one critic update; fakes are constants."""
    batch = real.shape[0]
    fake = nn.forward(generator, noise)
    interp = make_interpolates(real, fake, alpha)

    loss_fake, grads = nn.grad_params(
        critic, fake, lambda out: (out.mean(), np.full_like(out, 1.0 / batch))
    )
    loss_real, grads_real = nn.grad_params(
        critic, real, lambda out: (-out.mean(), np.full_like(out, -1.0 / batch))
    )
    penalty, grads_pen = nn.grad_params_of_penalty(critic, interp, lambda_gp)
    grads.add_(grads_real).add_(grads_pen)
    return loss_fake + loss_real + penalty, penalty, grads


def _generator_step_grads(critic, generator, noise):
    """(loss, grads) for one generator update, backpropagated through D."""
    batch = noise.shape[0]
    fake, g_acts, g_pre = nn._forward_cache(generator, noise)
    scores, d_acts, d_pre = nn._forward_cache(critic, fake)
    loss = float(-scores.mean())
    d_out = np.full_like(scores, -1.0 / batch)
    _, d_fake = nn._backward(critic, d_acts, d_pre, d_out)
    grads, _ = nn._backward(generator, g_acts, g_pre, d_fake)
    return loss, grads


def train(minority_rows, config: GanConfig) -> TrainedGan:
    """Train WGAN-GP on minority rows (expected in standardized space).

    Per generator iteration the critic takes ``critic_steps_per_gen``
    updates on fresh batches, then the generator one update on fresh
    noise. Aborts with GanDivergenceError (iteration index plus the last
    healthy checkpoint) if any parameter turns non-finite.
    """
    X = np.asarray(minority_rows, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("minority_rows must be a 2-D matrix")
    m, p = X.shape
    if m < 2:
        raise DataError(f"GAN training needs at least 2 minority rows, got {m}")
    config.validate_for(m)
    batch = config.resolved_batch_size(m)
    q = config.latent_dim

    rng = np.random.default_rng(config.seed)
    generator = nn.init_mlp((q, *config.generator_hidden, p), rng)
    critic = nn.init_mlp((p, *config.critic_hidden, 1), rng)
    adam_g = nn.init_adam(generator, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    adam_c = nn.init_adam(critic, config.learning_rate, config.beta1, config.beta2, config.epsilon)

    history = np.zeros((config.total_gen_iterations, 3))
    checkpoint: TrainedGan | None = None
    for it in range(config.total_gen_iterations):
        c_loss = pen = 0.0
        try:
            for _ in range(config.critic_steps_per_gen):
                idx = rng.choice(m, size=batch, replace=False)
                noise = rng.standard_normal((batch, q))
                alpha = rng.uniform(0.0, 1.0, size=batch)
                c_loss, pen, grads = _critic_step_grads(
                    critic, generator, X[idx], noise, alpha, config.lambda_gp
                )
                nn.adam_step(critic, grads, adam_c)
            noise = rng.standard_normal((batch, q))
            g_loss, grads = _generator_step_grads(critic, generator, noise)
            nn.adam_step(generator, grads, adam_g)
        except NumericalError as exc:
            raise GanDivergenceError(
                f"training diverged at generator iteration {it}: {exc}", it, checkpoint
            ) from exc
        if not (np.isfinite(c_loss) and np.isfinite(g_loss) and critic.all_finite() and generator.all_finite()):
            raise GanDivergenceError(
                f"non-finite parameters after generator iteration {it}", it, checkpoint
            )
        history[it] = (c_loss, g_loss, pen)
        checkpoint = TrainedGan(generator.copy(), critic.copy(), history[: it + 1].copy(), config)
    return TrainedGan(generator, critic, history, config)


def sample_pool(gan: TrainedGan, n: int, seed: int) -> np.ndarray:
    """Draw n generator samples G(eps), eps ~ N(0, I_q), deterministically."""
    if n < 1:
        raise DataError("pool size must be >= 1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n, gan.config.latent_dim))
    rows = nn.forward(gan.generator, eps)
    if not np.all(np.isfinite(rows)):
        raise NumericalError("generator produced non-finite samples")
    return rows

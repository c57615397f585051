"""Per-frame first-order minimization of the text + stability objective.

Each frame is produced by iterating an adaptive per-coordinate gradient
method on total loss = alignment loss + stability loss, projecting pixels
back into [0, 1] after every step. The first frame starts from uniform
noise; later frames warm-start from their predecessor plus Gaussian noise,
with both the noise magnitude and the stability weight driven by a single
temperature knob.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .frames import FrameState
from .guidance import AugmentationPolicy, GuidanceScore, ScorerHandle, TextEmbedding, text_loss

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

DEFAULT_NOISE_SLOPE = 0.004
DEFAULT_STABILITY_MAX = 0.1


@dataclass(frozen=True)
class TemperatureParams:
    """Stability-loss weight and warm-start noise derived from the temperature knob."""

    stability_weight: float
    warm_start_noise_std: float

    def __post_init__(self) -> None:
        for name in ("stability_weight", "warm_start_noise_std"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class OptimizerParams:
    """Step counts, step size and augmentation recipe for per-frame optimization."""

    iterations_first_frame: int = 150
    iterations_per_frame: int = 40
    step_size: float = 0.02
    augmentation: AugmentationPolicy = field(default_factory=AugmentationPolicy)

    def __post_init__(self) -> None:
        if self.iterations_first_frame < 0 or self.iterations_per_frame < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")


@dataclass(frozen=True)
class FrameResult:
    """Optimized frame plus the total-loss trace and time spent scoring.

    trace[k] is the total loss of iterate k under that step's own random
    views. Because single-draw losses carry view noise comparable to a warm
    frame's true improvement, loss_initial and loss_final are additionally
    evaluated under one shared view geometry (the final step's draw), which
    cancels the noise out of their difference. Both are None for zero
    iteration runs, which never score anything.
    """

    frame: FrameState
    trace: list[float]
    scorer_seconds: float
    loss_initial: float | None
    loss_final: float | None


def temperature_to_params(
    temperature: float,
    *,
    noise_slope: float = DEFAULT_NOISE_SLOPE,
    stability_max: float = DEFAULT_STABILITY_MAX,
) -> TemperatureParams:
    """Map the user temperature in [0, 100] to optimizer dynamics.

    Warm-start noise grows linearly with temperature while the stability
    weight decays linearly to zero: at 0 the scene barely moves between
    frames, at 100 nothing anchors it to the previous frame.
    """
    if not np.isfinite(temperature) or not 0.0 <= temperature <= 100.0:
        raise ValueError(f"temperature must lie in [0, 100], got {temperature}")
    return TemperatureParams(
        stability_weight=stability_max * (1.0 - temperature / 100.0),
        warm_start_noise_std=noise_slope * temperature,
    )


def init_first_frame(height: int, width: int, rng: np.random.Generator) -> FrameState:
    """First frame: i.i.d. uniform noise on [0, 1], index 0."""
    if height < 1 or width < 1:
        raise ValueError(f"frame dimensions must be positive, got {height}x{width}")
    return FrameState(rng.random((height, width, 3)), 0)


def warm_start(prev: FrameState, noise_std: float, rng: np.random.Generator) -> FrameState:
    """Next frame's starting point: the prior frame plus clamped Gaussian noise."""
    if noise_std < 0:
        raise ValueError(f"noise_std must be nonnegative, got {noise_std}")
    noisy = prev.pixels + rng.normal(0.0, noise_std, prev.pixels.shape)
    return FrameState(np.clip(noisy, 0.0, 1.0), prev.index + 1)


def stability_loss(frame: FrameState, prev: FrameState, weight: float) -> GuidanceScore:
    """Weighted mean absolute difference to the previous frame.

    The mean (rather than the raw L1 sum) keeps the weight scale independent
    of resolution. The subgradient at exact ties is taken as zero.
    """
    if frame.pixels.shape != prev.pixels.shape:
        raise ValueError(
            f"frame shapes differ: {frame.pixels.shape} vs {prev.pixels.shape}"
        )
    if weight < 0:
        raise ValueError(f"stability weight must be nonnegative, got {weight}")
    diff = frame.pixels - prev.pixels
    value = weight * float(np.mean(np.abs(diff)))
    gradient = (weight / diff.size) * np.sign(diff)
    return GuidanceScore(value, gradient)


def optimize_frame(
    init: FrameState,
    prev: FrameState | None,
    scorer: ScorerHandle,
    weighted_prompts: list[tuple[TextEmbedding, float]],
    temp_params: TemperatureParams,
    opt_params: OptimizerParams,
    rng: np.random.Generator,
) -> FrameResult:
    """Minimize text loss + stability loss over the frame's pixels.

    Runs Adam for the configured number of steps (the first frame gets its
    own budget), clamping pixels to [0, 1] after every step. The returned
    trace holds the total loss at every iterate including the final one;
    the result's loss_initial/loss_final pair is evaluated under a common
    view geometry. View geometry for each step is drawn from the rng stream.
    """
    if (prev is None) != (init.index == 0):
        raise ValueError("prev must be supplied exactly when init.index > 0")
    if prev is not None and prev.index + 1 != init.index:
        raise ValueError(f"prev index {prev.index} does not precede frame {init.index}")
    if not weighted_prompts:
        raise ValueError("weighted_prompts must contain at least one entry")

    iterations = (
        opt_params.iterations_first_frame if init.index == 0 else opt_params.iterations_per_frame
    )
    x = np.clip(init.pixels, 0.0, 1.0)
    if iterations == 0:
        return FrameResult(FrameState(x, init.index), [], 0.0, None, None)

    policy = opt_params.augmentation
    w_c = temp_params.stability_weight
    start = FrameState(x.copy(), init.index)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace: list[float] = []
    scorer_seconds = 0.0
    final_geometry_state = None

    def evaluate(state: FrameState, stream: np.random.Generator, k: int) -> tuple[float, np.ndarray]:
        nonlocal scorer_seconds
        t0 = time.perf_counter()
        try:
            score = text_loss(scorer, state, weighted_prompts, policy, stream)
        except NumericError as exc:
            raise NumericError(f"iteration {k}: {exc}") from exc
        scorer_seconds += time.perf_counter() - t0
        value = score.value
        grad = score.gradient
        if prev is not None and w_c > 0.0:
            stab = stability_loss(state, prev, w_c)
            value += stab.value
            grad = grad + stab.gradient
        if not np.isfinite(value) or not np.isfinite(grad).all():
            raise NumericError(f"non-finite total loss at frame {init.index}, iteration {k}")
        return float(value), grad

    for k in range(iterations + 1):
        if k == iterations:
            final_geometry_state = rng.bit_generator.state
        value, grad = evaluate(FrameState(x, init.index), rng, k)
        trace.append(value)
        if k == iterations:
            break
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * grad
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (grad * grad)
        step = opt_params.step_size * np.sqrt(1.0 - ADAM_BETA2 ** (k + 1)) / (1.0 - ADAM_BETA1 ** (k + 1))
        x = x - step * m / (np.sqrt(v) + ADAM_EPS)
        np.clip(x, 0.0, 1.0, out=x)

    # Paired endpoint evaluation: score the starting iterate under the same
    # view geometry as the final trace entry.
    replay_bits = type(rng.bit_generator)()
    replay_bits.state = final_geometry_state
    loss_initial, _ = evaluate(start, np.random.Generator(replay_bits), iterations)

    return FrameResult(FrameState(x, init.index), trace, scorer_seconds, loss_initial, trace[-1])

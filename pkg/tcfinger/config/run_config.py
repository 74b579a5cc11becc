import os
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tcfinger.classify import DEFAULT_EPOCHS, DEFAULT_FOLDS, DEFAULT_KERNEL, DEFAULT_LAMBDA, KERNELS
from tcfinger.detect import DEFAULT_MAX_FAR
from tcfinger.fingerprint import DEFAULT_CHUNK_SIZE, DEFAULT_TIMEOUT_S


class IdentSettings(BaseModel):
    """Model order and Markov-parameter fit used by `identify`."""
    model_config = ConfigDict(extra="forbid")

    order: int = Field(default=2, ge=1)
    horizon: int = Field(default=40, ge=2)
    ridge: float = Field(default=1e-6, ge=0.0)

    @model_validator(mode="after")
    def _check(self) -> "IdentSettings":
        # the Hankel block is (horizon // 2) x (horizon // 2)
        if self.order > self.horizon // 2:
            raise ValueError(f"order {self.order} needs horizon >= {2 * self.order}, got {self.horizon}")
        return self


class RunConfig(BaseModel):
    """
    Resolved configuration of one pipeline run.

    Attributes:
        scenario: Path of a scenario JSON; None uses the bundled default plant
        seed: Root seed of every random draw of the run
        out_dir: Directory receiving datasets, models and reports
        duration_s: Simulated plant time for simulate/attack
        kernel / folds / epochs / lam: Classifier settings
        chunk_size: Transition times per fingerprint chunk
        timeout_s: Transition timeout; also the detection grace period
        alpha: K-S significance level
        max_far: Per-direction false alarm budget of the CUSUM thresholds
        delay_min_s / delay_max_s: Watermark delay range
        workers: Process pool size for folds and Monte-Carlo trials; None runs serially
        operations_per_device: Bench operations per device in the classification studies
        attacks_per_type: Instances of each attack type in the scripted campaign
    """
    model_config = ConfigDict(extra="forbid")

    scenario: Optional[str] = None
    seed: int = 0
    out_dir: str = "out"
    duration_s: float = Field(default=20000.0, gt=0)
    kernel: str = DEFAULT_KERNEL
    folds: int = Field(default=DEFAULT_FOLDS, ge=2)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    lam: float = Field(default=DEFAULT_LAMBDA, gt=0)
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=2)
    timeout_s: float = Field(default=DEFAULT_TIMEOUT_S, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    max_far: float = Field(default=DEFAULT_MAX_FAR, ge=0, lt=1)
    delay_min_s: float = Field(default=5.0, ge=0)
    delay_max_s: float = Field(default=36.0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)
    operations_per_device: int = Field(default=1000, ge=20)
    attacks_per_type: int = Field(default=30, ge=1)
    ident: IdentSettings = Field(default_factory=IdentSettings)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got '{self.kernel}'")
        if self.delay_max_s < self.delay_min_s:
            raise ValueError("delay_max_s must be >= delay_min_s")
        if self.scenario is not None and not os.path.isfile(self.scenario):
            raise ValueError(f"scenario file {self.scenario} does not exist")
        return self

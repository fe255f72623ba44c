"""
Epoch loop with mini-batches, Adam, validation and early stopping

The loop is shared by every stage: what is trained and how its gradients are computed lives
in an ``Objective``; where batches come from lives in a ``BatchSource``.
"""
import logging
import math
import time
from typing import Callable, Dict, Iterator, Optional, Protocol, Tuple

import numpy as np

from app.common.enums import ChannelMode, TrainStage
from app.common.errors import ConfigError, TrainingError
from app.data.series import WindowSet
from app.model.experts import LinearExpert, expert_forward
from app.model.forecaster import MixtureForecaster
from app.training.backprop import expert_backward, forward_with_cache, mixture_backward, model_parameters, weight_key, bias_key
from app.training.optim import OptimizerState, adam_step, lr_schedule, mse_loss
from app.training.schemas import EpochLog, TrainConfig, TrainingHistory

# Configure logging
logger = logging.getLogger(__name__)

# Rows per chunk when computing validation losses
EVAL_CHUNK = 4096

Batch = Tuple[np.ndarray, np.ndarray]


class Objective(Protocol):
    def parameters(self) -> Dict[str, np.ndarray]: ...

    def loss_and_grads(self, X: np.ndarray, Y: np.ndarray, rng: np.random.Generator) -> Tuple[float, Dict[str, np.ndarray]]: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


class BatchSource(Protocol):
    def batches(self, rng: np.random.Generator) -> Iterator[Batch]: ...


class ExpertObjective:
    """
    A single learnable expert fit on its own windows
    """

    def __init__(self, expert: LinearExpert):
        self.expert = expert

    def parameters(self) -> Dict[str, np.ndarray]:
        return {weight_key(self.expert): self.expert.weight, bias_key(self.expert): self.expert.bias}

    def loss_and_grads(self, X, Y, rng):
        loss, d_output = mse_loss(expert_forward(self.expert, X), Y)
        return loss, expert_backward(self.expert, X, d_output)

    def predict(self, X):
        return expert_forward(self.expert, X)


class MixtureObjective:
    """
    The whole mixture; frozen experts stay fixed, the gate trains when ``train_gate`` is set

    Gate noise is drawn from ``noise_rng`` when given, otherwise from the trainer's stream.
    """

    def __init__(self, model: MixtureForecaster, train_gate: bool = True, noise_rng: Optional[np.random.Generator] = None):
        self.model = model
        self.train_gate = train_gate
        self.noise_rng = noise_rng

    def parameters(self) -> Dict[str, np.ndarray]:
        return model_parameters(self.model, self.train_gate)

    def loss_and_grads(self, X, Y, rng):
        output, cache = forward_with_cache(self.model, X, training=True, rng=self.noise_rng or rng)
        loss, d_output = mse_loss(output, Y)
        return loss, mixture_backward(self.model, cache, d_output, train_gate=self.train_gate)

    def predict(self, X):
        return self.model.predict(X)


class WindowBatches:
    """
    Shuffled mini-batches over one window set

    In multivariate mode a batch holds ``batch_size`` timestamp windows, each with the rows of
    every channel starting at that offset.
    """

    def __init__(self, windows: WindowSet, batch_size: int, channel_mode: ChannelMode = ChannelMode.INDEPENDENT):
        if len(windows) == 0:
            raise TrainingError("No training windows")
        self.windows = windows
        self.batch_size = batch_size
        self.channel_mode = channel_mode
        if channel_mode == ChannelMode.MULTIVARIATE:
            _, inverse = np.unique(windows.start_offset, return_inverse=True)
            order = np.argsort(inverse, kind="stable")
            bounds = np.flatnonzero(np.diff(inverse[order])) + 1
            self.groups = np.split(order, bounds)
        else:
            self.groups = None

    def __len__(self) -> int:
        units = len(self.groups) if self.groups is not None else len(self.windows)
        return math.ceil(units / self.batch_size)

    def batches(self, rng: np.random.Generator) -> Iterator[Batch]:
        inputs, targets = self.windows.inputs, self.windows.targets
        if self.groups is None:
            order = rng.permutation(len(self.windows))
            for start in range(0, order.size, self.batch_size):
                rows = np.sort(order[start : start + self.batch_size])
                yield inputs[rows], targets[rows]
            return
        order = rng.permutation(len(self.groups))
        for start in range(0, order.size, self.batch_size):
            rows = np.concatenate([self.groups[g] for g in order[start : start + self.batch_size]])
            yield inputs[rows], targets[rows]


def evaluate_loss(objective: Objective, windows: WindowSet) -> Optional[float]:
    """
    MSE of the objective's predictions over a window set, or None when it is empty
    """
    if len(windows) == 0:
        return None
    total = 0.0
    for start in range(0, len(windows), EVAL_CHUNK):
        part = windows.subset(np.arange(start, min(start + EVAL_CHUNK, len(windows))))
        total += float(np.sum((objective.predict(part.inputs) - part.targets) ** 2))
    return total / (len(windows) * windows.horizon)


class Trainer:
    """
    Runs the epoch loop for one stage

    Args:
        config (TrainConfig): learning rate, decay, epochs and patience
        stage (TrainStage): recorded in every log line
        log_sink (Callable[[EpochLog], None]): optional receiver of every epoch log
    """

    def __init__(self, config: TrainConfig, stage: TrainStage, log_sink: Optional[Callable[[EpochLog], None]] = None):
        self.config = config
        self.stage = stage
        self.log_sink = log_sink

    def fit(
        self,
        objective: Objective,
        source: BatchSource,
        validation: Optional[WindowSet],
        rng: np.random.Generator,
    ) -> TrainingHistory:
        """
        Train until the epoch budget or ``patience`` epochs without validation improvement

        The parameters of the best epoch are restored before returning. Without validation
        windows the training loss decides.
        """
        params = objective.parameters()
        if not params:
            raise ConfigError(f"Nothing to train in stage {self.stage.value}: every parameter is frozen")
        if validation is not None and len(validation) == 0:
            logger.warning(f"Stage {self.stage.value}: empty validation set, early stopping on training loss")
            validation = None

        state = OptimizerState()
        history = TrainingHistory(stage=self.stage)
        best_loss = math.inf
        best_params = {name: value.copy() for name, value in params.items()}
        stale = 0

        for epoch in range(1, self.config.epochs + 1):
            started = time.perf_counter()
            lr = lr_schedule(epoch, self.config.learning_rate, self.config.lr_decay)
            losses, sizes = [], []
            for X, Y in source.batches(rng):
                loss, grads = objective.loss_and_grads(X, Y, rng)
                adam_step(state, params, grads, lr)
                losses.append(loss)
                sizes.append(X.shape[0])
            if not losses:
                raise TrainingError(f"Stage {self.stage.value}: batch source produced no batches")
            train_loss = float(np.average(losses, weights=sizes))
            val_loss = evaluate_loss(objective, validation) if validation is not None else None

            log = EpochLog(
                stage=self.stage,
                epoch=epoch,
                lr=lr,
                train_loss=train_loss,
                val_loss=val_loss,
                seconds=time.perf_counter() - started,
            )
            history.epochs.append(log)
            logger.info(log.model_dump_json())
            if self.log_sink is not None:
                self.log_sink(log)

            monitored = val_loss if val_loss is not None else train_loss
            if not math.isfinite(monitored):
                raise TrainingError(f"Stage {self.stage.value} diverged at epoch {epoch}", {"loss": monitored})
            if monitored < best_loss:
                best_loss = monitored
                history.best_epoch = epoch
                history.best_val_loss = monitored
                best_params = {name: value.copy() for name, value in params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= self.config.patience:
                    history.stopped_early = True
                    logger.info(f"Stage {self.stage.value}: no improvement for {stale} epochs, stopping at epoch {epoch}")
                    break

        for name, value in params.items():
            np.copyto(value, best_params[name])
        return history

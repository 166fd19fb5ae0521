"""Loss functions, optimizers and the training loop."""

from .losses import LossBreakdown, composite_loss, mvcl_penalty, snr_weight
from .loop import (
    METRIC_FIELDS,
    TrainConfig,
    TrainingError,
    TrainResult,
    load_trained_model,
    read_metrics,
    step_batch,
    train_loop,
    training_loss,
    uncoded_ber,
    validation_batches,
)
from .optim import Adam, OptimizerState, linear_decay

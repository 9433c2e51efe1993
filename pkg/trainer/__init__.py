# Optimization, training loop and evaluation
from trainer.adam import Adam, AdamHyper, AdamState, adam_step, clip_grad_norm
from trainer.evaluate import EvalReport, evaluate, position_error_profile, write_predictions
from trainer.loop import TrainResult, train

__all__ = [
    "Adam", "AdamHyper", "AdamState", "adam_step", "clip_grad_norm",
    "EvalReport", "evaluate", "position_error_profile", "write_predictions",
    "TrainResult", "train",
]

from .tensor import Tape, Tensor, backward
from .optim import SGD, sgd_step
from . import ops

__all__ = ["Tensor", "Tape", "backward", "sgd_step", "SGD", "ops"]

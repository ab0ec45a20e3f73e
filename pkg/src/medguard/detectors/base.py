from __future__ import annotations

import numpy as np


class DetectorError(RuntimeError):
    """A detector could not be fitted or applied."""


class ConvergenceError(DetectorError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


def check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    values = np.unique(y)
    if not np.isin(values, [0, 1]).all():
        raise DetectorError(f"labels must be 0/1, got {values.tolist()}")
    if values.size != 2:
        raise DetectorError("training labels contain a single class")
    return y.astype(np.int64)

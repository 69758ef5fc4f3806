import numpy as np

from app.nn.tensor import Tensor, as_tensor

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def gaussian_nll(x, mean, log_std):
    """
    -log N(x; mean, exp(log_std)^2), summed over the last dimension

    Works on Tensors (taped) or plain arrays; the return type follows
    the inputs.
    """
    if not any(isinstance(v, Tensor) for v in (x, mean, log_std)):
        x, mean, log_std = (np.asarray(v, dtype=np.float64) for v in (x, mean, log_std))
        z = (x - mean) * np.exp(-log_std)
        return (0.5 * z ** 2 + log_std + HALF_LOG_2PI).sum(axis=-1)
    x, mean, log_std = as_tensor(x), as_tensor(mean), as_tensor(log_std)
    z = (x - mean) * (-log_std).exp()
    return (z ** 2 * 0.5 + log_std + HALF_LOG_2PI).sum(axis=-1)

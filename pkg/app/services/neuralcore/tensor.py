from typing import Dict, Sequence

import numpy as np
import numpy.typing as npt

# Row-major float64 arrays; layers take a leading batch axis
Tensor = npt.NDArray[np.float64]

# Parameter name -> array, in declaration order
Params = Dict[str, Tensor]


def glorot_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=tuple(shape))


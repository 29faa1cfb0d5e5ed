import os
import random
import logging

import numpy as np


log = logging.getLogger(__name__)


def seed_everything(seed: int) -> np.random.Generator:
    """Sets random seeds for reproducibility.

    Args:
        seed (int): Random seed.

    Returns:
        np.random.Generator: Generator seeded with ``seed``, used for the
        randomized checks of a run.
    """
    if seed is not None:
        log.info("Global seed set to {}.".format(seed))

        np.random.seed(seed)
        random.seed(seed)
        os.environ["PYTHONHASHSEED"] = str(seed)
    return np.random.default_rng(seed)

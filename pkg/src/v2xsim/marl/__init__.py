"""Multi-agent PPO with a centralized critic, implemented directly on numpy.

``nets`` holds the parameter containers, forward/backward passes and the
Adam optimizer; ``ppo`` holds advantage estimation, the clipped update, the
training loop and evaluation; ``checkpoint`` persists parameter bundles.
Everything runs in float64 so analytic gradients can be checked against
central finite differences to tight tolerances.
"""

from .nets import AdamOptimizer, MlpParams, init_actor, init_critic  # noqa: F401
from .ppo import (  # noqa: F401
    PolicyBundle,
    TrainConfig,
    entropy_coef,
    evaluate,
    gae_advantages,
    make_bundle,
    ppo_update,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401

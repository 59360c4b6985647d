"""Transfer learning with a common-information reconstruction loss.

Staged feed-forward models trained from scratch in numpy, three task
suites (MNIST digit transfer, D2D power control, MISO beamforming to
localization) with their classical baselines, and a config-driven
experiment harness.
"""

__version__ = "0.1.0"

from . import backend  # noqa: F401

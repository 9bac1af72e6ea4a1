"""Multimodal harmful-meme classification toolkit.

Thin wrapper over the compiled core. The heavy lifting (dataset pipeline,
annotation consolidation, synthetic encoders, the attention-fusion model,
focal-loss training and the metric suite) lives in ``momenta._momenta``.
"""

from ._momenta import *  # noqa: F401,F403
from ._momenta import __version__  # noqa: F401

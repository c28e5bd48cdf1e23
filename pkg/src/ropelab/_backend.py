"""Pick the compiled kernels when available, else the numpy fallback.

Set ``ROPELAB_BACKEND=python`` to force the fallback even when the
extension is built.
"""

import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

if os.environ.get("ROPELAB_BACKEND", "").lower() == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        logger.debug("compiled kernels unavailable, using numpy fallback")
        kernels = _fallback
        BACKEND = "python"

splitmix64_fill = kernels.splitmix64_fill
splitmix64_raw = kernels.splitmix64_raw
rope_rotate = kernels.rope_rotate
causal_softmax_entropy = kernels.causal_softmax_entropy

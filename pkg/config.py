"""
Operational configuration for the edge detector.

Algorithm parameters (Gabor bank, thresholds, ...) live in the run config
JSON (see run_config.py); the knobs here are environment-driven defaults
for how the work is carried out.
"""

import os
from typing import Iterable, List

# Largest Gabor kernel half width we are willing to build (taps per side).
MAX_HALF_WIDTH = int(os.environ.get("EDGE_MAX_HALF_WIDTH", "64"))

# "direct", "fft" or "auto"
CONV_METHOD = os.environ.get("EDGE_CONV_METHOD", "auto")
# auto: direct convolution up to this half width, FFT above it
DIRECT_MAX_HALF_WIDTH = int(os.environ.get("EDGE_DIRECT_MAX_HALF_WIDTH", "7"))

# Default worker count for sweep (1 = in-process)
JOBS = int(os.environ.get("EDGE_JOBS", "1"))

# Matching tolerance as a fraction of the image diagonal (BSDS convention)
TOL_FRACTION = float(os.environ.get("EDGE_TOL_FRACTION", "0.0075"))

# CSV float format for reports; fixed so reruns are byte-identical
REPORT_FLOAT_FORMAT = "%.6f"

LAB_CHANNELS = ("L", "a", "b")


class ParameterError(ValueError):
    """Invalid parameter or violated invariant. `fields` names the config paths involved."""

    def __init__(self, message: str, fields: Iterable[str] = ()):
        self.fields: List[str] = list(fields)
        if self.fields:
            message = f"{message} [{', '.join(self.fields)}]"
        super().__init__(message)

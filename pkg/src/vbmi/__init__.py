"""Wearable cVEP brain-computer interface toolkit.

Subpackages cover the stimulation code (``codebook``), front-end budget
(``hwcalc``), device wire protocol (``protocol``), synthetic subjects
(``synth``), SDK signal path (``signal``), template decoders (``decoder``),
template storage service (``backend``) and closed-loop experiments
(``harness``).
"""

from .codebook import CodeSequence, base_code, target_codes
from .decoder import TDCA, TRCA
from .exceptions import VbmiError

__version__ = "0.1.0"

__all__ = ["TDCA", "TRCA", "CodeSequence", "VbmiError", "__version__", "base_code", "target_codes"]

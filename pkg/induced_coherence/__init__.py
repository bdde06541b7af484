"""
Induced coherence - complementarity of coherence and distinguishability in a
two-crystal induced-coherence interferometer, at any parametric gain
"""

__version__ = "0.1.0"
__author__ = "Mohammad Najeeb"
__email__ = "mona00002@uni-saarland.de"

from .bridge import Config, InterferometerBridge
from .models import DetectionParams, ExperimentParams

__all__ = ["Config", "InterferometerBridge", "DetectionParams", "ExperimentParams"]

# flake8: noqa
from .core import ConfigurationError, NumericalValidationError, StateVector
from .models import DickeCat, MorseDecoherence, MorseWavePacket
from .presets import PRESETS, load_config

"""Multi-radar human tracking and fall detection on mmWave point clouds."""
from .config import PipelineConfig, StatusLabel, load_config, resolve_config
from .errors import MMTrackError

__version__ = "0.1.0"

__all__ = ["PipelineConfig", "StatusLabel", "load_config", "resolve_config", "MMTrackError", "__version__"]

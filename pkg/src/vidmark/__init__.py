"""Query-conditioned video markerization toolkit and VTG evaluation
harness."""

__version__ = "0.1.0"

from .grounding import HighlightPrediction, TemporalSpan
from .masks import FrameMarkers, InstanceMask, Marker
from .render import StyleConfig
from .tags import TagList

__all__ = [
    "FrameMarkers",
    "HighlightPrediction",
    "InstanceMask",
    "Marker",
    "StyleConfig",
    "TagList",
    "TemporalSpan",
    "__version__",
]

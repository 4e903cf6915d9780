"""Camera view and crop recommendation beyond the current frame."""

from viewscout.boxes import Box, Orientation

__all__ = ["Box", "Orientation"]
__version__ = "0.1.0"

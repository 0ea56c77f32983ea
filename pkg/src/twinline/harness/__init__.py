from .clock import EventLoop
from .links import Link
from .stack import InProcessStack, StackOptions
from .trace import TraceRecorder, compare_traces

__all__ = [
    "EventLoop",
    "Link",
    "InProcessStack",
    "StackOptions",
    "TraceRecorder",
    "compare_traces",
]

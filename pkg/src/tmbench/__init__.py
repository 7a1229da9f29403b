"""Tag-system reasoning benchmark: interpreter, UTM compiler, generator and scoring."""
from .tag_core import MalformedInput, TagSystem, Trace, format_queue, format_trace, parse_queue, run, step
from .instance_gen import BenchmarkInstance, GenConfig, generate_dataset, read_dataset, write_dataset

__version__ = "0.1.0"

__all__ = [
    "BenchmarkInstance",
    "GenConfig",
    "MalformedInput",
    "TagSystem",
    "Trace",
    "format_queue",
    "format_trace",
    "generate_dataset",
    "parse_queue",
    "read_dataset",
    "run",
    "step",
    "write_dataset",
]

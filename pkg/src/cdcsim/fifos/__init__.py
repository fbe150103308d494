from .config import CLOCKED_DESIGNS, DESIGNS, CorruptWord, FifoConfig
from .gray import GrayFifo, UnsafeBinaryFifo
from .pausible import PausibleFifo
from .selftimed import SelfTimedFifo, SelfTimedPipeline, selftimed_fifo_step
from .stari import LinkResult, elastic_link_run, slack_bound

__all__ = [
    "CLOCKED_DESIGNS", "DESIGNS", "CorruptWord", "FifoConfig", "GrayFifo", "UnsafeBinaryFifo",
    "PausibleFifo", "SelfTimedFifo", "SelfTimedPipeline", "selftimed_fifo_step", "LinkResult",
    "elastic_link_run", "slack_bound",
]

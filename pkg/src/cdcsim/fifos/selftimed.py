"""
Two-phase micropipeline built from C-element stages.

Stage ``i`` has a control wire ``c[i]`` driven by a C-element over its
left neighbour's wire and the inverse of its right neighbour's wire. It
holds a word exactly when ``c[i] != c[i+1]``. A stage sees its left
neighbour ``forward`` ps after that neighbour switched and its right
neighbour ``backward`` ps after it switched. Data is bundled: a stage
latches its predecessor's word at the moment it switches.

The environment sits at both ends: ``c_in`` is the put request wire and
``c_out`` the get acknowledge wire.
"""

from __future__ import annotations

from typing import Optional

from ..elements import c_element
from ..kernel import Simulator


class SelfTimedPipeline:
    """Event-driven micropipeline on a shared :class:`~cdcsim.kernel.Simulator`.

    ``init_words`` preloads that many words (sequence-numbered from 0) into
    the output end, as an elastic buffer wants.
    """

    def __init__(self, sim: Simulator, depth: int, forward: int = 50, backward: int = 50,
                 init_words: int = 0, record: bool = False):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0 <= init_words <= depth:
            raise ValueError("init_words must fit in the pipeline")
        self.sim = sim
        self.depth = depth
        self.forward = forward
        self.backward = backward
        # firing counts: stages depth-init..depth-1 hold words 0..init-1, oldest at the end
        counts = [init_words] * depth
        for j in range(init_words):
            counts[depth - 1 - j] = j + 1
        self.c = [n & 1 for n in counts]
        self.data: list = [None] * depth
        for j in range(init_words):
            self.data[depth - 1 - j] = j
        self.c_in = init_words & 1
        self.c_out = 0
        self.data_in = None
        # what each stage currently sees of its neighbours
        self.left_view = [self.c_in] + self.c[:-1]
        self.right_view = self.c[1:] + [self.c_out]
        # what the environment sees of the pipeline ends
        self.in_view = self.c[0]
        self.out_view = self.c[-1]
        self.fires: Optional[list[tuple[int, int]]] = [] if record else None
        self.puts = init_words
        self.gets = 0

    # environment side --------------------------------------------------

    def can_put(self) -> bool:
        return self.in_view == self.c_in

    def can_get(self) -> bool:
        return self.out_view != self.c_out

    def put(self, word) -> bool:
        if not self.can_put():
            return False
        self.data_in = word
        self.c_in ^= 1
        self.puts += 1
        self.sim.schedule(self.sim.now + self.forward, "st-fwd", self._see_left, (0, self.c_in))
        return True

    def get(self):
        if not self.can_get():
            return None
        word = self.data[-1]
        self.c_out ^= 1
        self.gets += 1
        self.sim.schedule(self.sim.now + self.backward, "st-bwd", self._see_right,
                          (self.depth - 1, self.c_out))
        return word

    @property
    def occupancy(self) -> int:
        c = self.c
        return sum(c[i] != c[i + 1] for i in range(self.depth - 1)) + (c[-1] != self.c_out)

    # internal wiring ---------------------------------------------------

    def _see_left(self, ev) -> None:
        i, level = ev.payload
        self.left_view[i] = level
        self._evaluate(i)

    def _see_right(self, ev) -> None:
        i, level = ev.payload
        if i < 0:
            self.in_view = level
            return
        self.right_view[i] = level
        self._evaluate(i)

    def _evaluate(self, i: int) -> None:
        old = self.c[i]
        new = c_element(self.left_view[i], 1 - self.right_view[i], old)
        if new == old:
            return
        self.c[i] = new
        self.data[i] = self.data_in if i == 0 else self.data[i - 1]
        now = self.sim.now
        if self.fires is not None:
            self.fires.append((now, i))
        if i + 1 < self.depth:
            self.sim.schedule(now + self.forward, "st-fwd", self._see_left, (i + 1, new))
        else:
            self.sim.schedule(now + self.forward, "st-out", self._see_out, new)
        self.sim.schedule(now + self.backward, "st-bwd", self._see_right, (i - 1, new))

    def _see_out(self, ev) -> None:
        self.out_view = ev.payload


def selftimed_fifo_step(pipe: SelfTimedPipeline, side: str, word=None):
    """Drive one environment handshake at the current simulation time.

    ``put`` returns whether the pipeline accepted ``word``; ``get`` returns
    the word handed out, or None when the output stage is empty.
    """
    if side == "put":
        return pipe.put(word)
    if side == "get":
        return pipe.get()
    raise ValueError(f"side must be 'put' or 'get', not {side!r}")


class SelfTimedFifo:
    """Clocked producer and consumer around a micropipeline.

    Each endpoint handshakes with the pipeline only at its own clock edges.
    """

    def __init__(self, sim: Simulator, depth: int, forward: int = 50, backward: int = 50):
        self.pipe = SelfTimedPipeline(sim, depth, forward, backward)
        self.depth = depth
        self.flag_violations = 0
        self.stale_violations = 0
        self.overflows = 0
        self.underflows = 0
        self.metastable_events = 0
        self.escapes = 0

    def write_cycle(self, offer, edge: int) -> tuple[bool, bool]:
        full = not self.pipe.can_put()
        if offer is None or full:
            return False, full
        return self.pipe.put(offer), False

    def read_cycle(self, ready: bool, edge: int) -> tuple[object, bool]:
        empty = not self.pipe.can_get()
        if not ready or empty:
            return None, empty
        return self.pipe.get(), False

    @property
    def occupancy(self) -> int:
        return self.pipe.occupancy

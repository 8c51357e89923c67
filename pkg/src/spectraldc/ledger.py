"""Two-level memory model: flop, word and message counters.

A ledger simulates a fast memory of ``M`` words in front of an unbounded
slow memory.  Kernels name the blocks they touch; a block that is not
resident costs ``p*q`` words and one message, and residency is managed
with an LRU policy.  Counting never feeds back into arithmetic.
"""
from __future__ import annotations

import math
import threading
import weakref
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field

DEFAULT_FAST_MEMORY = 3 * 64 * 64


@dataclass
class PhaseCounters:
    flops: int = 0
    words: int = 0
    messages: int = 0

    def as_tuple(self):
        return self.flops, self.words, self.messages


@dataclass
class CostLedger:
    """Counters for one algorithm run.

    Parameters
    ----------
    M : int
        Fast-memory capacity in words.  Kernels derive their blocksize
        from it, whether or not counting is enabled.
    enabled : bool
        A disabled ledger keeps every counter at zero.
    """

    M: int = DEFAULT_FAST_MEMORY
    enabled: bool = True
    flops: int = 0
    words_moved: int = 0
    messages: int = 0
    phases: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 4:
            raise ValueError("fast memory must hold at least 4 words")
        self._lock = threading.RLock()
        self._resident = OrderedDict()
        self._used = 0
        self._phase_stack = ["default"]
        self._tags = {}
        self._serial = 0

    @property
    def blocksize(self) -> int:
        return max(1, int(math.isqrt(self.M // 3)))

    @property
    def phase(self) -> str:
        return self._phase_stack[-1]

    @contextmanager
    def in_phase(self, label: str):
        self._phase_stack.append(label)
        try:
            yield self
        finally:
            self._phase_stack.pop()

    def record(self, phase=None, words=0, messages=0, flops=0):
        if words < 0 or messages < 0 or flops < 0:
            raise ValueError("counts must be nonnegative")
        if not self.enabled:
            return
        label = phase or self.phase
        with self._lock:
            self.flops += int(flops)
            self.words_moved += int(words)
            self.messages += int(messages)
            pc = self.phases.setdefault(label, PhaseCounters())
            pc.flops += int(flops)
            pc.words += int(words)
            pc.messages += int(messages)

    def add_flops(self, n, phase=None):
        if n:
            self.record(phase, flops=n)

    def tag(self, obj) -> int:
        """Serial number identifying ``obj`` for as long as it is alive.

        Block keys built from ``id()`` alone would let a new array inherit
        the residency of a freed one at the same address.
        """
        if not self.enabled:
            return 0
        k = id(obj)
        with self._lock:
            ent = self._tags.get(k)
            if ent is not None and ent[0]() is obj:
                return ent[1]
            self._serial += 1

            def drop(ref, k=k):
                cur = self._tags.get(k)
                if cur is not None and cur[0] is ref:
                    del self._tags[k]

            self._tags[k] = (weakref.ref(obj, drop), self._serial)
            return self._serial

    def touch(self, key, p, q=1, phase=None):
        """Make block ``key`` of shape ``p x q`` resident in fast memory."""
        size = int(p) * int(q)
        if not self.enabled or size <= 0:
            return
        with self._lock:
            if key in self._resident:
                self._resident.move_to_end(key)
                return
        self.record(phase, words=size, messages=1)
        if size > self.M:
            return
        with self._lock:
            self._resident[key] = size
            self._used += size
            while self._used > self.M:
                _, s = self._resident.popitem(last=False)
                self._used -= s

    def evict(self, prefix=None):
        """Drop resident blocks (all, or those whose key starts with prefix)."""
        with self._lock:
            if prefix is None:
                self._resident.clear()
                self._used = 0
                return
            for key in [k for k in self._resident if k[0] == prefix]:
                self._used -= self._resident.pop(key)

    def phase_rows(self):
        return [(name, *pc.as_tuple()) for name, pc in self.phases.items()]

    def reset(self):
        with self._lock:
            self.flops = self.words_moved = self.messages = 0
            self.phases.clear()
            self._resident.clear()
            self._used = 0


def null_ledger(M=DEFAULT_FAST_MEMORY) -> CostLedger:
    return CostLedger(M=M, enabled=False)


def ensure_ledger(ledger) -> CostLedger:
    return null_ledger() if ledger is None else ledger

"""Slicing of document iterators by position, with fractional endpoints.

``dataset.docs_iter()[100:110]`` or ``[:Fraction(1, 3)]`` resolve to absolute
positions first and then ask the source for exactly those records, so a
docstore-backed view never decodes a record it does not yield.

Rules, where Python slicing leaves room:

* step must be a positive integer;
* a start or stop in ``[0, 1]`` given as a ``Fraction`` (or a float, which is
  converted to the nearest rational with denominator up to 10**6) means that
  fraction of the corpus, floored; ``1`` as an ``int`` is still position 1;
* a view cannot be sliced or iterated again once iteration has begun.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from .errors import InvalidSlice

def _bound(value):
    if value is None:
        return None
    if isinstance(value, bool):
        raise InvalidSlice(f"not a slice bound: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise InvalidSlice(f"not a slice bound: {value!r}")
        value = Fraction(value).limit_denominator(10 ** 6)
    if isinstance(value, Fraction):
        if not 0 <= value <= 1:
            raise InvalidSlice(f"fractional bound must lie in [0, 1]: {value}")
        return value
    index = getattr(value, "__index__", None)
    if index is not None:
        return index()
    raise InvalidSlice(f"not a slice bound: {value!r}")


@dataclass(frozen=True)
class SliceExpr:
    start: object = None
    stop: object = None
    step: int = 1

    def __post_init__(self):
        object.__setattr__(self, "start", _bound(self.start))
        object.__setattr__(self, "stop", _bound(self.stop))
        step = 1 if self.step is None else self.step
        if isinstance(step, bool) or not isinstance(step, int) or step < 1:
            raise InvalidSlice(f"step must be a positive integer, got {step!r}")
        object.__setattr__(self, "step", step)

    @classmethod
    def from_slice(cls, s: slice) -> "SliceExpr":
        return cls(s.start, s.stop, s.step)

    @classmethod
    def parse(cls, text: str) -> "SliceExpr":
        """Parse ``start:stop[:step]`` as used on the command line."""
        parts = text.strip().split(":")
        if len(parts) not in (2, 3):
            raise InvalidSlice(f"expected start:stop[:step], got {text!r}")
        start, stop = (_parse_bound(p) for p in parts[:2])
        step = 1
        if len(parts) == 3 and parts[2].strip():
            try:
                step = int(parts[2])
            except ValueError:
                raise InvalidSlice(f"bad step {parts[2]!r}") from None
        return cls(start, stop, step)


_INT = re.compile(r"^[+-]?\d+$")
_FRAC = re.compile(r"^\d+/\d+$")
_DEC = re.compile(r"^\d*\.\d+$")


def _parse_bound(text):
    text = text.strip()
    if not text:
        return None
    if _INT.match(text):
        return int(text)
    try:
        if _FRAC.match(text) or _DEC.match(text):
            return Fraction(text)
    except ZeroDivisionError:
        pass
    raise InvalidSlice(f"bad slice bound {text!r}")


def _resolve(b, n, default):
    if b is None:
        return default
    if isinstance(b, Fraction):
        return (b.numerator * n) // b.denominator
    if b < 0:
        b += n
    return min(max(b, 0), n)


def resolve_bounds(expr: SliceExpr, n: int) -> tuple[int, int, int]:
    """Absolute ``(start, stop, step)`` with ``0 <= start <= stop <= n``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    start = _resolve(expr.start, n, 0)
    stop = _resolve(expr.stop, n, n)
    return start, max(start, stop), expr.step


class IterSource:
    """Positional access over a re-startable record iterator.

    Skipped positions are still parsed, since plain files offer no seeking.
    ``count`` is scanned on first use unless supplied.
    """

    def __init__(self, factory: Callable[[], Iterator], count: int | None = None):
        self.factory = factory
        self._count = count
        self.decoded = 0

    def count(self) -> int:
        if self._count is None:
            self._count = sum(1 for _ in self.factory())
        return self._count

    def iter_all(self) -> Iterator:
        for rec in self.factory():
            self.decoded += 1
            yield rec

    def read_positions(self, positions: range) -> Iterator:
        if not len(positions):
            return
        it = self.factory()
        pos = 0
        for want in positions:
            for _ in itertools.islice(it, want - pos):
                self.decoded += 1
            pos = want
            try:
                rec = next(it)
            except StopIteration:
                return
            self.decoded += 1
            pos += 1
            yield rec


class DocsView:
    """A lazily evaluated, sliceable run of records from a positional source.

    The source must provide ``count()`` and ``read_positions(range)``.
    """

    def __init__(self, source, positions: range | None = None):
        self.source = source
        self._positions = positions
        self._started = False

    @property
    def positions(self) -> range:
        if self._positions is None:
            self._positions = range(self.source.count())
        return self._positions

    @property
    def bounds(self) -> tuple[int, int, int]:
        r = self.positions
        return r.start, max(r.start, r.stop), r.step

    def __len__(self):
        return len(self.positions)

    def _check_fresh(self):
        if self._started:
            raise InvalidSlice("view has already been iterated")

    def slice(self, expr: SliceExpr) -> "DocsView":
        self._check_fresh()
        r = self.positions
        start, stop, step = resolve_bounds(expr, len(r))
        return DocsView(self.source, r[start:stop:step])

    def __getitem__(self, key):
        if isinstance(key, slice):
            return self.slice(SliceExpr.from_slice(key))
        if isinstance(key, SliceExpr):
            return self.slice(key)
        self._check_fresh()
        r = self.positions
        try:
            pos = r[key]
        except IndexError:
            raise IndexError(f"position {key} out of range for view of {len(r)}") from None
        return next(iter(self.source.read_positions(range(pos, pos + 1))))

    def __iter__(self):
        self._check_fresh()
        self._started = True
        if self._positions is None and hasattr(self.source, "iter_all"):
            # whole corpus: no need to know its size up front
            return iter(self.source.iter_all())
        return iter(self.source.read_positions(self.positions))

    def __repr__(self):
        if self._positions is None:
            return "DocsView(all)"
        r = self._positions
        return f"DocsView({r.start}:{r.stop}:{r.step}, n={len(r)})"


def slice_view(view: DocsView, expr: SliceExpr) -> DocsView:
    return view.slice(expr)


def partition(view: DocsView, workers: int, worker_index: int) -> DocsView:
    """Contiguous share ``worker_index`` of ``workers`` near-equal shares."""
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise InvalidSlice(f"workers must be a positive integer, got {workers!r}")
    if not 0 <= worker_index < workers:
        raise InvalidSlice(f"worker_index must be in [0, {workers}), got {worker_index}")
    m = len(view)
    return view[worker_index * m // workers:(worker_index + 1) * m // workers]

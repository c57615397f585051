"""Prompt scheduling: maps a frame index to cross-fade weights over the prompt list.

Each prompt owns a budget of frames. Within a non-final segment the weight
fades linearly from the segment's own prompt to its successor across the
segment's budget; the final segment holds full weight on the last prompt.
Frame 0 is therefore always one-hot on the first prompt.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass


@dataclass(frozen=True)
class PromptEntry:
    text: str
    frames: int


@dataclass(frozen=True)
class PromptTrack:
    """Ordered (prompt text, frame budget) pairs defining the narrative."""

    entries: tuple[PromptEntry, ...]

    def __post_init__(self) -> None:
        entries = tuple(
            e if isinstance(e, PromptEntry) else PromptEntry(*e) for e in self.entries
        )
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValueError("prompt track needs at least one entry")
        for i, entry in enumerate(entries):
            if not isinstance(entry.text, str) or not entry.text:
                raise ValueError(f"prompt {i}: text must be a nonempty string")
            if not isinstance(entry.frames, int) or isinstance(entry.frames, bool) or entry.frames < 1:
                raise ValueError(
                    f"prompt {i}: frame budget must be a positive integer, got {entry.frames!r}"
                )

    @property
    def total_frames(self) -> int:
        return sum(e.frames for e in self.entries)


@dataclass(frozen=True)
class SegmentLayout:
    """Prefix-sum bookkeeping for a track: start index of each prompt segment."""

    starts: tuple[int, ...]
    total_frames: int


@dataclass(frozen=True)
class PromptWeights:
    """Per-prompt weight vector for one frame; at most two nonzero entries."""

    weights: tuple[float, ...]
    frame_index: int

    def active(self) -> list[tuple[int, float]]:
        """(prompt index, weight) pairs with nonzero weight."""
        return [(i, w) for i, w in enumerate(self.weights) if w > 0.0]


def build_layout(track: PromptTrack) -> SegmentLayout:
    """Compute segment start indices and the total frame count for a track."""
    starts: list[int] = []
    total = 0
    for entry in track.entries:
        starts.append(total)
        total += entry.frames
    return SegmentLayout(tuple(starts), total)


def weights_at(track: PromptTrack, layout: SegmentLayout, t: int) -> PromptWeights:
    """Cross-fade weights for global frame index t.

    Inside segment n the successor's weight is (t - start_n) / budget_n and
    the owner keeps the remainder; the final segment stays one-hot on the
    last prompt. Weights sum to one with support on at most two consecutive
    prompts.
    """
    if len(layout.starts) != len(track.entries):
        raise ValueError("layout does not belong to this track")
    if t < 0 or t >= layout.total_frames:
        raise IndexError(f"frame index {t} outside [0, {layout.total_frames})")
    n = bisect_right(layout.starts, t) - 1
    weights = [0.0] * len(track.entries)
    if n == len(track.entries) - 1:
        weights[n] = 1.0
    else:
        fade = (t - layout.starts[n]) / track.entries[n].frames
        weights[n] = 1.0 - fade
        weights[n + 1] = fade
    return PromptWeights(tuple(weights), t)

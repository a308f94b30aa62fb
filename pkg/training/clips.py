"""
clips.py

Temporal clip sampling. Each sequence (measured in frame pairs) is cut into consecutive clips of T_C pairs; a trailing
partial clip is kept only if it holds at least one sub-clip. Each clip is tiled by consecutive sub-clips of T_s pairs
(the remainder is dropped). Temporal memory resets at clip boundaries and persists across the sub-clips of a clip.
"""

from dataclasses import dataclass
from typing import List, Mapping, Tuple

import torch

from training.losses import ScheduleError


@dataclass(frozen=True)
class SubClip:
    sequence_id: str
    start: int                                              # index of the first frame pair
    length: int                                             # T_s pairs => frames [start, start + length]


@dataclass(frozen=True)
class Clip:
    sequence_id: str
    start: int
    length: int
    sub_clips: Tuple[SubClip, ...]


@dataclass(frozen=True)
class ClipSchedule:
    t_c: int
    t_s: int
    clips: Tuple[Clip, ...]

    @property
    def sub_clips(self) -> List[Tuple[str, int]]:
        return [(sub.sequence_id, sub.start) for clip in self.clips for sub in clip.sub_clips]

    def __len__(self) -> int:
        return sum(len(clip.sub_clips) for clip in self.clips)

    def epoch_order(self, seed: int, epoch: int, shuffle: bool = True) -> List[Clip]:
        """Clip visiting order for one epoch; sub-clips always stay in temporal order within a clip."""
        if not shuffle:
            return list(self.clips)
        generator = torch.Generator().manual_seed(seed + epoch)
        return [self.clips[idx] for idx in torch.randperm(len(self.clips), generator=generator).tolist()]


def make_clips(lengths: Mapping[str, int], t_c: int, t_s: int) -> ClipSchedule:
    """:param lengths: frame pairs per sequence id (iteration order is preserved)"""
    if t_s < 1 or t_c < 1:
        raise ScheduleError(f"Clip lengths must be positive, got T_C = {t_c}, T_s = {t_s}")
    if t_s > t_c:
        raise ScheduleError(f"Sub-clip length T_s = {t_s} exceeds clip length T_C = {t_c}")

    clips = []
    for sequence_id, total in lengths.items():
        for clip_start in range(0, total, t_c):
            clip_length = min(t_c, total - clip_start)
            if clip_length < t_s:
                continue
            sub_clips = tuple(
                SubClip(sequence_id, clip_start + offset, t_s) for offset in range(0, clip_length - t_s + 1, t_s)
            )
            clips.append(Clip(sequence_id, clip_start, clip_length, sub_clips))
    return ClipSchedule(t_c=t_c, t_s=t_s, clips=tuple(clips))


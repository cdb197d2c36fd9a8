"""Segment-level array operations: stitching, root alignment, assembly.

Segment stacks have shape (K, S, C): K segments of S frames with C channels.
Consecutive segments overlap by S/2 frames in the assembled timeline.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidConfigError


def _check_stack(segments: np.ndarray):
    if segments.ndim != 3:
        raise ValueError(f"expected (K, S, C) stack, got shape {segments.shape}")
    if segments.shape[1] % 2 != 0:
        raise InvalidConfigError("segment length S must be even")


def hard_stitch_project(segments: np.ndarray) -> np.ndarray:
    """Copy each segment's second half into the next segment's first half.

    Exact projection onto the continuity constraint; idempotent.
    """
    _check_stack(segments)
    out = segments.copy()
    half = segments.shape[1] // 2
    for k in range(len(out) - 1):
        out[k + 1, :half] = out[k, half:]
    return out


def align_root(segments: np.ndarray, root_channel: int = 0) -> np.ndarray:
    """Shift each segment's root channel to continue from its predecessor.

    For k ascending, a constant offset (last root value of segment k minus
    first root value of segment k+1) is added to every frame of segment k+1's
    root channel; other channels are untouched.
    """
    if segments.ndim != 3:
        raise ValueError(f"expected (K, S, C) stack, got shape {segments.shape}")
    if not 0 <= root_channel < segments.shape[2]:
        raise InvalidConfigError(f"root channel {root_channel} out of range")
    out = segments.copy()
    for k in range(len(out) - 1):
        offset = out[k, -1, root_channel] - out[k + 1, 0, root_channel]
        out[k + 1, :, root_channel] += offset
    return out


def assemble_crossfade(segments: np.ndarray) -> np.ndarray:
    """Assemble segments with 50% overlap using linear cross-fade blending.

    Output length is S + (K-1) * S/2.  On each overlap the incoming segment
    gets weight j / (S/2) and the outgoing one the complement; if the overlaps
    already agree the blend is an exact copy.
    """
    _check_stack(segments)
    K, S, C = segments.shape
    half = S // 2
    ramp = (np.arange(half, dtype=np.float64) / half)[:, None]
    out = np.zeros((S + (K - 1) * half, C))
    out[:S] = segments[0]
    for k in range(1, K):
        start = k * half
        out[start:start + half] = ((1.0 - ramp) * out[start:start + half]
                                   + ramp * segments[k, :half])
        out[start + half:start + S] = segments[k, half:]
    return out


def slice_windows(sequence: np.ndarray, S: int, stride: int) -> list[np.ndarray]:
    """Fixed-length windows at offsets 0, stride, 2*stride, ...; tail dropped."""
    if S < 1 or stride < 1:
        raise InvalidConfigError("S and stride must be positive")
    if len(sequence) < S:
        return []
    return [sequence[o:o + S].copy()
            for o in range(0, len(sequence) - S + 1, stride)]

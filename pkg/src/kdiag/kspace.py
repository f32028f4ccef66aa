"""Complex k-space matrices, Cartesian column masks, and zero-filled reconstruction.

Conventions: k-space is a 2D complex128 array with the DC coefficient at index
(0, 0); transforms are orthonormally scaled so round-trips are exact to float
precision and energy is preserved. A "line" is a full k-space column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_complex_matrix(data) -> np.ndarray:
    """Coerce to a non-empty, finite 2D complex128 array."""
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2D matrix, got shape {arr.shape}")
    if not np.isfinite(arr.real).all() or not np.isfinite(arr.imag).all():
        raise ValueError("matrix contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class CartesianMask:
    """Binary selector over k-space columns; a set bit means the column is acquired."""

    cols: int
    selected: np.ndarray

    def __post_init__(self):
        if self.cols <= 0:
            raise ValueError("cols must be positive")
        sel = np.asarray(self.selected)
        if sel.shape != (self.cols,):
            raise ValueError(f"selected must have shape ({self.cols},), got {sel.shape}")
        if not np.isin(sel, (0, 1)).all():
            raise ValueError("selected must contain only 0/1")
        object.__setattr__(self, "selected", sel.astype(np.uint8))

    @classmethod
    def empty(cls, cols: int) -> "CartesianMask":
        return cls(cols, np.zeros(cols, dtype=np.uint8))

    @classmethod
    def full(cls, cols: int) -> "CartesianMask":
        return cls(cols, np.ones(cols, dtype=np.uint8))

    @classmethod
    def from_indices(cls, cols: int, indices) -> "CartesianMask":
        sel = np.zeros(cols, dtype=np.uint8)
        sel[np.asarray(indices, dtype=int)] = 1
        return cls(cols, sel)

    @property
    def line_count(self) -> int:
        return int(self.selected.sum())

    def is_selected(self, index: int) -> bool:
        return bool(self.selected[index])

    def sampled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)

    def unsampled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected == 0)


@dataclass(frozen=True, eq=False)
class UndersampledKSpace:
    """K-space with unacquired columns zeroed out, paired with its mask."""

    kspace: np.ndarray
    mask: CartesianMask

    def __post_init__(self):
        arr = as_complex_matrix(self.kspace)
        if arr.shape[1] != self.mask.cols:
            raise ValueError(
                f"kspace has {arr.shape[1]} columns but mask covers {self.mask.cols}"
            )
        unselected = self.mask.selected == 0
        if np.any(arr[:, unselected] != 0):
            raise ValueError("unselected columns must be exactly zero")
        object.__setattr__(self, "kspace", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.kspace.shape


def dft2(image) -> np.ndarray:
    """Orthonormal 2D DFT; DC lands at index (0, 0)."""
    return np.fft.fft2(as_complex_matrix(image), norm="ortho")


def idft2(kspace) -> np.ndarray:
    """Orthonormal 2D inverse DFT; exact inverse of :func:`dft2`."""
    return np.fft.ifft2(as_complex_matrix(kspace), norm="ortho")


def apply_mask(kspace, mask: CartesianMask) -> UndersampledKSpace:
    """Keep the selected columns verbatim and zero the rest."""
    arr = as_complex_matrix(kspace)
    if arr.shape[1] != mask.cols:
        raise ValueError(f"kspace has {arr.shape[1]} columns but mask covers {mask.cols}")
    out = arr * mask.selected[np.newaxis, :]
    return UndersampledKSpace(out, mask)


def add_line(state: UndersampledKSpace, full_kspace, index: int) -> UndersampledKSpace:
    """Acquire one more column from the fully sampled k-space.

    Re-acquiring an already sampled column is a hard error: it signals a
    masking bug upstream and must never pass silently.
    """
    full = as_complex_matrix(full_kspace)
    if full.shape != state.kspace.shape:
        raise ValueError("full k-space shape does not match the state")
    if not 0 <= index < state.mask.cols:
        raise ValueError(f"line index {index} out of range [0, {state.mask.cols})")
    if state.mask.is_selected(index):
        raise ValueError(f"line {index} is already sampled")
    sel = state.mask.selected.copy()
    sel[index] = 1
    ks = state.kspace.copy()
    ks[:, index] = full[:, index]
    return UndersampledKSpace(ks, CartesianMask(state.mask.cols, sel))


def zero_fill_magnitude(state: UndersampledKSpace) -> np.ndarray:
    """Magnitude of the zero-filled reconstruction, |idft2(x_s)|."""
    return np.abs(idft2(state.kspace))


def init_random_mask(cols: int, n_random: int, center_fraction: float, seed) -> CartesianMask:
    """Contiguous block around column cols//2 plus uniformly drawn extra columns.

    The block holds floor(center_fraction * cols) columns; an even block
    extends one extra column toward lower indices. `seed` may be an int or a
    numpy Generator; identical seeds yield identical masks.
    """
    if cols <= 0:
        raise ValueError("cols must be positive")
    if n_random < 0:
        raise ValueError("n_random must be non-negative")
    if not 0.0 <= center_fraction <= 1.0:
        raise ValueError("center_fraction must lie in [0, 1]")
    n_center = int(center_fraction * cols)
    if n_random + n_center > cols:
        raise ValueError(
            f"infeasible mask: {n_random} random + {n_center} center lines > {cols} columns"
        )
    sel = np.zeros(cols, dtype=np.uint8)
    start = cols // 2 - n_center // 2
    sel[start : start + n_center] = 1
    if n_random:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        remainder = np.flatnonzero(sel == 0)
        chosen = rng.choice(remainder, size=n_random, replace=False)
        sel[chosen] = 1
    return CartesianMask(cols, sel)

"""Voxel surface embedding, exact 3D Euclidean distance transform, dilation volumes.

A grayscale image is mapped to a single voxel per pixel column at height
f = intensity + 1, inside a padded volume whose z-extent is fixed at
256 + 2*pad so descriptors stay comparable across images. Dilating the
surface by a ball of radius r and counting voxels is done indirectly: one
exact distance transform gives every voxel's squared distance to the
surface, and the dilation volume V(r) is the count of voxels with squared
distance <= r^2. Because voxel coordinates are integers, every attainable
squared distance is a sum of three integer squares, which fixes the
discrete set of radii at which V can grow.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .imageio import GrayImage

MAX_GRAY = 255


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SurfaceVolume:
    """Padded voxel volume with one surface voxel per pixel column.

    `heights` holds the surface height f per column, indexed (x, y); the
    surface voxel for column (i, j) sits at (i + pad, j + pad, f + pad).
    """

    dims: tuple[int, int, int]
    pad: int
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "heights", _readonly(np.asarray(self.heights, dtype=np.int32).copy()))

    @property
    def n_surface(self) -> int:
        return self.heights.size

    def surface_coords(self) -> np.ndarray:
        """(n, 3) integer coordinates of all surface voxels."""
        w, h = self.heights.shape
        xs, ys = np.meshgrid(np.arange(w), np.arange(h), indexing="ij")
        out = np.stack([xs.ravel() + self.pad,
                        ys.ravel() + self.pad,
                        self.heights.ravel() + self.pad], axis=1)
        return out

    def surface_mask(self) -> np.ndarray:
        """Boolean volume, True exactly on surface voxels."""
        mask = np.zeros(self.dims, dtype=bool)
        w, h = self.heights.shape
        mask[np.arange(w)[:, None] + self.pad,
             np.arange(h)[None, :] + self.pad,
             self.heights + self.pad] = True
        return mask


@dataclass(frozen=True)
class DistanceField:
    """Exact squared Euclidean distance to the nearest surface voxel, per voxel."""

    dims: tuple[int, int, int]
    pad: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.asarray(self.values)))


@dataclass(frozen=True)
class RadiusSet:
    """All radii realizable on the integer grid up to r_max.

    `squared` lists the sums of three integer squares <= r_max^2, ascending,
    starting at 0; `radii` are their square roots.
    """

    r_max: float
    squared: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "squared", _readonly(np.asarray(self.squared, dtype=np.int64)))
        object.__setattr__(self, "radii", _readonly(np.asarray(self.radii, dtype=np.float64)))


@dataclass(frozen=True)
class VolumeCurve:
    """Cumulative dilation volumes V(r) over the discrete radius set."""

    radii: np.ndarray
    squared: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "radii", _readonly(np.asarray(self.radii, dtype=np.float64)))
        object.__setattr__(self, "squared", _readonly(np.asarray(self.squared, dtype=np.int64)))
        object.__setattr__(self, "volumes", _readonly(np.asarray(self.volumes, dtype=np.int64)))
        if np.any(np.diff(self.volumes) < 0):
            raise ValueError("dilation volumes must be nondecreasing")


def embed_surface(img: GrayImage, r_max: float, shift: bool = True) -> SurfaceVolume:
    """Map an image onto a 3D voxel surface inside a padded volume.

    Heights use f = intensity + 1 so f lies in {1, ..., 256}; pass
    shift=False to keep raw intensities. Padding is ceil(r_max) on every
    face; dims = (width + 2 pad, height + 2 pad, 256 + 2 pad).
    """
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    pad = int(math.ceil(r_max))
    heights = img.pixels.T.astype(np.int32) + (1 if shift else 0)
    dims = (img.width + 2 * pad, img.height + 2 * pad, MAX_GRAY + 1 + 2 * pad)
    return SurfaceVolume(dims=dims, pad=pad, heights=heights)


def exact_edt(vol: SurfaceVolume) -> DistanceField:
    """Exact squared Euclidean distance transform of the surface.

    Uses the separable exact feature transform (nearest surface voxel per
    voxel, linear in the voxel count per axis) and derives squared
    distances from the integer feature coordinates, so every value is an
    exact sum of three squares.
    """
    if vol.n_surface < 1:
        raise ValueError("volume has no surface voxels")
    mask = vol.surface_mask()
    nearest = distance_transform_edt(~mask, return_distances=False, return_indices=True)
    d2 = np.zeros(vol.dims, dtype=np.int32)
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = vol.dims[ax]
        diff = nearest[ax] - np.arange(vol.dims[ax], dtype=np.int32).reshape(shape)
        np.multiply(diff, diff, out=diff)
        d2 += diff
    return DistanceField(dims=vol.dims, pad=vol.pad, values=d2)


def radius_set(r_max: float) -> RadiusSet:
    """Enumerate all distinct sqrt(i^2 + j^2 + k^2) <= r_max, ascending, with 0."""
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    smax = int(math.floor(r_max * r_max + 1e-9))
    n = int(math.floor(r_max + 1e-9))
    ax = np.arange(n + 1, dtype=np.int64)
    sums = ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2
    squared = np.unique(sums)
    squared = squared[squared <= smax]
    return RadiusSet(r_max=float(r_max), squared=squared,
                     radii=np.sqrt(squared.astype(np.float64)))


def dilation_volumes(field: DistanceField, rs: RadiusSet) -> VolumeCurve:
    """Cumulative voxel counts V(r_k) = #{voxels : d^2 <= r_k^2}.

    Implemented as a histogram of squared distances followed by prefix
    sums; the histogram bins are the dilation shells.
    """
    if field.pad < math.ceil(rs.r_max):
        raise ValueError(f"radius set r_max {rs.r_max} exceeds field padding {field.pad}; "
                         "volumes would be clipped")
    smax = int(rs.squared[-1])
    flat = field.values.ravel()
    hist = np.bincount(flat[flat <= smax], minlength=smax + 1)
    cum = np.cumsum(hist)
    return VolumeCurve(radii=rs.radii, squared=rs.squared, volumes=cum[rs.squared])


def write_volume_curve_csv(curve: VolumeCurve, path) -> None:
    """Debug dump `r,log_r,V,log_V`; the log_r cell is empty for r = 0."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "log_r", "V", "log_V"])
        for r, v in zip(curve.radii, curve.volumes):
            log_r = "" if r == 0 else repr(float(np.log(r)))
            writer.writerow([repr(float(r)), log_r, int(v), repr(float(np.log(v)))])

"""Reproducible sampling of group points.

Points are built as ``b * exp(x0 B0) * ... * exp(x7 B7)`` with coordinates
drawn uniformly from a box around 0, optionally pushed by a set of base
points.  Every factor has an exact exponential, so sampled points carry no
determinant drift.
"""

from __future__ import annotations

import numpy as np

from .lie_core import DIM, GroupElement, exp_map, frame_element

DEFAULT_SEED = 1789
DEFAULT_BOX = 0.4
DEFAULT_COUNT = 200


def point_from_exp_coords(x) -> GroupElement:
    """The product exp(x0 B0) ... exp(x7 B7)."""
    g = np.eye(3)
    for i in range(DIM):
        g = g @ exp_map(frame_element(i), float(x[i])).matrix
    return GroupElement(g)


def sample_points(
    count: int,
    *,
    box: float = DEFAULT_BOX,
    seed: int = DEFAULT_SEED,
    base_points: tuple[GroupElement, ...] = (),
) -> list[GroupElement]:
    """`count` seeded random points with exp-coordinates uniform in [-box, box]^8."""
    rng = np.random.default_rng(seed)
    bases = base_points or (GroupElement.identity(),)
    points = []
    for k in range(count):
        x = rng.uniform(-box, box, size=DIM)
        b = bases[k % len(bases)]
        points.append(GroupElement(b.matrix @ point_from_exp_coords(x).matrix))
    return points


def default_samples(count: int = DEFAULT_COUNT) -> list[GroupElement]:
    """The standard sample set used for sup-norm style checks."""
    return sample_points(count, box=DEFAULT_BOX, seed=DEFAULT_SEED)

"""Shared fixtures: the worked 7-node example complex and random generators."""

import numpy as np
import pytest

from sccnn import complexes

# Worked example used throughout: three filled triangles {1,2,3}, {2,3,5},
# {3,5,6} plus bare edges [1,4], [3,4], [5,7].  Edges sort lexicographically
# as [1,2],[1,3],[1,4],[2,3],[2,5],[3,4],[3,5],[3,6],[5,6],[5,7].
EXAMPLE_MAXIMAL = [[1, 2, 3], [2, 3, 5], [3, 5, 6], [1, 4], [3, 4], [5, 7]]


@pytest.fixture(scope="session")
def example_sc():
    return complexes.build_complex(EXAMPLE_MAXIMAL)


def random_complex(rng, n_max=12, k_max=3):
    """A small random complex: random maximal simplices, closed downward."""
    n = int(rng.integers(4, n_max + 1))
    vertices = np.arange(n)
    maximal = [[int(v)] for v in vertices]  # keep every vertex present
    n_seeds = int(rng.integers(2, 8))
    for _ in range(n_seeds):
        size = int(rng.integers(2, min(k_max + 1, n) + 1))
        maximal.append(sorted(int(v) for v in rng.choice(vertices, size, replace=False)))
    return complexes.build_complex(maximal)


def random_complex_with_triangles(rng, n_max=12):
    """Random complex guaranteed to have at least one 2-simplex."""
    while True:
        sc = random_complex(rng, n_max=n_max, k_max=3)
        if sc.dim >= 2:
            return sc

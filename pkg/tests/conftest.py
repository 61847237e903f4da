import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def make_rng(seed: int = 20260809) -> np.random.Generator:
    return np.random.default_rng(seed)


def exact_smass_means_theta2(n: int, s_values: tuple[int, ...], levels: int):
    """Exact E[V_l^(s)] for theta = 2, by propagating expected mass counts.

    Uses E[C_j | split of mass k] = (2/j) (k-j)/k for j <= k-1, which makes
    each level an O(n) suffix-sum update.  Independent of the samplers; used
    as an oracle for their unbiasedness.
    """
    e = np.zeros(n + 1)
    e[n] = 1.0
    ks = np.arange(n + 1, dtype=float)
    out = {s: [] for s in s_values}
    for _ in range(levels + 1):
        for s in s_values:
            fall = np.ones(n + 1)
            for i in range(s):
                fall *= np.maximum(ks - 1 - i, 0.0)
            out[s].append(float(np.dot(fall, e)))
        suffix = np.concatenate((np.cumsum(e[::-1])[::-1], [0.0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            e_over_k = np.where(ks > 0, e / np.maximum(ks, 1.0), 0.0)
        suffix_over_k = np.concatenate((np.cumsum(e_over_k[::-1])[::-1], [0.0]))
        j = np.arange(1, n + 1, dtype=float)
        e_next = np.zeros(n + 1)
        e_next[1:] = (2.0 / j) * (suffix[2:] - j * suffix_over_k[2:])
        e = e_next
    return out

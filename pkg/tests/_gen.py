"""Random instance generators shared by the test modules."""

from smot.coupling import FiniteCoupling
from smot.measure import DiscreteMeasure


def random_measure(rng, n_max=6, lo=-5, hi=5, grid=0.5, mass=None):
    n = int(rng.integers(1, n_max + 1))
    atoms = rng.integers(int(lo / grid), int(hi / grid) + 1, n) * grid
    w = rng.random(n) + 0.05
    m = DiscreteMeasure(atoms, w)
    return m.scale_mass((1.0 if mass is None else mass) / m.mass)


def random_kernel(rng, x, kind, grid=0.5, spread=3):
    """Two- or three-point kernel at ``x``: martingale, strict supermartingale or stay."""
    if kind == "stay":
        return DiscreteMeasure.dirac(x)
    lo = x - grid * int(rng.integers(1, spread + 1))
    hi = x + grid * int(rng.integers(1, spread + 1))
    # martingale two-point kernel on {lo, hi}
    p = (hi - x) / (hi - lo)
    k = DiscreteMeasure([lo, hi], [p, 1 - p])
    if kind == "super":
        drop = grid * int(rng.integers(1, spread + 1))
        k = k.translate(-drop)
    return k


def random_super_coupling(rng, n_max=5, kinds=("stay", "mart", "super"), grid=0.5):
    mu = random_measure(rng, n_max, grid=grid)
    rows = []
    for x, w in zip(mu.atoms, mu.weights):
        kind = kinds[int(rng.integers(len(kinds)))]
        rows.append((x, w, random_kernel(rng, x, kind, grid)))
    return FiniteCoupling(rows)


def random_cd_pair(rng, n_max=5, kinds=("stay", "mart", "super"), grid=0.5):
    pi = random_super_coupling(rng, n_max, kinds, grid)
    return pi.first_marginal, pi.second_marginal, pi


def random_pair(rng, n_max=6, grid=0.5):
    """Equal-mass pair with no order imposed."""
    a = random_measure(rng, n_max, grid=grid)
    b = random_measure(rng, n_max, grid=grid, mass=a.mass)
    return a, b

"""Deterministic 64-bit seed derivation.

Every seeded component in the package (per-tree bootstrap, per-node feature
sampling, per-model seeds fanned out from the CLI master seed) derives its
seed through :func:`mix64` so that results are reproducible across platforms,
process counts and thread schedules.
"""

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(seed: int, stream: int) -> int:
    """Mix ``seed`` and ``stream`` into a 64-bit value (splitmix64 finalizer).

    Pure integer arithmetic mod 2**64; the same inputs give the same output
    on every platform.
    """
    x = (seed + _GOLDEN * (stream + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x

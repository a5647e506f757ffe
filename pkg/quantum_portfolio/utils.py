import contextlib
import os
import tempfile
from typing import Sequence, Union

import numpy as np

_SEED_MASK = (1 << 64) - 1


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """
    Creates an independent PCG64 random generator for the stream identified by `seed` and `keys`.

    PCG64 produces the same numbers on every platform, so everything derived from a seed is reproducible. Streams
    with different keys (e.g. trajectory or evaluation indices) are statistically independent.

    :param seed: The 64-bit base seed. Negative values are folded into the unsigned range.
    :param keys: Further non-negative integers that select a sub-stream.
    :return: A freshly seeded generator.
    """
    sequence = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def index_to_bits(index: int, n: int) -> np.ndarray:
    """Bit i of the result is bit i of `index` (qubit 0 is the least significant bit)."""
    return (int(index) >> np.arange(n)) & 1


def bits_to_index(bits: Sequence[int]) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


def all_bits(n: int) -> np.ndarray:
    """Returns a (2^n, n) array whose row k holds the bits of index k."""
    return (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1


def bits_to_string(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def string_to_bits(bitstring: str) -> np.ndarray:
    if any(c not in "01" for c in bitstring):
        raise ValueError("bitstring must only consist of '0' and '1'. Not '{}'".format(bitstring))
    return np.array([int(c) for c in bitstring], dtype=int)


def index_to_string(index: int, n: int) -> str:
    return bits_to_string(index_to_bits(index, n))


def string_to_index(bitstring: str) -> int:
    return bits_to_index(string_to_bits(bitstring))


def render_bitstring(bitstring: Union[str, Sequence[int]], bit_order: str = 'canonical') -> str:
    """
    Renders a bitstring for display.

    :param bitstring: Bits in canonical order (variable 0 first).
    :param bit_order: Either 'canonical' (variable 0 leftmost) or 'reversed' (variable 0 rightmost, the
    little-endian rendering used by most hardware toolkits).
    :return: The rendered string.
    """
    if not isinstance(bitstring, str):
        bitstring = bits_to_string(bitstring)
    if bit_order == 'canonical':
        return bitstring
    elif bit_order == 'reversed':
        return bitstring[::-1]
    raise ValueError("bit_order must be either 'canonical' or 'reversed'. Not '{}'".format(bit_order))


@contextlib.contextmanager
def atomic_writer(path: str, newline: Union[None, str] = None):
    """
    Opens a temporary file next to `path` for writing and moves it into place once the block finishes. If the block
    raises, `path` is left untouched and the temporary file is removed.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, temporary = tempfile.mkstemp(prefix='.' + os.path.basename(path) + '.', suffix='.tmp', dir=directory)
    try:
        with os.fdopen(fd, 'w', newline=newline) as fh:
            yield fh
        os.replace(temporary, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(temporary)
        raise

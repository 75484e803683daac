"""Counter-based randomness derivation for reproducible parallel Monte Carlo.

Every stochastic routine in the package draws from a Generator obtained via
:func:`derive_rng`.  Philox is counter based, so the tuple
``(master_seed, stream, index, ...)`` pins down an entire stream with no
shared mutable state; results are bit-identical for any number of worker
threads because work is split into fixed-size chunks that are reduced in
chunk order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Stream tags keep draws of unrelated stages decorrelated under one master seed.
STREAM_PATH = 1        # top-level path simulation
STREAM_INNER = 2       # nested per-probe estimates
STREAM_BOOTSTRAP = 3   # resampling diagnostics

# Paths per work unit.  Fixed (never derived from the thread count) so that
# the float accumulation order cannot depend on parallelism.
DEFAULT_CHUNK = 256


def derive_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for one logical stream of the experiment.

    The entropy tuple is fed to ``SeedSequence`` verbatim, so equal tuples give
    equal streams and distinct tuples give statistically independent ones.
    """
    ss = np.random.SeedSequence(entropy=(int(master_seed), *map(int, indices)))
    return np.random.Generator(np.random.Philox(ss))


def chunk_ranges(n: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, n)) for s in range(0, n, chunk)]


def map_chunks(n: int, worker, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> list:
    """Apply ``worker(start, stop)`` over index chunks, results in chunk order.

    Thread scheduling may finish chunks out of order; the returned list is
    always ordered by chunk index so downstream reductions are deterministic.
    """
    ranges = chunk_ranges(n, chunk)
    if threads <= 1:
        return [worker(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(worker, a, b) for a, b in ranges]
        return [fu.result() for fu in futures]

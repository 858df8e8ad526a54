import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "PINLAB_WORKERS"


def worker_count():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Ordered map, fanned out over processes when PINLAB_WORKERS > 1."""
    items = list(items)
    nw = worker_count()
    if nw == 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * nw))
    with ProcessPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(fn, items, chunksize=chunk))

"""Pure-Python kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends produce
bit-identical floats. Used when the compiled extension is unavailable.
"""
import heapq

import numpy as np

RESCALE_LIMIT = 1e150


def birth_death_weights(birth, mu):
    """Normalized product-form weights of a birth-death chain.

    ``birth[j]`` is the admitted arrival rate in state ``j`` (length C),
    departures in state ``i`` occur at ``i * mu``.
    """
    c = len(birth)
    w = [0.0] * (c + 1)
    w[0] = 1.0
    for i in range(1, c + 1):
        w[i] = w[i - 1] * birth[i - 1] / (i * mu)
        if w[i] > RESCALE_LIMIT:
            scale = w[i]
            for j in range(i + 1):
                w[j] = w[j] / scale
    total = 0.0
    for i in range(c + 1):
        total += w[i]
    return np.array([x / total for x in w], dtype=np.float64)


def run_loss_system(times, classes, uniforms, holding, accept, capacity,
                    first, batch_size, n_batches, record):
    """Event loop of a blocked-calls-cleared loss system.

    Arrivals ``first + b*batch_size ... first + (b+1)*batch_size - 1`` are
    tallied into batch ``b``; the occupancy integral of batch ``b`` covers
    ``[times[first + b*batch_size], times[first + (b+1)*batch_size])``.
    Returns ``(arrived, blocked, area, max_occupancy, trace)`` where trace is
    ``None`` unless ``record`` is set.
    """
    n = len(times)
    m = accept.shape[0]
    acc = accept.tolist()
    arrived = np.zeros((n_batches, m), dtype=np.int64)
    blocked = np.zeros((n_batches, m), dtype=np.int64)
    area = np.zeros(n_batches, dtype=np.float64)
    end = first + n_batches * batch_size
    heap = []
    occ = 0
    max_occ = 0
    t_last = times[0] if n else 0.0
    cur = -1
    tr_t, tr_k, tr_c, tr_o = [], [], [], []

    times_l = times.tolist()
    cls_l = classes.tolist()
    u_l = uniforms.tolist()
    h_l = holding.tolist()
    for j in range(n):
        t = times_l[j]
        while heap and heap[0][0] <= t:
            d, dk = heapq.heappop(heap)
            if cur >= 0:
                area[cur] += occ * (d - t_last)
            occ -= 1
            t_last = d
            if occ < 0:
                raise RuntimeError("negative occupancy")
            if record:
                tr_t.append(d)
                tr_k.append(2)
                tr_c.append(dk)
                tr_o.append(occ)
        if cur >= 0:
            area[cur] += occ * (t - t_last)
        t_last = t
        cur = (j - first) // batch_size if first <= j < end else -1

        k = cls_l[j]
        if occ < capacity and u_l[j] < acc[k][occ]:
            heapq.heappush(heap, (t + h_l[j], k))
            occ += 1
            if occ > max_occ:
                max_occ = occ
            kind = 0
        else:
            kind = 1
            if cur >= 0:
                blocked[cur, k] += 1
        if cur >= 0:
            arrived[cur, k] += 1
        if occ > capacity:
            raise RuntimeError("occupancy above capacity")
        if record:
            tr_t.append(t)
            tr_k.append(kind)
            tr_c.append(k)
            tr_o.append(occ)

    trace = None
    if record:
        trace = (
            np.array(tr_t, dtype=np.float64),
            np.array(tr_k, dtype=np.int8),
            np.array(tr_c, dtype=np.int32),
            np.array(tr_o, dtype=np.int32),
        )
    return arrived, blocked, area, max_occ, trace

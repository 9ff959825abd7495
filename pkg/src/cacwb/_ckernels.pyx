# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double RESCALE_LIMIT = 1e150


def birth_death_weights(birth, double mu):
    cdef const double[::1] b = np.ascontiguousarray(birth, dtype=np.float64)
    cdef Py_ssize_t c = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(c + 1, dtype=np.float64)
    cdef double[::1] w = out
    cdef Py_ssize_t i, j
    cdef double scale, total
    w[0] = 1.0
    for i in range(1, c + 1):
        w[i] = w[i - 1] * b[i - 1] / (i * mu)
        if w[i] > RESCALE_LIMIT:
            scale = w[i]
            for j in range(i + 1):
                w[j] = w[j] / scale
    total = 0.0
    for i in range(c + 1):
        total += w[i]
    for i in range(c + 1):
        w[i] = w[i] / total
    return out


cdef inline bint _less(double ta, int ka, double tb, int kb) nogil:
    return ta < tb or (ta == tb and ka < kb)


cdef void _push(double* ht, int* hk, Py_ssize_t* size, double t, int k) nogil:
    cdef Py_ssize_t pos = size[0]
    cdef Py_ssize_t parent
    size[0] += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(t, k, ht[parent], hk[parent]):
            ht[pos] = ht[parent]
            hk[pos] = hk[parent]
            pos = parent
        else:
            break
    ht[pos] = t
    hk[pos] = k


cdef void _pop(double* ht, int* hk, Py_ssize_t* size) nogil:
    cdef Py_ssize_t n = size[0] - 1
    cdef double t = ht[n]
    cdef int k = hk[n]
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t child
    size[0] = n
    if n == 0:
        return
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and _less(ht[child + 1], hk[child + 1], ht[child], hk[child]):
            child += 1
        if _less(ht[child], hk[child], t, k):
            ht[pos] = ht[child]
            hk[pos] = hk[child]
            pos = child
        else:
            break
    ht[pos] = t
    hk[pos] = k


def run_loss_system(times, classes, uniforms, holding, accept, int capacity,
                    Py_ssize_t first, Py_ssize_t batch_size, Py_ssize_t n_batches,
                    bint record):
    cdef const double[::1] t_arr = np.ascontiguousarray(times, dtype=np.float64)
    cdef const int[::1] k_arr = np.ascontiguousarray(classes, dtype=np.int32)
    cdef const double[::1] u_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] h_arr = np.ascontiguousarray(holding, dtype=np.float64)
    cdef const double[:, ::1] acc = np.ascontiguousarray(accept, dtype=np.float64)
    cdef Py_ssize_t n = t_arr.shape[0]
    cdef Py_ssize_t m = acc.shape[0]

    arrived_np = np.zeros((n_batches, m), dtype=np.int64)
    blocked_np = np.zeros((n_batches, m), dtype=np.int64)
    area_np = np.zeros(n_batches, dtype=np.float64)
    cdef long long[:, ::1] arrived = arrived_np
    cdef long long[:, ::1] blocked = blocked_np
    cdef double[::1] area = area_np

    heap_t_np = np.empty(capacity + 1, dtype=np.float64)
    heap_k_np = np.empty(capacity + 1, dtype=np.int32)
    cdef double[::1] heap_t = heap_t_np
    cdef int[::1] heap_k = heap_k_np
    cdef Py_ssize_t hsize = 0

    cdef Py_ssize_t n_rec = 2 * n if record else 1
    tr_t_np = np.empty(n_rec, dtype=np.float64)
    tr_k_np = np.empty(n_rec, dtype=np.int8)
    tr_c_np = np.empty(n_rec, dtype=np.int32)
    tr_o_np = np.empty(n_rec, dtype=np.int32)
    cdef double[::1] tr_t = tr_t_np
    cdef signed char[::1] tr_k = tr_k_np
    cdef int[::1] tr_c = tr_c_np
    cdef int[::1] tr_o = tr_o_np
    cdef Py_ssize_t rec = 0

    cdef Py_ssize_t end = first + n_batches * batch_size
    cdef Py_ssize_t j, cur = -1
    cdef int occ = 0, max_occ = 0, k, dk
    cdef double t, d
    cdef double t_last = t_arr[0] if n > 0 else 0.0
    cdef signed char kind

    for j in range(n):
        t = t_arr[j]
        while hsize > 0 and heap_t[0] <= t:
            d = heap_t[0]
            dk = heap_k[0]
            _pop(&heap_t[0], &heap_k[0], &hsize)
            if cur >= 0:
                area[cur] += occ * (d - t_last)
            occ -= 1
            t_last = d
            if occ < 0:
                raise RuntimeError("negative occupancy")
            if record:
                tr_t[rec] = d
                tr_k[rec] = 2
                tr_c[rec] = dk
                tr_o[rec] = occ
                rec += 1
        if cur >= 0:
            area[cur] += occ * (t - t_last)
        t_last = t
        if first <= j < end:
            cur = (j - first) // batch_size
        else:
            cur = -1

        k = k_arr[j]
        if occ < capacity and u_arr[j] < acc[k, occ]:
            _push(&heap_t[0], &heap_k[0], &hsize, t + h_arr[j], k)
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
            tr_t[rec] = t
            tr_k[rec] = kind
            tr_c[rec] = k
            tr_o[rec] = occ
            rec += 1

    trace = None
    if record:
        trace = (tr_t_np[:rec].copy(), tr_k_np[:rec].copy(),
                 tr_c_np[:rec].copy(), tr_o_np[:rec].copy())
    return arrived_np, blocked_np, area_np, max_occ, trace

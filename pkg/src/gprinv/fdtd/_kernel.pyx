# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled leapfrog kernel for the 1-D FDTD solver.

Mirrors _kernel_py.run_leapfrog operation-for-operation (and is compiled
with -ffp-contract=off) so the two backends produce bit-identical traces.
The time loop runs without the GIL, so concurrent simulations in threads
execute in parallel.
"""

from libc.math cimport isfinite


def run_leapfrog(
    double[::1] e,
    double[::1] h,
    double[::1] ca,
    double[::1] cb,
    double dh,
    double[::1] src,
    Py_ssize_t src_idx,
    Py_ssize_t rx_idx,
    double k_top,
    int bottom_is_mur,
    double k_bot,
    double[::1] out,
):
    """Advance the E/H leapfrog for len(out) steps, recording e[rx_idx].

    Returns -1 on success, or the step index at which a non-finite field
    was detected.
    """
    cdef Py_ssize_t n = e.shape[0]
    cdef Py_ssize_t n_steps = out.shape[0]
    cdef Py_ssize_t step, i
    cdef double e0_old, e1_old, em1_old, em2_old
    cdef bint bad = 0
    cdef Py_ssize_t bad_step = -1

    with nogil:
        for step in range(n_steps):
            for i in range(n - 1):
                h[i] = h[i] - dh * (e[i + 1] - e[i])
            e0_old = e[0]
            e1_old = e[1]
            em1_old = e[n - 1]
            em2_old = e[n - 2]
            for i in range(1, n - 1):
                e[i] = ca[i] * e[i] - cb[i] * (h[i] - h[i - 1])
            e[0] = e1_old + k_top * (e[1] - e0_old)
            if bottom_is_mur:
                e[n - 1] = em2_old + k_bot * (e[n - 2] - em1_old)
            e[src_idx] = e[src_idx] + src[step]
            out[step] = e[rx_idx]
            if (step & 255) == 255:
                for i in range(n):
                    if not isfinite(e[i]):
                        bad = 1
                        bad_step = step
                        break
                if bad:
                    break

    if bad:
        return bad_step
    for i in range(n):
        if not isfinite(e[i]):
            return n_steps - 1
    for step in range(n_steps):
        if not isfinite(out[step]):
            return n_steps - 1
    return -1

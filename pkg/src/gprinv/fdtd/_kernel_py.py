"""Pure-numpy leapfrog kernel: the import-time fallback for the compiled core.

Expression order matches the Cython kernel exactly so both backends produce
bit-identical traces.
"""

import numpy as np


def run_leapfrog(e, h, ca, cb, dh, src, src_idx, rx_idx, k_top, bottom_is_mur, k_bot, out):
    """Advance the 1-D E/H leapfrog for len(out) steps, recording e[rx_idx].

    Returns -1 on success, or the step index at which a non-finite field
    was detected.
    """
    n = e.shape[0]
    n_steps = out.shape[0]
    for step in range(n_steps):
        h -= dh * (e[1:] - e[:-1])
        e0_old = e[0]
        e1_old = e[1]
        em1_old = e[n - 1]
        em2_old = e[n - 2]
        e[1:-1] = ca[1:-1] * e[1:-1] - cb[1:-1] * (h[1:] - h[:-1])
        e[0] = e1_old + k_top * (e[1] - e0_old)
        if bottom_is_mur:
            e[n - 1] = em2_old + k_bot * (e[n - 2] - em1_old)
        e[src_idx] += src[step]
        out[step] = e[rx_idx]
        if (step & 255) == 255 and not np.all(np.isfinite(e)):
            return step
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(out))):
        return n_steps - 1
    return -1

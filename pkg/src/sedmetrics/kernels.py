"""Numeric hot-loop kernels, each with a numba and a pure-numpy backend.

Three kernels carry essentially all of the toolkit's inner-loop cost:

* :func:`interval_means`: duration-weighted means of a piecewise-constant
  score function over arbitrary target intervals (frame resampling, segment
  reconstruction),
* :func:`moving_median`: per-column moving median with replicate padding
  (multi-class median filtering),
* :func:`sweep_clip_counts`: per-threshold DTC/GTC true/false-positive
  counts for one clip and one class (PSD-ROC construction).

Backends are numerically interchangeable: both run the same operations in
the same order, so results agree bit-for-bit on exactly representable
inputs and to ~1 ulp otherwise.
"""

import numpy as np

from .backend import resolve_backend

_numba_impls: dict | None = None


def _build_numba_impls() -> dict:
    from numba import njit

    jit = njit(cache=True, nogil=True)
    return {
        "interval_means": jit(_interval_means_loop),
        "moving_median": jit(_moving_median_loop),
        "sweep_clip_counts": jit(_sweep_counts_loop),
    }


def _get_numba(name: str):
    global _numba_impls
    if _numba_impls is None:
        _numba_impls = _build_numba_impls()
    return _numba_impls[name]


def _as_f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------------------
# interval_means


def _interval_means_loop(breakpoints, values, edges):  # pragma: no cover - jitted
    n, n_classes = values.shape
    m = edges.shape[0] - 1
    cum = np.empty((n + 1, n_classes))
    for c in range(n_classes):
        cum[0, c] = 0.0
    for i in range(n):
        w = breakpoints[i + 1] - breakpoints[i]
        for c in range(n_classes):
            cum[i + 1, c] = cum[i, c] + values[i, c] * w
    out = np.empty((m, n_classes))
    integ = np.empty((m + 1, n_classes))
    for j in range(m + 1):
        t = edges[j]
        i = np.searchsorted(breakpoints, t, side="right") - 1
        if i < 0:
            i = 0
        elif i > n - 1:
            i = n - 1
        for c in range(n_classes):
            integ[j, c] = cum[i, c] + (t - breakpoints[i]) * values[i, c]
    for j in range(m):
        width = edges[j + 1] - edges[j]
        for c in range(n_classes):
            out[j, c] = (integ[j + 1, c] - integ[j, c]) / width
    return out


def _interval_means_numpy(breakpoints, values, edges):
    n = values.shape[0]
    widths = (breakpoints[1:] - breakpoints[:-1])[:, None]
    cum = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(values * widths, axis=0)])
    idx = np.clip(np.searchsorted(breakpoints, edges, side="right") - 1, 0, n - 1)
    integ = cum[idx] + (edges - breakpoints[idx])[:, None] * values[idx]
    return np.diff(integ, axis=0) / np.diff(edges)[:, None]


def interval_means(breakpoints, values, edges, backend: str | None = None) -> np.ndarray:
    """Mean of a piecewise-constant function over each ``[edges[j], edges[j+1])``.

    ``breakpoints`` (length n+1, ascending) and ``values`` (n x C) define the
    function; ``edges`` (length m+1, ascending, within the breakpoint span up
    to float fuzz) define the target intervals. Returns an (m x C) array.
    """
    breakpoints = _as_f64(breakpoints)
    values = _as_f64(np.atleast_2d(values))
    edges = _as_f64(edges)
    if resolve_backend(backend) == "numba":
        return _get_numba("interval_means")(breakpoints, values, edges)
    return _interval_means_numpy(breakpoints, values, edges)


# ---------------------------------------------------------------------------
# moving_median


def _moving_median_loop(frames, lengths):  # pragma: no cover - jitted
    n, n_classes = frames.shape
    out = np.empty_like(frames)
    for c in range(n_classes):
        w = lengths[c]
        if w == 1 or n == 0:
            for i in range(n):
                out[i, c] = frames[i, c]
            continue
        h = w // 2
        buf = np.empty(w)
        for i in range(n):
            for k in range(w):
                idx = i - h + k
                if idx < 0:
                    idx = 0
                elif idx > n - 1:
                    idx = n - 1
                buf[k] = frames[idx, c]
            out[i, c] = np.median(buf)
    return out


def _moving_median_numpy(frames, lengths):
    n = frames.shape[0]
    out = np.empty_like(frames)
    for c, w in enumerate(lengths):
        if w == 1 or n == 0:
            out[:, c] = frames[:, c]
            continue
        h = int(w) // 2
        padded = np.pad(frames[:, c], (h, h), mode="edge")
        windows = np.lib.stride_tricks.sliding_window_view(padded, int(w))
        out[:, c] = np.median(windows, axis=1)
    return out


def moving_median(frames, lengths, backend: str | None = None) -> np.ndarray:
    """Per-column moving median with odd window lengths and replicate padding."""
    frames = _as_f64(np.atleast_2d(frames))
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    if lengths.shape[0] != frames.shape[1]:
        raise ValueError("one window length per column required")
    if np.any(lengths < 1) or np.any(lengths % 2 == 0):
        raise ValueError("window lengths must be odd and >= 1")
    if resolve_backend(backend) == "numba":
        return _get_numba("moving_median")(frames, lengths)
    return _moving_median_numpy(frames, lengths)


# ---------------------------------------------------------------------------
# sweep_clip_counts


def _sweep_counts_loop(breakpoints, values, ref_on, ref_off, thresholds, rho_dtc, rho_gtc):  # pragma: no cover - jitted
    n = values.shape[0]
    n_refs = ref_on.shape[0]
    n_t = thresholds.shape[0]
    tp = np.zeros(n_t, np.int64)
    fp = np.zeros(n_t, np.int64)
    covered = np.empty(n_refs)
    for t in range(n_t):
        thr = thresholds[t]
        for r in range(n_refs):
            covered[r] = 0.0
        i = 0
        while i < n:
            if values[i] >= thr:
                j = i
                while j + 1 < n and values[j + 1] >= thr:
                    j += 1
                on = breakpoints[i]
                off = breakpoints[j + 1]
                inter = 0.0
                for r in range(n_refs):
                    lo = max(on, ref_on[r])
                    hi = min(off, ref_off[r])
                    if hi > lo:
                        inter += hi - lo
                if inter / (off - on) >= rho_dtc:
                    for r in range(n_refs):
                        lo = max(on, ref_on[r])
                        hi = min(off, ref_off[r])
                        if hi > lo:
                            covered[r] += hi - lo
                else:
                    fp[t] += 1
                i = j + 1
            else:
                i += 1
        cnt = 0
        for r in range(n_refs):
            if covered[r] / (ref_off[r] - ref_on[r]) >= rho_gtc:
                cnt += 1
        tp[t] = cnt
    return tp, fp


def _sweep_counts_numpy(breakpoints, values, ref_on, ref_off, thresholds, rho_dtc, rho_gtc):
    n_t = thresholds.shape[0]
    tp = np.zeros(n_t, np.int64)
    fp = np.zeros(n_t, np.int64)
    ref_dur = ref_off - ref_on
    active = np.empty(values.shape[0] + 2, dtype=bool)
    active[0] = active[-1] = False
    for t in range(n_t):
        active[1:-1] = values >= thresholds[t]
        flips = np.diff(active.astype(np.int8))
        starts = np.flatnonzero(flips == 1)
        stops = np.flatnonzero(flips == -1)
        if starts.size == 0:
            continue
        run_on = breakpoints[starts]
        run_off = breakpoints[stops]
        inter = np.minimum(run_off[:, None], ref_off[None, :]) - np.maximum(
            run_on[:, None], ref_on[None, :]
        )
        np.maximum(inter, 0.0, out=inter)
        dtc = inter.sum(axis=1) / (run_off - run_on) >= rho_dtc
        fp[t] = np.count_nonzero(~dtc)
        if ref_dur.size:
            covered = inter[dtc].sum(axis=0)
            tp[t] = np.count_nonzero(covered / ref_dur >= rho_gtc)
    return tp, fp


def sweep_clip_counts(
    breakpoints,
    values,
    ref_on,
    ref_off,
    thresholds,
    rho_dtc: float,
    rho_gtc: float,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """TP/FP detection counts at every threshold for one clip and one class.

    ``values`` holds one score per interval of the piecewise-constant
    timeline (``breakpoints`` has one more entry). At each threshold, maximal
    runs of intervals with score >= threshold form the detected events; a
    detection whose summed intersection with the references, relative to its
    own duration, falls below ``rho_dtc`` counts as a false positive, and a
    reference covered by the remaining detections for at least ``rho_gtc`` of
    its duration counts as a true positive.

    Returns ``(tp, fp)`` int64 arrays aligned with ``thresholds``.
    """
    breakpoints = _as_f64(breakpoints)
    values = _as_f64(values)
    ref_on = _as_f64(ref_on)
    ref_off = _as_f64(ref_off)
    thresholds = _as_f64(thresholds)
    if resolve_backend(backend) == "numba":
        return _get_numba("sweep_clip_counts")(
            breakpoints, values, ref_on, ref_off, thresholds, rho_dtc, rho_gtc
        )
    return _sweep_counts_numpy(
        breakpoints, values, ref_on, ref_off, thresholds, rho_dtc, rho_gtc
    )

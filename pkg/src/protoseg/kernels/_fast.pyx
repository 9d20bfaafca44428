# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-pixel kernels. Mirrors numpy_impl semantics exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

name = "compiled"


def intersection_count(cnp.uint8_t[:, ::1] a, cnp.uint8_t[:, ::1] b):
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t i, j
    cdef long count = 0
    for i in range(h):
        for j in range(w):
            if a[i, j] and b[i, j]:
                count += 1
    return count


def boundary(cnp.uint8_t[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            if (i == 0 or j == 0 or i == h - 1 or j == w - 1
                    or not mask[i - 1, j] or not mask[i + 1, j]
                    or not mask[i, j - 1] or not mask[i, j + 1]):
                out[i, j] = 1
    return out_arr


cdef long _near_count(cnp.uint8_t[:, ::1] src, cnp.uint8_t[:, ::1] ref,
                      Py_ssize_t reach, double limit):
    """Pixels of src with a ref pixel within sqrt(limit) (squared distances)."""
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t i, j, di, dj, lo_i, hi_i, lo_j, hi_j
    cdef long count = 0
    cdef bint hit
    for i in range(h):
        for j in range(w):
            if not src[i, j]:
                continue
            hit = False
            lo_i = i - reach if i >= reach else 0
            hi_i = i + reach if i + reach < h else h - 1
            lo_j = j - reach if j >= reach else 0
            hi_j = j + reach if j + reach < w else w - 1
            for di in range(lo_i, hi_i + 1):
                for dj in range(lo_j, hi_j + 1):
                    if ref[di, dj] and (di - i) * (di - i) + (dj - j) * (dj - j) <= limit:
                        hit = True
                        break
                if hit:
                    break
            if hit:
                count += 1
    return count


def tolerance_match_counts(cnp.uint8_t[:, ::1] boundary_a,
                           cnp.uint8_t[:, ::1] boundary_b, double tau):
    cdef double limit = tau * tau + 1e-6
    cdef Py_ssize_t reach = <Py_ssize_t> (tau + 1.0)
    cdef long a_near_b = _near_count(boundary_a, boundary_b, reach, limit)
    cdef long b_near_a = _near_count(boundary_b, boundary_a, reach, limit)
    return a_near_b, b_near_a


def box_iou_matrix(cnp.float64_t[:, ::1] boxes_a, cnp.float64_t[:, ::1] boxes_b):
    cdef Py_ssize_t n = boxes_a.shape[0], m = boxes_b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter, area_a, area_b, union
    for i in range(n):
        area_a = (boxes_a[i, 2] - boxes_a[i, 0]) * (boxes_a[i, 3] - boxes_a[i, 1])
        for j in range(m):
            iw = min(boxes_a[i, 2], boxes_b[j, 2]) - max(boxes_a[i, 0], boxes_b[j, 0])
            if iw <= 0:
                continue
            ih = min(boxes_a[i, 3], boxes_b[j, 3]) - max(boxes_a[i, 1], boxes_b[j, 1])
            if ih <= 0:
                continue
            inter = iw * ih
            area_b = (boxes_b[j, 2] - boxes_b[j, 0]) * (boxes_b[j, 3] - boxes_b[j, 1])
            union = area_a + area_b - inter
            if union > 0:
                out[i, j] = inter / union
    return out_arr


def greedy_nms(cnp.float64_t[:, ::1] boxes, cnp.float64_t[::1] scores,
               double iou_threshold):
    cdef Py_ssize_t n = boxes.shape[0]
    order_arr = np.lexsort((np.arange(n), -np.asarray(scores)))
    cdef cnp.int64_t[::1] order = order_arr.astype(np.int64)
    suppressed_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] suppressed = suppressed_arr
    keep = []
    cdef Py_ssize_t a, b, i, j
    cdef double iw, ih, inter, union, iou
    for a in range(n):
        i = order[a]
        if suppressed[i]:
            continue
        keep.append(i)
        for b in range(a + 1, n):
            j = order[b]
            if suppressed[j]:
                continue
            iw = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
            if iw <= 0:
                continue
            ih = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
            if ih <= 0:
                continue
            inter = iw * ih
            union = ((boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
                     + (boxes[j, 2] - boxes[j, 0]) * (boxes[j, 3] - boxes[j, 1]) - inter)
            iou = inter / union if union > 0 else 0.0
            if iou > iou_threshold:
                suppressed[j] = 1
    return np.asarray(keep, dtype=np.int64)


def pair_intersection_counts(cnp.int64_t[:, ::1] a_ids, cnp.int64_t[:, ::1] b_ids,
                             long num_a, long num_b):
    cdef Py_ssize_t h = a_ids.shape[0], w = a_ids.shape[1]
    out_arr = np.zeros((num_a + 1, num_b + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(h):
        for j in range(w):
            out[a_ids[i, j], b_ids[i, j]] += 1
    return out_arr

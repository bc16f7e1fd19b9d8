"""Numba kernels over 64-bit word planes, using the CPU population-count instruction."""
import numpy as np
from numba import njit, types
from numba.extending import intrinsic


@intrinsic
def _ctpop(typingctx, x):
    def codegen(context, builder, signature, args):
        return builder.ctpop(args[0])

    return types.uint64(types.uint64), codegen


@intrinsic
def _cttz(typingctx, x):
    def codegen(context, builder, signature, args):
        return builder.cttz(args[0], context.get_constant(types.boolean, True))

    return types.uint64(types.uint64), codegen


@njit(nogil=True, cache=True)
def popcount(words):
    s = 0
    for k in range(words.shape[0]):
        s += _ctpop(words[k])
    return s


@njit(nogil=True, cache=True)
def bsp(a, b):
    s = 0
    for k in range(a.shape[0]):
        s += _ctpop(a[k] & b[k])
    return s


@njit(nogil=True, cache=True)
def b2sp(vp, vm, wp, wm):
    same = 0
    diff = 0
    for k in range(vp.shape[0]):
        same += _ctpop(vp[k] & wp[k]) + _ctpop(vm[k] & wm[k])
        diff += _ctpop(vp[k] & wm[k]) + _ctpop(vm[k] & wp[k])
    return same - diff


@njit(nogil=True, cache=True)
def hamming(a, b):
    s = 0
    for k in range(a.shape[0]):
        s += _ctpop(a[k] ^ b[k])
    return s


@njit(nogil=True, cache=True)
def masked_add(vp, vm, w):
    s = 0.0
    one = np.uint64(1)
    for k in range(vp.shape[0]):
        p = vp[k]
        rest = p | vm[k]
        base = k * 64
        # visit set bits in index order
        while rest:
            b = _cttz(rest)
            if (p >> b) & one:
                s += w[base + b]
            else:
                s -= w[base + b]
            rest &= rest - one
    return s


@njit(nogil=True, cache=True)
def b2sp_scan(P, M, qp, qm, out):
    for r in range(P.shape[0]):
        out[r] = b2sp(P[r], M[r], qp, qm)


@njit(nogil=True, cache=True)
def hamming_scan(B, q, out):
    for r in range(B.shape[0]):
        out[r] = hamming(B[r], q)


@njit(nogil=True, cache=True)
def euclidean_f32(x, y):
    acc = np.float32(0.0)
    for k in range(x.shape[0]):
        t = x[k] - y[k]
        acc += t * t
    return np.sqrt(acc)


@njit(nogil=True, cache=True)
def euclidean_scan_f32(X, q, out):
    for r in range(X.shape[0]):
        out[r] = euclidean_f32(X[r], q)


# Benchmark loops: `count` comparisons of a query against rows taken cyclically
# from a pool; the sum of results is returned so nothing can be elided.


@njit(nogil=True, cache=True)
def b2sp_loop(P, M, qp, qm, count):
    n = P.shape[0]
    s = 0
    for i in range(count):
        r = i % n
        s += b2sp(P[r], M[r], qp, qm)
    return s


@njit(nogil=True, cache=True)
def hamming_loop(B, q, count):
    n = B.shape[0]
    s = 0
    for i in range(count):
        s += hamming(B[i % n], q)
    return s


@njit(nogil=True, cache=True)
def euclidean_loop(X, q, count):
    n = X.shape[0]
    s = 0.0
    for i in range(count):
        s += euclidean_f32(X[i % n], q)
    return s


@njit(nogil=True, cache=True)
def masked_add_loop(P, M, w, count):
    n = P.shape[0]
    s = 0.0
    for i in range(count):
        r = i % n
        s += masked_add(P[r], M[r], w)
    return s

"""Naive nested-loop convolution, kept as the oracle for ``functional.conv2d``

Terms are summed one at a time in the same wide accumulator the fast path
uses and rounded to the input dtype once per output value. For float32
inputs the two paths therefore agree bit for bit.
"""

import numpy as np

from remnet.autodiff.functional import accumulator_dtype, conv_output_geometry


def naive_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, padding: str = "same") -> np.ndarray:
    B, H, W, Cin = x.shape
    K, Cout = w.shape[0], w.shape[3]
    Ho, pt, pb = conv_output_geometry(H, K, stride, padding)
    Wo, pl, pr = conv_output_geometry(W, K, stride, padding)
    acc_dtype = accumulator_dtype(x, w)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))).astype(acc_dtype)
    wa = w.astype(acc_dtype)
    ba = np.asarray(b).astype(acc_dtype)

    out = np.empty((B, Ho, Wo, Cout), dtype=np.result_type(x, w))
    for n in range(B):
        for i in range(Ho):
            for j in range(Wo):
                for f in range(Cout):
                    acc = ba[f]
                    for u in range(K):
                        for v in range(K):
                            for c in range(Cin):
                                acc = acc + xp[n, i * stride + u, j * stride + v, c] * wa[u, v, c, f]
                    out[n, i, j, f] = acc
    return out

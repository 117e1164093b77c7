"""Dense GF(2) matrices with rows packed into 64-bit words.

Column ``j`` of a row lives in bit ``j % 64`` of word ``j // 64``.  The byte
serialization is the little-endian view of those words, so it coincides with
``np.packbits(..., bitorder="little")`` of the unpacked rows.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def _words(ncols):
    return max(1, (ncols + 63) // 64)


def pack_rows(bits):
    """Pack a (rows, cols) 0/1 array into uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2:
        raise ValueError("expected a 2-D bit array")
    rows, cols = bits.shape
    W = _words(cols)
    padded = np.zeros((rows, W * 64), dtype=np.uint8)
    padded[:, :cols] = bits & 1
    by = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(by).view("<u8").astype(np.uint64, copy=False).reshape(rows, W)


def unpack_rows(words, ncols):
    words = np.ascontiguousarray(words, dtype="<u8")
    by = words.view(np.uint8).reshape(words.shape[0], words.shape[1] * 8)
    return np.unpackbits(by, axis=1, bitorder="little", count=ncols)


class BitMatrix:
    """GF(2) matrix of shape (rows, ncols) stored as packed uint64 words."""

    __slots__ = ("words", "ncols")

    def __init__(self, words, ncols):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != _words(ncols):
            raise ValueError(f"word array shape {words.shape} does not fit {ncols} columns")
        self.words = words
        self.ncols = int(ncols)

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits)
        if bits.ndim == 1:
            bits = bits[None, :]
        return cls(pack_rows(bits), bits.shape[1])

    @classmethod
    def zeros(cls, rows, ncols):
        return cls(np.zeros((rows, _words(ncols)), dtype=np.uint64), ncols)

    @classmethod
    def identity(cls, n):
        return cls.from_bits(np.eye(n, dtype=np.uint8))

    @property
    def shape(self):
        return (self.words.shape[0], self.ncols)

    @property
    def nrows(self):
        return self.words.shape[0]

    def copy(self):
        return BitMatrix(self.words.copy(), self.ncols)

    def to_bits(self):
        return unpack_rows(self.words, self.ncols)

    def row_weights(self):
        return np.bitwise_count(self.words).sum(axis=1).astype(np.int64)

    def vstack(self, other):
        if other.ncols != self.ncols:
            raise ValueError("column counts differ")
        return BitMatrix(np.vstack([self.words, other.words]), self.ncols)

    def take_rows(self, idx):
        return BitMatrix(self.words[np.asarray(idx, dtype=np.int64)], self.ncols)

    def delete_columns(self, cols):
        keep = np.ones(self.ncols, dtype=bool)
        keep[np.asarray(cols, dtype=np.int64)] = False
        return BitMatrix.from_bits(self.to_bits()[:, keep]) if self.nrows else \
            BitMatrix.zeros(0, int(keep.sum()))

    def packbytes(self):
        """Row-major bytes, ceil(ncols / 8) per row, little bit order."""
        nb = (self.ncols + 7) // 8
        by = self.words.astype("<u8", copy=False).view(np.uint8).reshape(self.nrows, self.words.shape[1] * 8)
        return np.ascontiguousarray(by[:, :nb]).tobytes()

    @classmethod
    def frombytes(cls, data, rows, ncols):
        nb = (ncols + 7) // 8
        by = np.frombuffer(data, dtype=np.uint8, count=rows * nb).reshape(rows, nb)
        bits = np.unpackbits(by, axis=1, bitorder="little", count=ncols)
        return cls.from_bits(bits) if rows else cls.zeros(0, ncols)

    def __eq__(self, other):
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.ncols == other.ncols and np.array_equal(self.words, other.words)

    def __repr__(self):
        return f"BitMatrix({self.nrows}x{self.ncols})"


def rref(M, col_order=None):
    """Reduced row echelon form.

    Parameters
    ----------
    M : BitMatrix
    col_order : sequence of int, optional
        Columns tried as pivots, in this order.  Default is left to right.

    Returns
    -------
    R : BitMatrix
        The nonzero rows of the echelon form, pivot rows first in pivot order.
    pivots : ndarray of int64
        Pivot column of each row of ``R``.
    """
    if col_order is None:
        col_order = np.arange(M.ncols, dtype=np.int64)
    else:
        col_order = np.asarray(col_order, dtype=np.int64)
    work = M.words.copy()
    piv = kernels.rref_inplace(work, np.ascontiguousarray(col_order))
    piv = np.asarray(piv, dtype=np.int64)
    return BitMatrix(work[: piv.shape[0]].copy(), M.ncols), piv


def rank(M):
    return int(rref(M)[1].shape[0])


def nullspace(M):
    """Basis (as rows) of {x : M x = 0}, the orthogonal complement of the row space."""
    R, piv = rref(M)
    N = M.ncols
    free = np.setdiff1d(np.arange(N, dtype=np.int64), piv)
    out = np.zeros((free.shape[0], _words(N)), dtype=np.uint64)
    fr = np.arange(free.shape[0])
    out[fr, free >> 6] |= np.left_shift(np.uint64(1), (free & 63).astype(np.uint64))
    if piv.size and free.size:
        Rb = R.to_bits()
        for i, p in enumerate(piv):
            hit = Rb[i, free].astype(bool)
            out[hit, p >> 6] |= np.uint64(1 << (int(p) & 63))
    return BitMatrix(out, N)


def rowspace_equal(A, B):
    if A.ncols != B.ncols:
        return False
    Ra, _ = rref(A)
    Rb, _ = rref(B)
    return Ra == Rb


def mul_transpose(A, B):
    """A @ B.T over GF(2) as a uint8 array of shape (A.rows, B.rows)."""
    if A.ncols != B.ncols:
        raise ValueError("column counts differ")
    out = np.zeros((A.nrows, B.nrows), dtype=np.uint8)
    for i in range(A.nrows):
        out[i] = np.bitwise_count(A.words[i] & B.words).sum(axis=1) & 1
    return out


def span_vector(M, coeffs):
    """Sum of the rows selected by the 0/1 vector ``coeffs``."""
    sel = np.asarray(coeffs, dtype=bool)
    if not sel.any():
        return np.zeros(M.words.shape[1], dtype=np.uint64)
    return np.bitwise_xor.reduce(M.words[sel], axis=0)

"""Constant sparse matrices used for graph propagation.

Thin validation layer over scipy CSR: entries are finite, indices canonical
(sorted, deduplicated), and the transpose is cached for backward passes.
These matrices never carry gradients — they are structural constants.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SparseMatrix:
    """Immutable CSR matrix with cached transpose and COO views."""

    __slots__ = ("_csr", "_csr_t", "_coo")

    def __init__(self, mat):
        csr = sp.csr_matrix(mat, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("sparse matrix has non-finite entries")
        self._csr = csr
        self._csr_t: sp.csr_matrix | None = None
        self._coo: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_edges(cls, n_rows: int, n_cols: int, rows, cols, values=None,
                   dedupe: bool = False) -> "SparseMatrix":
        """Build from index arrays; duplicates are an error unless dedupe=True."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("rows/cols must be equal-length 1-D arrays")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("col index out of range")
        if values is None:
            values = np.ones(rows.size)
        else:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != rows.shape:
                raise ValueError("values length mismatch")
        keys = rows * n_cols + cols
        uniq, first = np.unique(keys, return_index=True)
        if uniq.size != keys.size:
            if not dedupe:
                raise ValueError("duplicate (row, col) entries")
            rows, cols, values = rows[first], cols[first], values[first]
        coo = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols))
        return cls(coo)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        return cls(sp.csr_matrix(np.asarray(arr, dtype=np.float64)))

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def csr_t(self) -> sp.csr_matrix:
        if self._csr_t is None:
            self._csr_t = self._csr.T.tocsr()
        return self._csr_t

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape  # type: ignore[return-value]

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, values) in row-major order."""
        if self._coo is None:
            c = self._csr.tocoo()
            self._coo = (c.row.astype(np.int64), c.col.astype(np.int64),
                         c.data.copy())
        return self._coo

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def is_symmetric(self) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        return (self._csr != self._csr.T).nnz == 0

    def without_diagonal(self) -> "SparseMatrix":
        csr = self._csr.copy().tolil()
        csr.setdiag(0.0)
        return SparseMatrix(csr.tocsr())

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


class EdgePattern:
    """Fixed (dst, src) edge structure whose per-edge values vary per call.

    Message passing with learned edge weights is a sparse matmul whose
    sparsity pattern never changes — only the data vector does. Holding the
    CSR skeleton (and the permutation that realigns data for the transpose)
    lets each call run at scipy SpMM speed with no per-call sorting.

    Edges must arrive grouped by destination with sources ascending inside
    each group, i.e. CSR enumeration order of the hop adjacency.
    """

    __slots__ = ("n", "src", "dst", "indices", "indptr", "perm_t",
                 "indptr_t", "indices_t")

    def __init__(self, dst: np.ndarray, src: np.ndarray, n: int):
        dst = np.asarray(dst, dtype=np.int64)
        src = np.asarray(src, dtype=np.int64)
        if dst.shape != src.shape or dst.ndim != 1:
            raise ValueError("dst/src must be equal-length 1-D arrays")
        if dst.size:
            if dst.min() < 0 or dst.max() >= n or src.min() < 0 or src.max() >= n:
                raise ValueError("edge index out of range")
            if np.any(dst[1:] < dst[:-1]):
                raise ValueError("edges must be grouped by destination")
        self.n = int(n)
        self.src = src
        self.dst = dst
        counts = np.bincount(dst, minlength=n)
        self.indices = src.astype(np.int32)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        # transpose skeleton: rows keyed by src, original edge order preserved
        # within each row so transposed sums match edge-list accumulation
        self.perm_t = np.argsort(src, kind="stable")
        counts_t = np.bincount(src, minlength=n)
        self.indptr_t = np.concatenate([[0], np.cumsum(counts_t)]).astype(np.int32)
        self.indices_t = dst[self.perm_t].astype(np.int32)

    @property
    def nnz(self) -> int:
        return int(self.src.size)

    def matmul(self, data: np.ndarray, dense: np.ndarray) -> np.ndarray:
        """(pattern with values `data`) @ dense."""
        mat = sp.csr_matrix((data, self.indices, self.indptr),
                            shape=(self.n, self.n))
        return mat @ dense

    def matmul_t(self, data: np.ndarray, dense: np.ndarray) -> np.ndarray:
        """(pattern with values `data`).T @ dense."""
        mat = sp.csr_matrix((data[self.perm_t], self.indices_t, self.indptr_t),
                            shape=(self.n, self.n))
        return mat @ dense

"""Dense matrix and vector algebra over Z_p.

Matrices are immutable row-major tuples of plain ints; vectors are plain
tuples.  Inner products accumulate exact integer sums and reduce once at the
end — for p below the 61-bit cap the partial sums stay far under Python's
fast-int limits, and one reduction per entry is measurably faster than
reducing every term.

Also home to the fixed-width little-endian codecs shared by key files,
signature files and wire frames: a matrix is ``u32 rows | u32 cols | entries``
and a vector is ``u32 len | entries``, each entry ``field.element_size`` bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import DimensionMismatch, MalformedEncoding, SingularMatrixError
from .field import Field, active_counter

# Decoders refuse dimensions above this (allocation guard, not a math limit).
MAX_DECODE_DIM = 1 << 20

_DIMS = struct.Struct("<II")
_LEN = struct.Struct("<I")


@dataclass(frozen=True)
class MatrixZp:
    """Immutable dense matrix over a prime field."""

    field: Field
    rows: tuple

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def entry(self, i: int, j: int) -> int:
        return self.rows[i][j]


def from_rows(field: Field, rows) -> MatrixZp:
    """Checked constructor; reduces arbitrary ints mod p."""
    p = field.p
    reduced = tuple(tuple(int(x) % p for x in row) for row in rows)
    if reduced:
        width = len(reduced[0])
        if width == 0 or any(len(r) != width for r in reduced):
            raise DimensionMismatch("ragged or empty rows")
    return MatrixZp(field, reduced)


def identity(field: Field, n: int) -> MatrixZp:
    return MatrixZp(field, tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n)))


def zeros(field: Field, n_rows: int, n_cols: int) -> MatrixZp:
    return MatrixZp(field, tuple((0,) * n_cols for _ in range(n_rows)))


def diag_from_vector(field: Field, v) -> MatrixZp:
    """Diagonal matrix with v on the diagonal."""
    n = len(v)
    return MatrixZp(
        field, tuple(tuple(v[i] % field.p if i == j else 0 for j in range(n)) for i in range(n))
    )


def random_matrix(field: Field, n_rows: int, n_cols: int, rng) -> MatrixZp:
    p = field.p
    return MatrixZp(
        field, tuple(tuple(rng.randrange(p) for _ in range(n_cols)) for _ in range(n_rows))
    )


def random_invertible(field: Field, n: int, rng) -> MatrixZp:
    """Rejection-sample a uniform invertible matrix."""
    while True:
        m = random_matrix(field, n, n, rng)
        if det(m) != 0:
            return m


def _same_field(a: MatrixZp, b: MatrixZp) -> None:
    if a.field.p != b.field.p:
        raise DimensionMismatch("operands live in different fields")


def mat_mul(a: MatrixZp, b: MatrixZp) -> MatrixZp:
    _same_field(a, b)
    if a.n_cols != b.n_rows:
        raise DimensionMismatch(f"cannot multiply {a.n_rows}x{a.n_cols} by {b.n_rows}x{b.n_cols}")
    p = a.field.p
    bcols = tuple(zip(*b.rows))
    out = tuple(
        tuple(sum(x * y for x, y in zip(arow, bcol)) % p for bcol in bcols) for arow in a.rows
    )
    c = active_counter()
    if c is not None:
        inner = a.n_cols
        c.muls += a.n_rows * b.n_cols * inner
        c.adds += a.n_rows * b.n_cols * (inner - 1)
    return MatrixZp(a.field, out)


def mat_add(a: MatrixZp, b: MatrixZp) -> MatrixZp:
    _same_field(a, b)
    if a.n_rows != b.n_rows or a.n_cols != b.n_cols:
        raise DimensionMismatch("matrix addition needs equal shapes")
    p = a.field.p
    out = tuple(
        tuple((x + y) % p for x, y in zip(ra, rb)) for ra, rb in zip(a.rows, b.rows)
    )
    c = active_counter()
    if c is not None:
        c.adds += a.n_rows * a.n_cols
    return MatrixZp(a.field, out)


def mat_sub(a: MatrixZp, b: MatrixZp) -> MatrixZp:
    _same_field(a, b)
    if a.n_rows != b.n_rows or a.n_cols != b.n_cols:
        raise DimensionMismatch("matrix subtraction needs equal shapes")
    p = a.field.p
    out = tuple(
        tuple((x - y) % p for x, y in zip(ra, rb)) for ra, rb in zip(a.rows, b.rows)
    )
    c = active_counter()
    if c is not None:
        c.subs += a.n_rows * a.n_cols
    return MatrixZp(a.field, out)


def mat_pow(a: MatrixZp, e: int) -> MatrixZp:
    """Square-and-multiply; e must be a non-negative integer."""
    if a.n_rows != a.n_cols:
        raise DimensionMismatch("only square matrices have powers")
    if e < 0:
        raise ValueError("negative exponents are not defined here; invert first")
    result = identity(a.field, a.n_rows)
    base = a
    while e:
        if e & 1:
            result = mat_mul(result, base)
        e >>= 1
        if e:
            base = mat_mul(base, base)
    return result


def transpose(a: MatrixZp) -> MatrixZp:
    return MatrixZp(a.field, tuple(zip(*a.rows)))


def mat_inv(a: MatrixZp) -> MatrixZp:
    """Gauss-Jordan inverse; raises SingularMatrixError when rank-deficient."""
    if a.n_rows != a.n_cols:
        raise DimensionMismatch("only square matrices are invertible")
    n = a.n_rows
    p = a.field.p
    work = [list(row) for row in a.rows]
    aug = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    c = active_counter()
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            raise SingularMatrixError(f"no pivot in column {col}")
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = pow(work[col][col], p - 2, p)
        if c is not None:
            c.invs += 1
            c.muls += 2 * n
        work[col] = [x * inv_p % p for x in work[col]]
        aug[col] = [x * inv_p % p for x in aug[col]]
        wc, ac = work[col], aug[col]
        for r in range(n):
            if r == col:
                continue
            factor = work[r][col]
            if factor == 0:
                continue
            wr, ar = work[r], aug[r]
            for j in range(n):
                wr[j] = (wr[j] - factor * wc[j]) % p
                ar[j] = (ar[j] - factor * ac[j]) % p
            if c is not None:
                c.muls += 2 * n
                c.subs += 2 * n
    return MatrixZp(a.field, tuple(tuple(row) for row in aug))


def det(a: MatrixZp) -> int:
    """Determinant via elimination with row-swap sign tracking."""
    if a.n_rows != a.n_cols:
        raise DimensionMismatch("determinant needs a square matrix")
    n = a.n_rows
    p = a.field.p
    work = [list(row) for row in a.rows]
    sign = 1
    c = active_counter()
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            return 0
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            sign = -sign
        inv_p = pow(work[col][col], p - 2, p)
        if c is not None:
            c.invs += 1
        for r in range(col + 1, n):
            factor = work[r][col] * inv_p % p
            if factor == 0:
                continue
            wr, wc = work[r], work[col]
            for j in range(col, n):
                wr[j] = (wr[j] - factor * wc[j]) % p
            if c is not None:
                c.muls += 1 + (n - col)
                c.subs += n - col
    d = sign
    for i in range(n):
        d = d * work[i][i]
    if c is not None:
        c.muls += n
    return d % p


def mat_vec(a: MatrixZp, v) -> tuple:
    """Column-vector product A*v."""
    if a.n_cols != len(v):
        raise DimensionMismatch(f"{a.n_rows}x{a.n_cols} matrix times length-{len(v)} vector")
    p = a.field.p
    out = tuple(sum(x * y for x, y in zip(row, v)) % p for row in a.rows)
    c = active_counter()
    if c is not None:
        c.muls += a.n_rows * a.n_cols
        c.adds += a.n_rows * (a.n_cols - 1)
    return out


def vec_mat(v, a: MatrixZp) -> tuple:
    """Row-vector product v*A."""
    if a.n_rows != len(v):
        raise DimensionMismatch(f"length-{len(v)} vector times {a.n_rows}x{a.n_cols} matrix")
    p = a.field.p
    out = tuple(sum(x * y for x, y in zip(v, col)) % p for col in zip(*a.rows))
    c = active_counter()
    if c is not None:
        c.muls += a.n_rows * a.n_cols
        c.adds += a.n_cols * (a.n_rows - 1)
    return out


def vec_add(field: Field, u, v) -> tuple:
    if len(u) != len(v):
        raise DimensionMismatch("vector addition needs equal lengths")
    p = field.p
    c = active_counter()
    if c is not None:
        c.adds += len(u)
    return tuple((x + y) % p for x, y in zip(u, v))


def vec_sub(field: Field, u, v) -> tuple:
    if len(u) != len(v):
        raise DimensionMismatch("vector subtraction needs equal lengths")
    p = field.p
    c = active_counter()
    if c is not None:
        c.subs += len(u)
    return tuple((x - y) % p for x, y in zip(u, v))


def vec_scale(field: Field, k: int, v) -> tuple:
    p = field.p
    c = active_counter()
    if c is not None:
        c.muls += len(v)
    return tuple(k * x % p for x in v)


@dataclass(frozen=True)
class PermutationMatrix:
    """Row permutation stored as an index array: applying it maps v[i] <- v[perm[i]]."""

    perm: tuple

    def __post_init__(self) -> None:
        n = len(self.perm)
        if sorted(self.perm) != list(range(n)):
            raise DimensionMismatch(f"{self.perm!r} is not a permutation of 0..{n - 1}")

    @property
    def n(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, n: int) -> "PermutationMatrix":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng) -> "PermutationMatrix":
        idx = list(range(n))
        rng.shuffle(idx)
        return cls(tuple(idx))

    def to_matrix(self, field: Field) -> MatrixZp:
        n = self.n
        return MatrixZp(
            field,
            tuple(tuple(1 if j == self.perm[i] else 0 for j in range(n)) for i in range(n)),
        )

    def inverse(self) -> "PermutationMatrix":
        inv = [0] * self.n
        for i, t in enumerate(self.perm):
            inv[t] = i
        return PermutationMatrix(tuple(inv))

    def apply(self, v) -> tuple:
        if len(v) != self.n:
            raise DimensionMismatch("permutation size does not match vector length")
        return tuple(v[t] for t in self.perm)

    def permute_rows(self, a: MatrixZp) -> MatrixZp:
        if a.n_rows != self.n:
            raise DimensionMismatch("permutation size does not match row count")
        return MatrixZp(a.field, tuple(a.rows[t] for t in self.perm))

    def compose(self, other: "PermutationMatrix") -> "PermutationMatrix":
        """self ∘ other, matching to_matrix(self) @ to_matrix(other)."""
        if self.n != other.n:
            raise DimensionMismatch("permutation sizes differ")
        return PermutationMatrix(tuple(other.perm[t] for t in self.perm))


# --- fixed-width little-endian codecs ---------------------------------------


def encode_vector(field: Field, v) -> bytes:
    size = field.element_size
    return _LEN.pack(len(v)) + b"".join(x.to_bytes(size, "little") for x in v)


def read_vector(field: Field, buf: bytes, offset: int = 0) -> tuple:
    """Decode one vector at offset; returns (vector, next_offset)."""
    if len(buf) < offset + _LEN.size:
        raise MalformedEncoding("truncated vector length")
    (length,) = _LEN.unpack_from(buf, offset)
    if length > MAX_DECODE_DIM:
        raise MalformedEncoding(f"vector length {length} above decode cap")
    offset += _LEN.size
    size = field.element_size
    end = offset + length * size
    if len(buf) < end:
        raise MalformedEncoding("truncated vector payload")
    p = field.p
    out = []
    for i in range(length):
        x = int.from_bytes(buf[offset + i * size : offset + (i + 1) * size], "little")
        if x >= p:
            raise MalformedEncoding(f"vector entry {x} out of range for p={p}")
        out.append(x)
    return tuple(out), end


def decode_vector(field: Field, buf: bytes) -> tuple:
    v, end = read_vector(field, buf, 0)
    if end != len(buf):
        raise MalformedEncoding("trailing bytes after vector")
    return v


def encode_matrix(a: MatrixZp) -> bytes:
    size = a.field.element_size
    body = b"".join(x.to_bytes(size, "little") for row in a.rows for x in row)
    return _DIMS.pack(a.n_rows, a.n_cols) + body


def read_matrix(field: Field, buf: bytes, offset: int = 0):
    """Decode one matrix at offset; returns (matrix, next_offset)."""
    if len(buf) < offset + _DIMS.size:
        raise MalformedEncoding("truncated matrix header")
    n_rows, n_cols = _DIMS.unpack_from(buf, offset)
    if n_rows == 0 or n_cols == 0 or n_rows > MAX_DECODE_DIM or n_cols > MAX_DECODE_DIM:
        raise MalformedEncoding(f"bad matrix dimensions {n_rows}x{n_cols}")
    offset += _DIMS.size
    size = field.element_size
    end = offset + n_rows * n_cols * size
    if len(buf) < end:
        raise MalformedEncoding("truncated matrix payload")
    p = field.p
    rows = []
    pos = offset
    for _ in range(n_rows):
        row = []
        for _ in range(n_cols):
            x = int.from_bytes(buf[pos : pos + size], "little")
            if x >= p:
                raise MalformedEncoding(f"matrix entry {x} out of range for p={p}")
            row.append(x)
            pos += size
        rows.append(tuple(row))
    return MatrixZp(field, tuple(rows)), end


def decode_matrix(field: Field, buf: bytes) -> MatrixZp:
    m, end = read_matrix(field, buf, 0)
    if end != len(buf):
        raise MalformedEncoding("trailing bytes after matrix")
    return m

"""Two-party synchronization of the shared bias vector theta.

Both parties hold the same base matrix W and public row vector Q.  Each picks
a Diffie-Hellman exponent d and mix exponents alpha_1..alpha_u, exchanges
``W^d``, and derives the shared matrix ``W_s = (peer share)^d``.  From it both
compute the mask ``r = hash_to_field(encode(W_s))`` and publish
``P = Q @ (W_s^{alpha_1} + ... + W_s^{alpha_u}) + r``; the synchronized bias
is ``theta = P_own + P_peer``, identical on both ends.

Wire frames are ``u8 tag | u32le length | payload`` with tag 0x01 carrying a
matrix (the DH share) and 0x02 a vector (the public share).  Sessions are
strict state machines — any out-of-order call raises InvalidStateError and
leaves the session untouched.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple, Union

from .errors import (
    InvalidStateError,
    LengthOverflow,
    MalformedEncoding,
    MalformedFrame,
    ParameterError,
    UnknownTag,
)
from .field import Field
from .matrix import (
    MatrixZp,
    decode_matrix,
    decode_vector,
    det,
    encode_matrix,
    encode_vector,
    mat_add,
    mat_pow,
    read_matrix,
    read_vector,
    vec_add,
    vec_mat,
)
from .network import SynapticWeights
from .scheme import hash_to_field

TAG_DH_MATRIX = 0x01
TAG_PUBLIC_VECTOR = 0x02
MAX_PAYLOAD = 1 << 24  # 16 MiB: far above any real frame, low enough to stop bombs

THETA_MAGIC = b"NNSIGTH1"
SETUP_MAGIC = b"NNSIGSH1"
SETUP_VERSION = 1

_HDR = struct.Struct("<BI")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


# --- wire codec ---------------------------------------------------------------


@dataclass(frozen=True)
class DhMatrixMessage:
    matrix: MatrixZp


@dataclass(frozen=True)
class PublicVectorMessage:
    field: Field
    vector: tuple


SyncMessage = Union[DhMatrixMessage, PublicVectorMessage]


def wire_encode(msg: SyncMessage) -> bytes:
    if isinstance(msg, DhMatrixMessage):
        tag, payload = TAG_DH_MATRIX, encode_matrix(msg.matrix)
    elif isinstance(msg, PublicVectorMessage):
        tag, payload = TAG_PUBLIC_VECTOR, encode_vector(msg.field, msg.vector)
    else:
        raise TypeError(f"not a sync message: {msg!r}")
    if len(payload) > MAX_PAYLOAD:
        raise LengthOverflow(f"payload of {len(payload)} bytes exceeds cap {MAX_PAYLOAD}")
    return _HDR.pack(tag, len(payload)) + payload


def read_frame(data: bytes, field: Field, offset: int = 0) -> Tuple[SyncMessage, int]:
    """Decode one frame at offset; returns (message, next_offset)."""
    if len(data) < offset + _HDR.size:
        raise MalformedFrame("truncated frame header")
    tag, length = _HDR.unpack_from(data, offset)
    if tag not in (TAG_DH_MATRIX, TAG_PUBLIC_VECTOR):
        raise UnknownTag(f"unknown frame tag 0x{tag:02x}")
    if length > MAX_PAYLOAD:
        raise LengthOverflow(f"declared payload of {length} bytes exceeds cap {MAX_PAYLOAD}")
    offset += _HDR.size
    if len(data) < offset + length:
        raise MalformedFrame("truncated frame payload")
    payload = data[offset : offset + length]
    try:
        if tag == TAG_DH_MATRIX:
            return DhMatrixMessage(decode_matrix(field, payload)), offset + length
        return PublicVectorMessage(field, decode_vector(field, payload)), offset + length
    except MalformedEncoding as exc:
        raise MalformedFrame(f"bad frame payload: {exc}") from exc


def wire_decode(data: bytes, field: Field) -> SyncMessage:
    msg, end = read_frame(data, field, 0)
    if end != len(data):
        raise MalformedFrame("trailing bytes after frame")
    return msg


# --- session ------------------------------------------------------------------


class SessionState(enum.Enum):
    INIT = "init"
    SENT_DH = "sent_dh"
    HAVE_SHARED = "have_shared"
    SENT_PUBLIC = "sent_public"
    DONE = "done"


@dataclass(frozen=True)
class SyncConfig:
    """Shared setup both parties must agree on out of band."""

    weights: SynapticWeights
    q: tuple
    u: int = 2

    def __post_init__(self) -> None:
        if self.u < 1:
            raise ParameterError(f"need at least one mix exponent, got u={self.u}")
        if len(self.q) != self.weights.n:
            raise ParameterError("Q length does not match the base matrix")

    @property
    def field(self) -> Field:
        return self.weights.w.field

    @property
    def n(self) -> int:
        return self.weights.n


@dataclass
class SyncSession:
    """One party's view of a run; drive it dh_message -> receive_dh ->
    public_vector -> finalize."""

    config: SyncConfig
    dh_exponent: int
    mix_exponents: tuple
    state: SessionState = dc_field(default=SessionState.INIT, init=False)
    transcript: List[Tuple[str, bytes]] = dc_field(default_factory=list, init=False)
    shared_matrix: Optional[MatrixZp] = dc_field(default=None, init=False)
    mask: Optional[tuple] = dc_field(default=None, init=False)
    local_public: Optional[tuple] = dc_field(default=None, init=False)
    theta: Optional[tuple] = dc_field(default=None, init=False)

    def __post_init__(self) -> None:
        p = self.config.field.p
        if not 1 <= self.dh_exponent <= p - 1:
            raise ParameterError(f"DH exponent must lie in [1, {p - 1}]")
        if len(self.mix_exponents) != self.config.u:
            raise ParameterError("need exactly u mix exponents")
        if any(not 0 <= alpha <= p - 1 for alpha in self.mix_exponents):
            raise ParameterError(f"mix exponents must lie in [0, {p - 1}]")

    @classmethod
    def create(cls, config: SyncConfig, rng: Optional[random.Random] = None) -> "SyncSession":
        rng = rng or random.Random()
        p = config.field.p
        return cls(
            config=config,
            dh_exponent=rng.randrange(1, p),
            mix_exponents=tuple(rng.randrange(0, p) for _ in range(config.u)),
        )

    def _expect(self, state: SessionState, call: str) -> None:
        if self.state is not state:
            raise InvalidStateError(
                f"{call}() is only valid in state {state.value}, session is {self.state.value}"
            )

    def dh_message(self) -> DhMatrixMessage:
        """Our DH share W^d."""
        self._expect(SessionState.INIT, "dh_message")
        share = mat_pow(self.config.weights.w, self.dh_exponent)
        msg = DhMatrixMessage(share)
        self.transcript.append(("send", wire_encode(msg)))
        self.state = SessionState.SENT_DH
        return msg

    def receive_dh(self, msg: DhMatrixMessage) -> None:
        """Absorb the peer's DH share and derive W_s and the mask r."""
        self._expect(SessionState.SENT_DH, "receive_dh")
        if not isinstance(msg, DhMatrixMessage):
            raise MalformedFrame(f"expected a DH matrix frame, got {type(msg).__name__}")
        peer = msg.matrix
        n = self.config.n
        if peer.n_rows != n or peer.n_cols != n:
            raise MalformedFrame(f"peer DH share is {peer.n_rows}x{peer.n_cols}, expected {n}x{n}")
        if peer.field.p != self.config.field.p:
            raise MalformedFrame("peer DH share uses a different modulus")
        self.transcript.append(("recv", wire_encode(msg)))
        shared = mat_pow(peer, self.dh_exponent)
        self.shared_matrix = shared
        self.mask = hash_to_field(encode_matrix(shared), n, self.config.field)
        self.state = SessionState.HAVE_SHARED

    def public_vector(self) -> PublicVectorMessage:
        """Our masked public share P = Q @ sum_i W_s^alpha_i + r."""
        self._expect(SessionState.HAVE_SHARED, "public_vector")
        field = self.config.field
        n = self.config.n
        mix = None
        for alpha in self.mix_exponents:
            term = mat_pow(self.shared_matrix, alpha)
            mix = term if mix is None else mat_add(mix, term)
        p_vec = vec_add(field, vec_mat(self.config.q, mix), self.mask)
        self.local_public = p_vec
        msg = PublicVectorMessage(field, p_vec)
        self.transcript.append(("send", wire_encode(msg)))
        self.state = SessionState.SENT_PUBLIC
        return msg

    def finalize(self, msg: PublicVectorMessage) -> tuple:
        """Combine shares: theta = P_own + P_peer."""
        self._expect(SessionState.SENT_PUBLIC, "finalize")
        if not isinstance(msg, PublicVectorMessage):
            raise MalformedFrame(f"expected a public-vector frame, got {type(msg).__name__}")
        if len(msg.vector) != self.config.n:
            raise MalformedFrame(
                f"peer public share has length {len(msg.vector)}, expected {self.config.n}"
            )
        self.transcript.append(("recv", wire_encode(msg)))
        self.theta = vec_add(self.config.field, self.local_public, msg.vector)
        self.state = SessionState.DONE
        return self.theta


# --- transports ----------------------------------------------------------------


def run_pair(a: SyncSession, b: SyncSession, through_wire: bool = True) -> Tuple[tuple, tuple]:
    """Drive two in-process sessions to completion; returns (theta_a, theta_b)."""
    field = a.config.field

    def ship(msg):
        return wire_decode(wire_encode(msg), field) if through_wire else msg

    da, db = a.dh_message(), b.dh_message()
    a.receive_dh(ship(db))
    b.receive_dh(ship(da))
    pa, pb = a.public_vector(), b.public_vector()
    return a.finalize(ship(pb)), b.finalize(ship(pa))


def _recv_exact(sock, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        part = sock.recv(count - got)
        if not part:
            raise MalformedFrame("connection closed mid-frame")
        chunks.append(part)
        got += len(part)
    return b"".join(chunks)


def send_frame(sock, msg: SyncMessage) -> None:
    sock.sendall(wire_encode(msg))


def recv_frame(sock, field: Field) -> SyncMessage:
    header = _recv_exact(sock, _HDR.size)
    tag, length = _HDR.unpack_from(header)
    if tag not in (TAG_DH_MATRIX, TAG_PUBLIC_VECTOR):
        raise UnknownTag(f"unknown frame tag 0x{tag:02x}")
    if length > MAX_PAYLOAD:
        raise LengthOverflow(f"declared payload of {length} bytes exceeds cap {MAX_PAYLOAD}")
    return wire_decode(header + _recv_exact(sock, length), field)


def run_over_socket(session: SyncSession, sock) -> tuple:
    """Run a full session over a connected stream socket; returns theta.

    Both ends send before they read; the frames are tiny, so full-duplex
    buffering makes the symmetric order deadlock-free.
    """
    field = session.config.field
    send_frame(sock, session.dh_message())
    peer_dh = recv_frame(sock, field)
    session.receive_dh(peer_dh)
    send_frame(sock, session.public_vector())
    peer_public = recv_frame(sock, field)
    return session.finalize(peer_public)


# --- theta and shared-setup files ----------------------------------------------


def encode_theta(field: Field, theta) -> bytes:
    return THETA_MAGIC + encode_vector(field, theta)


def decode_theta(field: Field, data: bytes) -> tuple:
    if len(data) < len(THETA_MAGIC) or data[: len(THETA_MAGIC)] != THETA_MAGIC:
        raise MalformedEncoding("bad theta magic")
    vec, end = read_vector(field, data, len(THETA_MAGIC))
    if end != len(data):
        raise MalformedEncoding("trailing bytes after theta vector")
    return vec


def encode_shared_setup(weights: SynapticWeights, q: tuple) -> bytes:
    field = weights.w.field
    return (
        SETUP_MAGIC
        + bytes([SETUP_VERSION])
        + _U64.pack(field.p)
        + _U32.pack(weights.n)
        + encode_matrix(weights.w)
        + encode_vector(field, q)
    )


def decode_shared_setup(data: bytes) -> Tuple[SynapticWeights, tuple]:
    hdr = len(SETUP_MAGIC)
    if len(data) < hdr + 1 or data[:hdr] != SETUP_MAGIC:
        raise MalformedEncoding("bad shared-setup magic")
    if data[hdr] != SETUP_VERSION:
        raise MalformedEncoding(f"shared-setup version {data[hdr]} not supported")
    off = hdr + 1
    if len(data) < off + 12:
        raise MalformedEncoding("shared-setup file truncated in header")
    (p,) = _U64.unpack_from(data, off)
    (n,) = _U32.unpack_from(data, off + 8)
    off += 12
    try:
        field = Field(p)
    except ParameterError as exc:
        raise MalformedEncoding(f"bad modulus in shared setup: {exc}") from exc
    w, off = read_matrix(field, data, off)
    q, off = read_vector(field, data, off)
    if off != len(data):
        raise MalformedEncoding("trailing bytes after shared setup")
    if w.n_rows != n or w.n_cols != n or len(q) != n:
        raise MalformedEncoding("shared-setup dimensions are inconsistent")
    if any(x not in (1, p - 1) for row in w.rows for x in row):
        raise MalformedEncoding("shared-setup base matrix entries must be 1 or p-1")
    if det(w) == 0:
        raise MalformedEncoding("shared-setup base matrix is singular mod p")
    return SynapticWeights(w=w), q

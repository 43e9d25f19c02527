"""Two-party bias synchronization: algebra, state machine, wire frames."""

from __future__ import annotations

import random
import socket
import struct
import threading

import pytest

from nnsig.errors import (
    InvalidStateError,
    LengthOverflow,
    MalformedEncoding,
    MalformedFrame,
    ParameterError,
    UnknownTag,
)
from nnsig.field import Field
from nnsig.matrix import MatrixZp, encode_matrix, from_rows, mat_add, mat_pow, vec_add, vec_mat
from nnsig.network import NetworkConfig, SynapticWeights, build_network
from nnsig.scheme import hash_to_field
from nnsig.sync import (
    MAX_PAYLOAD,
    DhMatrixMessage,
    PublicVectorMessage,
    SessionState,
    SyncConfig,
    SyncSession,
    decode_shared_setup,
    decode_theta,
    encode_shared_setup,
    encode_theta,
    read_frame,
    recv_frame,
    run_over_socket,
    run_pair,
    wire_decode,
    wire_encode,
)


def _setup(p=257, n=6, seed=b"sync", q_seed=21, u=2):
    field = Field(p)
    config = NetworkConfig(n=n, field=field, rho=3, seed=seed)
    weights, _ = build_network(config)
    q = field.sample_vector(random.Random(q_seed), n)
    return SyncConfig(weights=weights, q=q, u=u)


def test_both_parties_agree():
    rng = random.Random(31)
    for trial in range(20):
        config = _setup(seed=b"agree%d" % trial, n=rng.randrange(2, 7))
        a = SyncSession.create(config, random.Random(rng.random()))
        b = SyncSession.create(config, random.Random(rng.random()))
        ta, tb = run_pair(a, b, through_wire=trial % 2 == 0)
        assert ta == tb
        assert len(ta) == config.n
        assert a.state is SessionState.DONE and b.state is SessionState.DONE


def test_unit_dh_exponents_share_the_base_matrix():
    config = _setup()
    a = SyncSession(config=config, dh_exponent=1, mix_exponents=(2, 3))
    b = SyncSession(config=config, dh_exponent=1, mix_exponents=(4, 5))
    run_pair(a, b)
    assert a.shared_matrix == config.weights.w
    assert b.shared_matrix == config.weights.w


def test_zero_mix_exponent_gives_masked_q():
    config = _setup(u=1)
    a = SyncSession(config=config, dh_exponent=3, mix_exponents=(0,))
    b = SyncSession(config=config, dh_exponent=5, mix_exponents=(7,))
    run_pair(a, b)
    # W_s^0 = I, so A's share is Q + r.
    assert a.local_public == vec_add(config.field, config.q, a.mask)


def test_scalar_hand_oracle():
    # n = 1 over Z_7 keeps every step bare integer arithmetic.
    f7 = Field(7)
    weights = SynapticWeights(w=from_rows(f7, [[6]]))
    config = SyncConfig(weights=weights, q=(4,), u=1)
    a = SyncSession(config=config, dh_exponent=1, mix_exponents=(2,))
    b = SyncSession(config=config, dh_exponent=1, mix_exponents=(3,))
    ta, tb = run_pair(a, b)
    shared = 6  # 6^1 then ^1 again
    r = hash_to_field(encode_matrix(from_rows(f7, [[shared]])), 1, f7)[0]
    p_a = (4 * pow(shared, 2, 7) + r) % 7
    p_b = (4 * pow(shared, 3, 7) + r) % 7
    assert ta == tb == ((p_a + p_b) % 7,)


def test_transcript_replay_identity():
    # Reconstruct theta from the wire transcript plus both parties' exponents:
    # theta = Q (H_a + H_b) + 2r.
    config = _setup(n=5)
    field = config.field
    a = SyncSession.create(config, random.Random(32))
    b = SyncSession.create(config, random.Random(33))
    ta, tb = run_pair(a, b)
    kinds = [k for k, _ in a.transcript]
    assert kinds == ["send", "recv", "send", "recv"]
    peer_dh = wire_decode(a.transcript[1][1], field)
    shared = mat_pow(peer_dh.matrix, a.dh_exponent)
    r = hash_to_field(encode_matrix(shared), config.n, field)
    mix = None
    for alpha in a.mix_exponents + b.mix_exponents:
        term = mat_pow(shared, alpha)
        mix = term if mix is None else mat_add(mix, term)
    expected = vec_add(field, vec_add(field, vec_mat(config.q, mix), r), r)
    assert ta == expected == tb


def test_state_machine_rejects_out_of_order_calls():
    config = _setup(n=3)
    donor_a = SyncSession.create(config, random.Random(34))
    donor_b = SyncSession.create(config, random.Random(35))
    dh_frame = donor_a.dh_message()
    donor_b.dh_message()
    donor_b.receive_dh(dh_frame)
    pub_frame = donor_b.public_vector()

    def fresh(state):
        s = SyncSession.create(config, random.Random(36))
        if state is SessionState.INIT:
            return s
        s.dh_message()
        if state is SessionState.SENT_DH:
            return s
        s.receive_dh(dh_frame)
        if state is SessionState.HAVE_SHARED:
            return s
        s.public_vector()
        if state is SessionState.SENT_PUBLIC:
            return s
        s.finalize(pub_frame)
        return s

    calls = {
        "dh_message": lambda s: s.dh_message(),
        "receive_dh": lambda s: s.receive_dh(dh_frame),
        "public_vector": lambda s: s.public_vector(),
        "finalize": lambda s: s.finalize(pub_frame),
    }
    allowed = {
        SessionState.INIT: "dh_message",
        SessionState.SENT_DH: "receive_dh",
        SessionState.HAVE_SHARED: "public_vector",
        SessionState.SENT_PUBLIC: "finalize",
        SessionState.DONE: None,
    }
    for state, ok_call in allowed.items():
        for name, invoke in calls.items():
            if name == ok_call:
                continue
            session = fresh(state)
            before_transcript = len(session.transcript)
            with pytest.raises(InvalidStateError):
                invoke(session)
            assert session.state is state
            assert len(session.transcript) == before_transcript


def test_receive_dh_validates_the_peer_share():
    config = _setup(n=3)
    field = config.field

    def armed():
        s = SyncSession.create(config, random.Random(37))
        s.dh_message()
        return s

    with pytest.raises(MalformedFrame):
        armed().receive_dh(PublicVectorMessage(field, (1, 2, 3)))
    wrong_size = DhMatrixMessage(MatrixZp(field, ((1, 0), (0, 1))))
    with pytest.raises(MalformedFrame):
        armed().receive_dh(wrong_size)
    other = Field(263)
    wrong_p = DhMatrixMessage(
        MatrixZp(other, tuple(tuple(1 if i == j else 0 for j in range(3)) for i in range(3)))
    )
    with pytest.raises(MalformedFrame):
        armed().receive_dh(wrong_p)


def test_finalize_validates_the_peer_share():
    config = _setup(n=3)
    a = SyncSession.create(config, random.Random(38))
    b = SyncSession.create(config, random.Random(39))
    dh_a, dh_b = a.dh_message(), b.dh_message()
    a.receive_dh(dh_b)
    b.receive_dh(dh_a)
    a.public_vector()
    b.public_vector()
    with pytest.raises(MalformedFrame):
        a.finalize(dh_a)
    with pytest.raises(MalformedFrame):
        a.finalize(PublicVectorMessage(config.field, (1, 2)))


def test_session_parameter_validation():
    config = _setup(n=3)
    with pytest.raises(ParameterError):
        SyncSession(config=config, dh_exponent=0, mix_exponents=(1, 2))
    with pytest.raises(ParameterError):
        SyncSession(config=config, dh_exponent=257, mix_exponents=(1, 2))
    with pytest.raises(ParameterError):
        SyncSession(config=config, dh_exponent=3, mix_exponents=(1,))
    with pytest.raises(ParameterError):
        SyncSession(config=config, dh_exponent=3, mix_exponents=(1, 257))
    with pytest.raises(ParameterError):
        SyncConfig(weights=config.weights, q=config.q, u=0)
    with pytest.raises(ParameterError):
        SyncConfig(weights=config.weights, q=config.q[:2])


# --- wire frames ----------------------------------------------------------------


def test_wire_roundtrip_both_kinds():
    config = _setup(n=4)
    field = config.field
    dh = DhMatrixMessage(mat_pow(config.weights.w, 5))
    assert wire_decode(wire_encode(dh), field) == dh
    pv = PublicVectorMessage(field, (0, 1, 255, 256))
    assert wire_decode(wire_encode(pv), field) == pv
    blob = wire_encode(dh) + wire_encode(pv)
    first, off = read_frame(blob, field, 0)
    second, end = read_frame(blob, field, off)
    assert (first, second) == (dh, pv)
    assert end == len(blob)


def test_wire_rejects_unknown_tag(f257):
    with pytest.raises(UnknownTag):
        wire_decode(b"\x7f\x04\x00\x00\x00abcd", f257)


def test_wire_rejects_oversized_declared_length(f257):
    header = struct.pack("<BI", 0x01, MAX_PAYLOAD + 1)
    with pytest.raises(LengthOverflow):
        wire_decode(header, f257)


def test_wire_rejects_truncation_and_trailing(f257):
    good = wire_encode(PublicVectorMessage(f257, (1, 2, 3)))
    with pytest.raises(MalformedFrame):
        wire_decode(good[:3], f257)  # header cut short
    with pytest.raises(MalformedFrame):
        wire_decode(good[:-1], f257)  # payload cut short
    with pytest.raises(MalformedFrame):
        wire_decode(good + b"!", f257)


def test_wire_rejects_bad_payload(f257):
    good = bytearray(wire_encode(PublicVectorMessage(f257, (1, 2, 3))))
    struct.pack_into("<H", good, len(good) - 2, 500)  # 500 >= 257
    with pytest.raises(MalformedFrame):
        wire_decode(bytes(good), f257)


def test_socket_loopback_run():
    config = _setup(n=4)
    a = SyncSession.create(config, random.Random(40))
    b = SyncSession.create(config, random.Random(41))
    left, right = socket.socketpair()
    result = {}

    def peer():
        result["b"] = run_over_socket(b, right)

    t = threading.Thread(target=peer)
    t.start()
    try:
        theta_a = run_over_socket(a, left)
    finally:
        t.join(timeout=10)
        left.close()
        right.close()
    assert not t.is_alive()
    assert theta_a == result["b"]


def test_recv_frame_on_closed_socket(f257):
    left, right = socket.socketpair()
    left.close()
    try:
        with pytest.raises(MalformedFrame):
            recv_frame(right, f257)
    finally:
        right.close()


# --- theta and shared-setup files -------------------------------------------------


def test_theta_file_roundtrip(f257):
    theta = (0, 5, 200, 256)
    blob = encode_theta(f257, theta)
    assert blob.startswith(b"NNSIGTH1")
    assert decode_theta(f257, blob) == theta
    with pytest.raises(MalformedEncoding):
        decode_theta(f257, b"NNSIGTX1" + blob[8:])
    with pytest.raises(MalformedEncoding):
        decode_theta(f257, blob + b"\x00")
    with pytest.raises(MalformedEncoding):
        decode_theta(f257, blob[:-1])


def test_shared_setup_roundtrip():
    config = _setup(n=5)
    blob = encode_shared_setup(config.weights, config.q)
    weights, q = decode_shared_setup(blob)
    assert weights == SynapticWeights(w=config.weights.w)
    assert q == config.q


def test_shared_setup_rejects_corruption(f257):
    config = _setup(n=3)
    blob = encode_shared_setup(config.weights, config.q)
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(b"NNSIGXX1" + blob[8:])
    bad_version = bytearray(blob)
    bad_version[8] = 7
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(bytes(bad_version))
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(blob[:-1])
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(blob + b"\x00")
    composite = bytearray(blob)
    struct.pack_into("<Q", composite, 9, 256)
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(bytes(composite))
    wrong_n = bytearray(blob)
    struct.pack_into("<I", wrong_n, 17, 4)
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(bytes(wrong_n))


def test_shared_setup_rejects_non_sign_entries_and_singular():
    f257 = Field(257)
    # Constructor performs no validation, so these encode fine; the decoder
    # is the gate.
    skewed = SynapticWeights(w=from_rows(f257, [[1, 2], [1, 256]]))
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(encode_shared_setup(skewed, (1, 2)))
    singular = SynapticWeights(w=from_rows(f257, [[1, 1], [1, 1]]))
    with pytest.raises(MalformedEncoding):
        decode_shared_setup(encode_shared_setup(singular, (1, 2)))

"""nnsig: signature scheme over Z_p built from an unrolled binary-weight
recurrent network, plus the bias-synchronization protocol, hardness
estimators, and measurement helpers."""

from .errors import (
    DimensionMismatch,
    InvalidStateError,
    LengthOverflow,
    LimitExceeded,
    MalformedEncoding,
    MalformedFrame,
    NnsigError,
    ParameterError,
    SingularMatrixError,
    SingularWeightsError,
    UnknownTag,
    UnsupportedVersion,
)
from .field import Field, OpCounter, count_ops, is_prime
from .matrix import MatrixZp, PermutationMatrix
from .network import (
    AttentionSchedule,
    NetworkConfig,
    SynapticWeights,
    UnrolledMaps,
    binarize,
    build_network,
    evolve_iterative,
    forward,
    generate_attention,
    invert,
    unroll,
)
from .hardness import (
    MatrixPowerInstance,
    MatrixPowerSolution,
    SecurityEstimate,
    brute_force_solve,
    classical_security_bits,
    classical_security_ok,
    estimate,
    keyspace_bits,
    make_instance,
    quantum_security_ok,
)
from .scheme import (
    PublicKey,
    SecretKey,
    Signature,
    derive_keypair,
    hash_to_field,
    keygen,
    parse_public_key,
    parse_secret_key,
    parse_signature,
    serialize_public_key,
    serialize_secret_key,
    serialize_signature,
    sign,
    verify,
)
from .sync import SyncConfig, SyncSession, run_over_socket, run_pair, wire_decode, wire_encode
from .metrics import formula_sizes, instrumented_counts, measured_sizes, op_count_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

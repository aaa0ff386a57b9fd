from .base import (
    REPLY_BIT,
    ControlOp,
    RemoteError,
    ReplyFuture,
    SimClock,
    TrafficStats,
    TransportConfig,
    TransportError,
    TransportTimeout,
    control,
    error_reply,
    gather,
)
from .codec import (
    EncodedInstanceSpace,
    Scheme,
    decode_instance_space,
    encode_instance_space,
    pack_instance_space,
    unpack_instance_space,
)
from .framing import Envelope, FramingError, MsgType, frame, unframe
from .loopback import LoopbackEndpoint, LoopbackNetwork
from .tcp import SocketEndpoint

__all__ = [
    "REPLY_BIT",
    "ControlOp",
    "EncodedInstanceSpace",
    "Envelope",
    "FramingError",
    "LoopbackEndpoint",
    "LoopbackNetwork",
    "MsgType",
    "RemoteError",
    "ReplyFuture",
    "Scheme",
    "SimClock",
    "SocketEndpoint",
    "TrafficStats",
    "TransportConfig",
    "TransportError",
    "TransportTimeout",
    "control",
    "decode_instance_space",
    "encode_instance_space",
    "error_reply",
    "frame",
    "gather",
    "pack_instance_space",
    "unframe",
    "unpack_instance_space",
]

from .active import ActiveParty, CryptoConfig, NoResolvableTrees
from .messages import FlipPolicy
from .passive import NodeRecord, PassiveParty, ProtocolError
from .session import FederatedSession, init_session, reveal_model

__all__ = [
    "ActiveParty",
    "CryptoConfig",
    "FederatedSession",
    "FlipPolicy",
    "NoResolvableTrees",
    "NodeRecord",
    "PassiveParty",
    "ProtocolError",
    "init_session",
    "reveal_model",
]

"""Session protocol: newline-delimited message schema, the session engine
that owns all mutable trial state, and stream/socket transports."""

from .messages import (  # noqa: F401
    KINDS,
    Message,
    ProtocolParseError,
    SCHEMA_VERSION,
    decode_line,
    encode_message,
)
from .session import SessionConfig, SessionEngine, replay_command_lines  # noqa: F401

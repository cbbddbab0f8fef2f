"""Stream transports around the session engine.

A SessionHost serializes access to one engine and enforces the
single-operator rule across transports (raw TCP and the browser socket
bridge share the slot). The TCP server speaks the newline protocol
directly; disconnects pause the session, and a reconnect resumes it with a
full snapshot pushed by the client's next hello.
"""

from __future__ import annotations

import asyncio
import itertools
from pathlib import Path

from .messages import Message, encode_message
from .session import SessionEngine


class SessionHost:
    """Lock-guarded engine shared by all transports; one operator at a time."""

    def __init__(self, engine: SessionEngine):
        self.engine = engine
        self.lock = asyncio.Lock()
        self._operator: int | None = None
        self._tokens = itertools.count(1)

    def try_acquire_operator(self) -> int | None:
        if self._operator is not None:
            return None
        token = next(self._tokens)
        self._operator = token
        self.engine.reset_inbound_seq()
        return token

    def release_operator(self, token: int) -> None:
        if self._operator == token:
            self._operator = None

    async def handle_line(self, line: str) -> list[str]:
        async with self.lock:
            return self.engine.handle_line(line)

    def refusal_line(self) -> str:
        # Out-of-band refusal: not part of the session transcript.
        return encode_message(Message(0, "error", {
            "message": "session already has an operator"}))

    def write_transcript(self, path: str | Path) -> None:
        Path(path).write_text(self.engine.transcript_text())


class TcpSessionServer:
    """Newline-protocol TCP endpoint for one session host."""

    def __init__(self, host_obj: SessionHost, host: str = "127.0.0.1",
                 port: int = 7410):
        self.session = host_obj
        self.host = host
        self.port = port
        self._server: asyncio.AbstractServer | None = None

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host,
                                                  self.port)

    @property
    def bound_port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def _handle(self, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
        token = self.session.try_acquire_operator()
        if token is None:
            writer.write((self.session.refusal_line() + "\n").encode())
            await writer.drain()
            writer.close()
            return
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break  # disconnect: session pauses, state retained
                line = raw.decode().strip()
                if not line:
                    continue
                for out in await self.session.handle_line(line):
                    writer.write((out + "\n").encode())
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self.session.release_operator(token)
            writer.close()


class OperatorClient:
    """Minimal scripted TCP operator used by the CLI replay and tests."""

    def __init__(self, host: str = "127.0.0.1", port: int = 7410):
        self.host = host
        self.port = port
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None
        self.received: list[str] = []

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(self.host,
                                                                 self.port)

    async def close(self) -> None:
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except ConnectionResetError:
                pass

    async def send_line(self, line: str) -> None:
        self.writer.write((line.strip() + "\n").encode())
        await self.writer.drain()

    async def read_line(self, timeout: float = 5.0) -> str:
        raw = await asyncio.wait_for(self.reader.readline(), timeout)
        if not raw:
            raise ConnectionError("server closed the connection")
        line = raw.decode().strip()
        self.received.append(line)
        return line

    async def read_until_ref(self, ref_seq: int, timeout: float = 30.0) -> None:
        """Drain responses until the ack/error for ``ref_seq`` arrives."""
        import json
        while True:
            line = await self.read_line(timeout)
            doc = json.loads(line)
            if doc["kind"] in ("ack", "error") and \
                    doc["payload"].get("ref_seq") == ref_seq:
                return

    async def replay(self, lines: list[str]) -> list[str]:
        """Send a recorded command log and collect the full response stream."""
        import json
        last_cmd_seq = None
        for line in lines:
            doc = json.loads(line)
            if doc["kind"] in ("command", "marker_move"):
                last_cmd_seq = doc["seq"]
        for line in lines:
            await self.send_line(line)
        if last_cmd_seq is not None:
            await self.read_until_ref(last_cmd_seq)
        # Drain whatever follows the final ack (status, results).
        while True:
            try:
                await self.read_line(timeout=0.2)
            except (asyncio.TimeoutError, ConnectionError):
                break
        return self.received

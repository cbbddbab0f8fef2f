import asyncio
import json

import numpy as np
import pytest

from deskpick.harness import SemiAutoPolicy, drive_session, run_trial
from deskpick.protocol.messages import (
    KINDS,
    Message,
    ProtocolParseError,
    decode_line,
    encode_message,
)
from deskpick.protocol.server import OperatorClient, SessionHost, TcpSessionServer
from deskpick.protocol.session import SessionConfig, SessionEngine, replay_command_lines


REPRESENTATIVE = [
    Message(1, "hello", {"role": "operator"}),
    Message(2, "scene_snapshot", {"clock": 0.0, "scene": {"objects": []}}),
    Message(3, "menu_update", {"items": [], "highlighted": 0, "clock": 1.5}),
    Message(4, "phase_update", {"phase": "object_menu", "clock": 1.5}),
    Message(5, "command", {"name": "select"}),
    Message(6, "marker_move", {"du": -3.5, "dv": 12.0}),
    Message(7, "robot_status", {"executing": "pick", "waypoint": 3,
                                "total": 10, "clock": 4.0}),
    Message(8, "trial_result", {"picked": True, "placed": True,
                                "n_commands": 2}),
    Message(9, "error", {"message": "boom", "ref_seq": 5}),
    Message(10, "ack", {"ref_seq": 5, "clock": 2.0}),
]


class TestMessages:
    def test_round_trip_every_kind(self):
        seen = set()
        for msg in REPRESENTATIVE:
            back = decode_line(encode_message(msg))
            assert back == msg
            seen.add(msg.kind)
        assert seen == set(KINDS)

    def test_unknown_kind_rejected(self):
        line = '{"v":1,"seq":1,"kind":"frobnicate","payload":{}}'
        with pytest.raises(ProtocolParseError):
            decode_line(line)

    def test_bad_json_keeps_line(self):
        with pytest.raises(ProtocolParseError) as err:
            decode_line("not json at all")
        assert err.value.line == "not json at all"

    def test_wrong_version_rejected(self):
        with pytest.raises(ProtocolParseError):
            decode_line('{"v":99,"seq":1,"kind":"hello","payload":{}}')

    def test_fuzz_never_crashes(self):
        rng = np.random.default_rng(0)
        kinds = list(KINDS) + ["bogus", "", None]
        alphabet = list('{}[]",:letters0123456789 \\')
        ok = 0
        for _ in range(10_000):
            choice = rng.integers(3)
            if choice == 0:
                line = "".join(rng.choice(alphabet)
                               for _ in range(int(rng.integers(0, 60))))
            elif choice == 1:
                doc = {"v": int(rng.integers(0, 3)),
                       "seq": int(rng.integers(-2, 5)),
                       "kind": kinds[int(rng.integers(len(kinds)))],
                       "payload": {} if rng.integers(2) else []}
                line = json.dumps(doc)
            else:
                base = encode_message(REPRESENTATIVE[int(rng.integers(10))])
                cut = int(rng.integers(len(base)))
                line = base[:cut] + base[cut + 1:]
            try:
                decode_line(line)
                ok += 1
            except ProtocolParseError:
                pass
        assert ok > 0  # some fuzzed lines are legitimately valid


def small_config(**overrides) -> SessionConfig:
    defaults = dict(mode="semiauto", scene_seed=5, classes=("ball",),
                    target=(0.1, 0.1))
    defaults.update(overrides)
    return SessionConfig(**defaults)


class TestEngine:
    def test_hello_produces_snapshot(self):
        engine = SessionEngine(small_config())
        out = engine.handle_message(Message(1, "hello", {"role": "operator"}))
        kinds = [json.loads(l)["kind"] for l in out]
        assert kinds == ["hello", "scene_snapshot", "menu_update", "phase_update"]
        snapshot = json.loads(out[1])["payload"]
        assert snapshot["scene"]["rng_seed"] == 5
        assert [o["class_label"] for o in snapshot["scene"]["objects"]] == ["ball"]

    def test_seq_regression_rejected(self):
        engine = SessionEngine(small_config())
        engine.handle_message(Message(5, "hello", {"role": "operator"}))
        out = engine.handle_message(Message(5, "command", {"name": "right"}))
        assert json.loads(out[0])["kind"] == "error"

    def test_every_command_acked(self):
        engine = SessionEngine(small_config())
        engine.handle_message(Message(1, "hello", {"role": "operator"}))
        for seq, name in ((2, "right"), (3, "left"), (4, "select")):
            out = engine.handle_message(Message(seq, "command", {"name": name}))
            acks = [json.loads(l) for l in out
                    if json.loads(l)["kind"] in ("ack", "error")]
            assert len(acks) == 1
            assert acks[0]["payload"]["ref_seq"] == seq

    def test_parse_error_keeps_session_alive(self):
        engine = SessionEngine(small_config())
        engine.handle_message(Message(1, "hello", {"role": "operator"}))
        out = engine.handle_line("garbage {{{")
        assert json.loads(out[0])["kind"] == "error"
        out = engine.handle_message(Message(2, "command", {"name": "right"}))
        assert json.loads(out[0])["kind"] == "ack"

    def test_clock_advances_only_with_activity(self):
        engine = SessionEngine(small_config())
        engine.handle_message(Message(1, "hello", {"role": "operator"}))
        assert engine.clock == 0.0
        engine.handle_message(Message(2, "command", {"name": "right"}))
        assert engine.clock == engine.cfg.experiment.command_latency

    def test_full_trial_over_messages(self):
        engine = SessionEngine(small_config())
        policy = SemiAutoPolicy()
        drive_session(engine, policy)
        assert engine.trial_done
        assert engine.picked and engine.placed
        assert engine.counted_commands() == 2


class TestReplayEquivalence:
    def test_in_process_replay_byte_identical(self):
        record, engine, log = run_trial("tape", "semiauto", 99)
        assert record.placed
        cfg = SessionConfig(mode="semiauto", scene=engine.cfg.scene,
                            noise=engine.cfg.noise, target=engine.cfg.target,
                            camera=engine.cfg.camera, arm=engine.cfg.arm,
                            experiment=engine.cfg.experiment)
        transcript = replay_command_lines(cfg, log)
        assert transcript == engine.transcript_text()


async def _start_server(engine):
    host = SessionHost(engine)
    server = TcpSessionServer(host, port=0)
    await server.start()
    return host, server


class TestTcpServer:
    def test_handshake_and_snapshot(self):
        async def run():
            engine = SessionEngine(small_config())
            host, server = await _start_server(engine)
            client = OperatorClient(port=server.bound_port)
            await client.connect()
            await client.send_line(encode_message(
                Message(1, "hello", {"role": "operator"})))
            lines = [await client.read_line() for _ in range(4)]
            kinds = [json.loads(l)["kind"] for l in lines]
            assert kinds == ["hello", "scene_snapshot", "menu_update",
                             "phase_update"]
            assert json.loads(lines[0])["seq"] == 1
            await client.close()
            await server.stop()
        asyncio.run(run())

    def test_second_operator_refused(self):
        async def run():
            engine = SessionEngine(small_config())
            host, server = await _start_server(engine)
            a = OperatorClient(port=server.bound_port)
            await a.connect()
            await a.send_line(encode_message(Message(1, "hello", {})))
            await a.read_line()
            b = OperatorClient(port=server.bound_port)
            await b.connect()
            line = await b.read_line()
            doc = json.loads(line)
            assert doc["kind"] == "error"
            assert "operator" in doc["payload"]["message"]
            await a.close()
            await b.close()
            await server.stop()
        asyncio.run(run())

    def test_over_wire_equals_in_process(self):
        record, ref_engine, log = run_trial("bowl", "semiauto", 1234)
        assert record.placed

        async def run():
            cfg = SessionConfig(mode="semiauto", scene=ref_engine.cfg.scene,
                                noise=ref_engine.cfg.noise,
                                target=ref_engine.cfg.target,
                                camera=ref_engine.cfg.camera,
                                arm=ref_engine.cfg.arm,
                                experiment=ref_engine.cfg.experiment)
            engine = SessionEngine(cfg)
            host, server = await _start_server(engine)
            client = OperatorClient(port=server.bound_port)
            await client.connect()
            received = await client.replay(log)
            await client.close()
            await server.stop()
            return engine.transcript_text(), received

        transcript, received = asyncio.run(run())
        assert transcript == ref_engine.transcript_text()
        # The operator saw exactly the server-side outbound stream.
        expected_out = [l[2:] for l in ref_engine.transcript
                        if l.startswith("S ")]
        assert received == expected_out

    def test_disconnect_resume_with_snapshot(self):
        async def run():
            engine = SessionEngine(small_config())
            host, server = await _start_server(engine)
            a = OperatorClient(port=server.bound_port)
            await a.connect()
            await a.send_line(encode_message(Message(1, "hello", {})))
            for _ in range(4):
                await a.read_line()
            await a.send_line(encode_message(
                Message(2, "command", {"name": "select"})))
            await a.read_until_ref(2)
            clock_before = engine.clock
            await a.close()
            await asyncio.sleep(0.05)
            # Session persists; a reconnect resumes with a full snapshot.
            b = OperatorClient(port=server.bound_port)
            await b.connect()
            await b.send_line(encode_message(Message(1, "hello", {"resume": True})))
            lines = [await b.read_line() for _ in range(4)]
            kinds = [json.loads(l)["kind"] for l in lines]
            assert kinds == ["hello", "scene_snapshot", "menu_update",
                             "phase_update"]
            phase = json.loads(lines[3])["payload"]["phase"]
            assert phase == "action_menu"  # state survived the drop
            assert engine.clock == clock_before
            await b.close()
            await server.stop()
        asyncio.run(run())

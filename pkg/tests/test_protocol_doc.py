"""The protocol document's fixture lines are bit-exact: they decode and
re-encode without change."""

import json
from pathlib import Path

from deskpick.protocol.messages import decode_line, encode_message

DOC = Path(__file__).resolve().parent.parent / "docs" / "protocol.md"


def fixture_lines():
    text = DOC.read_text()
    block = text.split("```fixture\n", 1)[1].split("```", 1)[0]
    return [l for l in block.splitlines() if l.strip()]


def test_doc_has_one_fixture_per_kind():
    kinds = [json.loads(l)["kind"] for l in fixture_lines()]
    assert sorted(kinds) == sorted({
        "hello", "scene_snapshot", "menu_update", "phase_update", "command",
        "marker_move", "robot_status", "trial_result", "error", "ack"})


def test_fixture_lines_bit_exact():
    for line in fixture_lines():
        msg = decode_line(line)
        assert encode_message(msg) == line

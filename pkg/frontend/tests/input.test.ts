import { describe, expect, it } from "vitest";

import { InputGate } from "../src/input.js";
import type { Message } from "../src/protocol.js";

function ack(refSeq: number): Message {
  return { v: 1, seq: 99, kind: "ack", payload: { ref_seq: refSeq } };
}

describe("key mapping", () => {
  it("maps the four keys in menu phases", () => {
    const gate = new InputGate();
    expect(gate.mapKey("ArrowLeft", "object_menu")).toEqual(
      { kind: "command", payload: { name: "left" } });
    expect(gate.mapKey("ArrowRight", "object_menu")).toEqual(
      { kind: "command", payload: { name: "right" } });
    expect(gate.mapKey("Enter", "action_menu")).toEqual(
      { kind: "command", payload: { name: "select" } });
    expect(gate.mapKey("Backspace", "object_menu")).toEqual(
      { kind: "command", payload: { name: "back" } });
  });

  it("arrows become marker moves only while place pointing", () => {
    const gate = new InputGate();
    expect(gate.mapKey("ArrowLeft", "place_pointing")).toEqual(
      { kind: "marker_move", payload: { du: -10, dv: 0 } });
    expect(gate.mapKey("ArrowDown", "place_pointing")).toEqual(
      { kind: "marker_move", payload: { du: 0, dv: 10 } });
    // No marker moves from menu phases; suppressed client-side.
    expect(gate.mapPointerDrag(5, 5, "object_menu")).toBeNull();
    expect(gate.mapPointerDrag(5, 5, "place_pointing")).toEqual(
      { kind: "marker_move", payload: { du: 5, dv: 5 } });
  });

  it("suppresses inputs in robot-busy phases", () => {
    const gate = new InputGate();
    expect(gate.mapKey("Enter", "picking")).toBeNull();
    expect(gate.mapKey("ArrowLeft", "placing")).toBeNull();
    expect(gate.mapKey("Enter", "done")).toBeNull();
  });

  it("ignores unbound keys", () => {
    const gate = new InputGate();
    expect(gate.mapKey("q", "object_menu")).toBeNull();
  });
});

describe("ack gating", () => {
  it("allows one in-flight message until the ack arrives", () => {
    const gate = new InputGate();
    const first = gate.take({ kind: "command", payload: { name: "select" } });
    expect(first).not.toBeNull();
    expect(gate.inFlight).toBe(true);
    // Second SELECT blocked while the first is unacknowledged.
    expect(gate.take({ kind: "command", payload: { name: "select" } })).toBeNull();
    gate.onInbound(ack(first!.seq));
    expect(gate.inFlight).toBe(false);
    const second = gate.take({ kind: "command", payload: { name: "select" } });
    expect(second).not.toBeNull();
    expect(second!.seq).toBe(first!.seq + 1);
  });

  it("errors release the gate too", () => {
    const gate = new InputGate();
    const msg = gate.take({ kind: "command", payload: { name: "left" } })!;
    gate.onInbound({ v: 1, seq: 1, kind: "error",
                     payload: { message: "x", ref_seq: msg.seq } });
    expect(gate.inFlight).toBe(false);
  });

  it("unrelated acks do not release the gate", () => {
    const gate = new InputGate();
    const msg = gate.take({ kind: "command", payload: { name: "left" } })!;
    gate.onInbound(ack(msg.seq + 5));
    expect(gate.inFlight).toBe(true);
  });

  it("resets sequencing per connection", () => {
    const gate = new InputGate();
    gate.helloMessage(false);
    const a = gate.take({ kind: "command", payload: { name: "left" } })!;
    expect(a.seq).toBe(2);
    gate.resetForConnection();
    const hello = gate.helloMessage(true);
    expect(hello.seq).toBe(1);
    expect(hello.payload["resume"]).toBe(true);
  });
});

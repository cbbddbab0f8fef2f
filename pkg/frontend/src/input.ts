// Keyboard-to-command mapping with ack gating: at most one in-flight
// message, and SELECT stays disabled until the previous send is
// acknowledged. Arrow keys navigate menus; in the place-pointing phase
// they nudge the marker instead (marker moves only exist there).

import { Kind, Message, SCHEMA_VERSION } from "./protocol.js";

export interface KeyBindings {
  left: string;
  right: string;
  select: string;
  back: string;
  markerStepPx: number;
}

export const DEFAULT_BINDINGS: KeyBindings = {
  left: "ArrowLeft",
  right: "ArrowRight",
  select: "Enter",
  back: "Backspace",
  markerStepPx: 10,
};

export interface OutboundMessage {
  kind: Kind;
  payload: Record<string, unknown>;
}

const MENU_PHASES = new Set(["object_menu", "action_menu", "idle"]);

export class InputGate {
  private seq = 0;
  private pending: number | null = null;

  constructor(readonly bindings: KeyBindings = DEFAULT_BINDINGS) {}

  get inFlight(): boolean {
    return this.pending !== null;
  }

  /** Sequence the next outbound message; null while another is in flight. */
  take(out: OutboundMessage): Message | null {
    if (this.pending !== null) return null;
    this.seq += 1;
    this.pending = this.seq;
    return { v: SCHEMA_VERSION, seq: this.seq, kind: out.kind, payload: out.payload };
  }

  /** Feed every inbound message; acks/errors for the pending seq release it. */
  onInbound(msg: Message): void {
    if (msg.kind !== "ack" && msg.kind !== "error") return;
    const ref = msg.payload["ref_seq"];
    if (typeof ref === "number" && ref === this.pending) {
      this.pending = null;
    }
  }

  /** Sends restart from seq 1 on a fresh connection. */
  resetForConnection(): void {
    this.seq = 0;
    this.pending = null;
  }

  /**
   * Map a key press to an outbound message for the current phase; null when
   * the key is unbound or suppressed client-side (the server stays
   * authoritative either way).
   */
  mapKey(key: string, phase: string): OutboundMessage | null {
    const b = this.bindings;
    if (phase === "place_pointing") {
      const step = b.markerStepPx;
      switch (key) {
        case "ArrowLeft":
          return { kind: "marker_move", payload: { du: -step, dv: 0 } };
        case "ArrowRight":
          return { kind: "marker_move", payload: { du: step, dv: 0 } };
        case "ArrowUp":
          return { kind: "marker_move", payload: { du: 0, dv: -step } };
        case "ArrowDown":
          return { kind: "marker_move", payload: { du: 0, dv: step } };
      }
      if (key === b.select) return { kind: "command", payload: { name: "select" } };
      if (key === b.back) return { kind: "command", payload: { name: "back" } };
      return null;
    }
    if (MENU_PHASES.has(phase)) {
      if (key === b.left) return { kind: "command", payload: { name: "left" } };
      if (key === b.right) return { kind: "command", payload: { name: "right" } };
      if (key === b.select) return { kind: "command", payload: { name: "select" } };
      if (key === b.back) return { kind: "command", payload: { name: "back" } };
      return null;
    }
    // Picking / placing / done / failed: nothing to steer.
    return null;
  }

  /** Pointer drags translate directly into marker nudges while pointing. */
  mapPointerDrag(du: number, dv: number, phase: string): OutboundMessage | null {
    if (phase !== "place_pointing") return null;
    if (du === 0 && dv === 0) return null;
    return { kind: "marker_move", payload: { du, dv } };
  }

  helloMessage(resume: boolean): Message {
    this.seq += 1;
    return {
      v: SCHEMA_VERSION,
      seq: this.seq,
      kind: "hello",
      payload: { role: "operator", resume },
    };
  }
}

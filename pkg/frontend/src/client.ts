// WebSocket wiring: connect to the session bridge, pump inbound lines into
// the view-model reducer and the input gate, reconnect with backoff, and
// re-hello (resume) so the server pushes a full snapshot.

import { InputGate } from "./input.js";
import { Message, decodeLine, encodeMessage } from "./protocol.js";
import {
  ViewModel,
  applyMessage,
  initialViewModel,
  setConnection,
} from "./viewModel.js";

export interface ConsoleClientOptions {
  url: string;
  reconnectDelayMs?: number;
  socketFactory?: (url: string) => WebSocket;
}

export class ConsoleClient {
  vm: ViewModel = initialViewModel();
  readonly gate = new InputGate();
  private ws: WebSocket | null = null;
  private closed = false;
  private everConnected = false;
  private listeners: ((vm: ViewModel) => void)[] = [];

  constructor(private readonly opts: ConsoleClientOptions) {}

  onChange(listener: (vm: ViewModel) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const l of this.listeners) l(this.vm);
  }

  connect(): void {
    const factory = this.opts.socketFactory ?? ((url: string) => new WebSocket(url));
    this.vm = setConnection(this.vm, "connecting");
    this.notify();
    const ws = factory(this.opts.url);
    this.ws = ws;
    ws.onopen = () => {
      this.vm = setConnection(this.vm, "connected");
      this.gate.resetForConnection();
      this.sendRaw(this.gate.helloMessage(this.everConnected));
      this.everConnected = true;
      this.notify();
    };
    ws.onmessage = (event: MessageEvent) => {
      const msg = decodeLine(String(event.data));
      this.gate.onInbound(msg);
      this.vm = applyMessage(this.vm, msg);
      this.notify();
    };
    ws.onclose = () => {
      this.vm = setConnection(this.vm, "disconnected");
      this.notify();
      if (!this.closed) {
        setTimeout(() => this.connect(), this.opts.reconnectDelayMs ?? 1000);
      }
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private sendRaw(msg: Message): void {
    this.ws?.send(encodeMessage(msg));
  }

  /** Route a key press through the gate; ignored while disconnected. */
  handleKey(key: string): boolean {
    if (this.vm.connection !== "connected") return false;
    const phase = this.vm.phase?.phase ?? "idle";
    const out = this.gate.mapKey(key, phase);
    if (!out) return false;
    const msg = this.gate.take(out);
    if (!msg) return false; // previous send not acknowledged yet
    this.sendRaw(msg);
    return true;
  }

  handlePointerDrag(du: number, dv: number): boolean {
    if (this.vm.connection !== "connected") return false;
    const phase = this.vm.phase?.phase ?? "idle";
    const out = this.gate.mapPointerDrag(du, dv, phase);
    if (!out) return false;
    const msg = this.gate.take(out);
    if (!msg) return false;
    this.sendRaw(msg);
    return true;
  }
}

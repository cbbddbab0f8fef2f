// Browser entry point: canvas, keyboard, pointer, and the socket client.

import { ConsoleClient } from "./client.js";
import { Canvas2D, defaultLayout, render } from "./render.js";

function wsUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("ws");
  if (override) return override;
  const proto = window.location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${window.location.host}/session/ws`;
}

function boot(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const layout = defaultLayout(canvas.width, canvas.height);
  const ctx = canvas.getContext("2d") as unknown as Canvas2D;
  const client = new ConsoleClient({ url: wsUrl() });

  const redraw = () => render(ctx, client.vm, layout);
  client.onChange(redraw);

  window.addEventListener("keydown", (event) => {
    if (client.handleKey(event.key)) event.preventDefault();
  });

  let dragging = false;
  let last: [number, number] | null = null;
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    last = [e.clientX, e.clientY];
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
    last = null;
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging || !last) return;
    const du = e.clientX - last[0];
    const dv = e.clientY - last[1];
    if (client.handlePointerDrag(du, dv)) last = [e.clientX, e.clientY];
  });

  client.connect();
  redraw();
}

boot();

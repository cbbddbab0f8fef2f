// Top-down 2D canvas rendering: all decision-relevant geometry (object
// footprints, marker, target, gripper) lives in the table plane. Accepts a
// minimal drawing interface so tests can record draw calls headlessly.

import { SceneSnapshot, quatRotate, yawOfQuat } from "./protocol.js";
import { ViewModel, currentPhase } from "./viewModel.js";

export interface Canvas2D {
  canvas?: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textBaseline: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

export interface Layout {
  width: number;
  height: number;
  sceneRect: { x: number; y: number; w: number; h: number };
  menuRect: { x: number; y: number; w: number; h: number };
}

export function defaultLayout(width = 960, height = 540): Layout {
  const margin = 16;
  const sceneW = Math.round(width * 0.62);
  return {
    width,
    height,
    sceneRect: { x: margin, y: margin, w: sceneW - 2 * margin, h: height - 2 * margin },
    menuRect: {
      x: sceneW + margin,
      y: margin,
      w: width - sceneW - 2 * margin,
      h: height - 2 * margin,
    },
  };
}

interface Mapper {
  toScreen(x: number, y: number): [number, number];
  scale: number;
}

function tableMapper(snapshot: SceneSnapshot, rect: Layout["sceneRect"]): Mapper {
  const [minX, minY, maxX, maxY] = snapshot.scene.table_extent as [number, number, number, number];
  const pad = 0.05;
  const spanX = maxX - minX + 2 * pad;
  const spanY = maxY - minY + 2 * pad;
  const scale = Math.min(rect.w / spanX, rect.h / spanY);
  const originX = rect.x + rect.w / 2;
  const originY = rect.y + rect.h / 2;
  return {
    scale,
    toScreen(x: number, y: number): [number, number] {
      // Table +x right, +y up (screen y grows downward).
      return [originX + x * scale, originY - y * scale];
    },
  };
}

function drawPolygon(ctx: Canvas2D, pts: [number, number][], fill: string, stroke: string): void {
  if (pts.length === 0) return;
  ctx.beginPath();
  ctx.moveTo(pts[0]![0], pts[0]![1]);
  for (const [x, y] of pts.slice(1)) ctx.lineTo(x, y);
  ctx.closePath();
  ctx.fillStyle = fill;
  ctx.fill();
  ctx.strokeStyle = stroke;
  ctx.stroke();
}

function objectScreenPolys(
  snapshot: SceneSnapshot,
  map: Mapper,
): { id: number; label: string; center: [number, number]; polys: [number, number][][] }[] {
  const out = [];
  for (const obj of snapshot.scene.objects) {
    const pose = obj.pose;
    const yaw = yawOfQuat(pose.quat_wxyz);
    const polys: [number, number][][] = [];
    for (const prim of obj.primitives) {
      const world = (lx: number, ly: number): [number, number] => {
        const r = quatRotate(pose.quat_wxyz, [lx, ly, 0]);
        return map.toScreen(r[0]! + pose.translation[0]!, r[1]! + pose.translation[1]!);
      };
      if (prim.kind === "box") {
        const [w, d] = prim.dims as [number, number];
        const c = Math.cos(prim.yaw);
        const s = Math.sin(prim.yaw);
        const corners: [number, number][] = [];
        for (const [sx, sy] of [[-1, -1], [1, -1], [1, 1], [-1, 1]] as const) {
          const px = (sx * w) / 2;
          const py = (sy * d) / 2;
          corners.push(world(
            prim.offset[0]! + c * px - s * py,
            prim.offset[1]! + s * px + c * py,
          ));
        }
        polys.push(corners);
      } else {
        const r = prim.dims[0]!;
        const circle: [number, number][] = [];
        for (let k = 0; k < 20; k++) {
          const a = (2 * Math.PI * k) / 20;
          circle.push(world(prim.offset[0]! + r * Math.cos(a), prim.offset[1]! + r * Math.sin(a)));
        }
        polys.push(circle);
      }
    }
    void yaw;
    out.push({
      id: obj.id,
      label: obj.class_label,
      center: map.toScreen(pose.translation[0]!, pose.translation[1]!),
      polys,
    });
  }
  return out;
}

export function render(ctx: Canvas2D, vm: ViewModel, layout: Layout = defaultLayout()): void {
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, layout.width, layout.height);
  ctx.font = "13px monospace";
  ctx.textBaseline = "top";

  const { sceneRect, menuRect } = layout;

  if (!vm.snapshot) {
    // Graceful placeholder while no snapshot has arrived.
    ctx.fillStyle = "#9aa4b2";
    ctx.fillText("waiting for scene snapshot...", sceneRect.x + 12, sceneRect.y + 12);
  } else {
    const map = tableMapper(vm.snapshot, sceneRect);
    const [minX, minY, maxX, maxY] = vm.snapshot.scene.table_extent as [number, number, number, number];
    const [tl, br] = [map.toScreen(minX, maxY), map.toScreen(maxX, minY)];
    ctx.fillStyle = "#2b2118";
    ctx.fillRect(tl[0], tl[1], br[0] - tl[0], br[1] - tl[1]);
    const [rMinX, rMinY, rMaxX, rMaxY] = vm.snapshot.scene.reachable_region as [number, number, number, number];
    const [rtl, rbr] = [map.toScreen(rMinX, rMaxY), map.toScreen(rMaxX, rMinY)];
    ctx.strokeStyle = "#4a5a3a";
    ctx.lineWidth = 1;
    ctx.strokeRect(rtl[0], rtl[1], rbr[0] - rtl[0], rbr[1] - rtl[1]);

    if (vm.snapshot.target) {
      const [tx, ty] = map.toScreen(vm.snapshot.target[0], vm.snapshot.target[1]);
      ctx.strokeStyle = "#58a6ff";
      ctx.beginPath();
      ctx.arc(tx, ty, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }

    for (const obj of objectScreenPolys(vm.snapshot, map)) {
      for (const poly of obj.polys) drawPolygon(ctx, poly, "#c7a25233", "#c7a252");
      ctx.fillStyle = "#e6d9b8";
      ctx.fillText(`${obj.label} #${obj.id}`, obj.center[0] + 8, obj.center[1] - 6);
    }

    if (vm.gripperTable) {
      const [gx, gy] = map.toScreen(vm.gripperTable[0]!, vm.gripperTable[1]!);
      ctx.strokeStyle = "#7ee787";
      ctx.beginPath();
      ctx.arc(gx, gy, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }

    // Cross marker overlay while pointing at the placement location.
    if (currentPhase(vm) === "place_pointing" && vm.marker) {
      const [mx, my] = map.toScreen(vm.marker.table_point[0]!, vm.marker.table_point[1]!);
      ctx.strokeStyle = "#ff7b72";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(mx - 10, my);
      ctx.lineTo(mx + 10, my);
      ctx.moveTo(mx, my - 10);
      ctx.lineTo(mx, my + 10);
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }

  // Menu / status panel.
  ctx.strokeStyle = "#30363d";
  ctx.strokeRect(menuRect.x, menuRect.y, menuRect.w, menuRect.h);
  let y = menuRect.y + 10;
  const put = (text: string, color = "#c9d1d9") => {
    ctx.fillStyle = color;
    ctx.fillText(text, menuRect.x + 12, y);
    y += 20;
  };
  put(`clock  ${vm.clock.toFixed(2)} s`);
  put(`phase  ${currentPhase(vm)}`);
  put(`counted commands  ${vm.countedCommands}`);
  y += 8;
  if (vm.menu) {
    vm.menu.items.forEach((item, i) => {
      const highlight = i === vm.menu!.highlighted;
      put(
        `${highlight ? ">" : " "} ${item.label} #${item.object_id} [${item.actions.join(",")}]`,
        highlight ? "#ffd866" : "#c9d1d9",
      );
    });
    if (vm.menu.items.length === 0) put("(no objects detected)", "#8b949e");
  }
  y += 8;
  if (vm.warning) put(`warning: ${vm.warning}`, "#f0883e");
  if (vm.trialResult) {
    const r = vm.trialResult;
    put(`trial: picked=${r.picked} placed=${r.placed} cmds=${r.n_commands}`, "#7ee787");
  }

  // Connection banner: inputs are disabled until the socket is back.
  if (vm.connection !== "connected") {
    ctx.fillStyle = "#da3633cc";
    ctx.fillRect(0, layout.height - 34, layout.width, 34);
    ctx.fillStyle = "#ffffff";
    ctx.fillText(
      vm.connection === "connecting" ? "connecting..." : "disconnected - reconnecting, inputs disabled",
      16,
      layout.height - 26,
    );
  }
}

// Wire schema (version 1): one JSON message per line / WebSocket text frame.
// Mirrors the server's newline protocol; zod guards inbound payloads.

import { z } from "zod";

export const SCHEMA_VERSION = 1;

export type Kind =
  | "hello"
  | "scene_snapshot"
  | "menu_update"
  | "phase_update"
  | "command"
  | "marker_move"
  | "robot_status"
  | "trial_result"
  | "error"
  | "ack";

export interface Message {
  v: number;
  seq: number;
  kind: Kind;
  payload: Record<string, unknown>;
}

const messageSchema = z.object({
  v: z.literal(SCHEMA_VERSION),
  seq: z.number().int().nonnegative(),
  kind: z.enum([
    "hello", "scene_snapshot", "menu_update", "phase_update", "command",
    "marker_move", "robot_status", "trial_result", "error", "ack",
  ]),
  payload: z.record(z.unknown()),
});

export const menuItemSchema = z.object({
  object_id: z.number().int(),
  label: z.string(),
  actions: z.array(z.string()),
});

export const menuUpdateSchema = z.object({
  clock: z.number(),
  items: z.array(menuItemSchema),
  highlighted: z.number().int(),
});

export const markerSchema = z.object({
  pixel: z.tuple([z.number(), z.number()]),
  table_point: z.array(z.number()).length(3),
});

export const phaseUpdateSchema = z.object({
  clock: z.number(),
  phase: z.string(),
  warning: z.string().nullable().optional(),
  marker: markerSchema.nullable().optional(),
  held_object: z.number().nullable().optional(),
  counted_commands: z.number().int(),
});

const primitiveSchema = z.object({
  kind: z.enum(["box", "cylinder", "sphere"]),
  dims: z.array(z.number()),
  offset: z.array(z.number()).length(3),
  yaw: z.number(),
});

export const sceneObjectSchema = z.object({
  id: z.number().int(),
  class_label: z.string(),
  grasp_width: z.number(),
  pose: z.object({
    quat_wxyz: z.array(z.number()).length(4),
    translation: z.array(z.number()).length(3),
  }),
  primitives: z.array(primitiveSchema),
});

export const sceneSnapshotSchema = z.object({
  clock: z.number(),
  mode: z.string(),
  scene: z.object({
    schema_version: z.number(),
    table_extent: z.array(z.number()).length(4),
    reachable_region: z.array(z.number()).length(4),
    objects: z.array(sceneObjectSchema),
  }),
  camera: z.object({
    fx: z.number(),
    fy: z.number(),
    cx: z.number(),
    cy: z.number(),
    width: z.number(),
    height: z.number(),
    pose_quat_wxyz: z.array(z.number()).length(4),
    pose_translation: z.array(z.number()).length(3),
  }),
  target: z.tuple([z.number(), z.number()]).nullable(),
  gripper_table: z.array(z.number()).length(3).optional(),
  gripper_opening: z.number().optional(),
});

export const robotStatusSchema = z.object({
  clock: z.number(),
  executing: z.string(),
  segment: z.number().int(),
  waypoint: z.number().int(),
  total: z.number().int(),
  gripper_table: z.array(z.number()).length(3).optional(),
});

export const ackSchema = z.object({
  ref_seq: z.number().int(),
  clock: z.number().optional(),
  counted: z.number().optional(),
  warning: z.string().nullable().optional(),
  rejected: z.boolean().optional(),
  marker: markerSchema.nullable().optional(),
  gripper_table: z.array(z.number()).length(3).optional(),
  held: z.boolean().optional(),
});

export const trialResultSchema = z.object({
  clock: z.number(),
  picked: z.boolean(),
  placed: z.boolean(),
  pickup_time: z.number(),
  place_time: z.number(),
  n_commands: z.number().int(),
  judge: z.boolean().nullable().optional(),
  final_center: z.array(z.number()).nullable().optional(),
  target: z.array(z.number()).nullable().optional(),
  reason: z.string().nullable().optional(),
});

export type MenuItem = z.infer<typeof menuItemSchema>;
export type MenuUpdate = z.infer<typeof menuUpdateSchema>;
export type PhaseUpdate = z.infer<typeof phaseUpdateSchema>;
export type SceneSnapshot = z.infer<typeof sceneSnapshotSchema>;
export type RobotStatus = z.infer<typeof robotStatusSchema>;
export type Ack = z.infer<typeof ackSchema>;
export type TrialResult = z.infer<typeof trialResultSchema>;
export type Marker = z.infer<typeof markerSchema>;

export function decodeLine(line: string): Message {
  const doc: unknown = JSON.parse(line);
  return messageSchema.parse(doc) as Message;
}

export function encodeMessage(msg: Message): string {
  // Canonical form (sorted keys, compact) matching the server encoder.
  const sort = (value: unknown): unknown => {
    if (Array.isArray(value)) return value.map(sort);
    if (value !== null && typeof value === "object") {
      const entries = Object.entries(value as Record<string, unknown>)
        .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
      return Object.fromEntries(entries.map(([k, v]) => [k, sort(v)]));
    }
    return value;
  };
  return JSON.stringify(sort({ v: msg.v, seq: msg.seq, kind: msg.kind, payload: msg.payload }));
}

// Quaternion [w,x,y,z] rotation; enough camera math to point the marker.
export function quatRotate(q: number[], v: number[]): number[] {
  const [w, x, y, z] = q as [number, number, number, number];
  const [vx, vy, vz] = v as [number, number, number];
  // R(q) v via the expanded rotation matrix.
  return [
    (1 - 2 * (y * y + z * z)) * vx + 2 * (x * y - z * w) * vy + 2 * (x * z + y * w) * vz,
    2 * (x * y + z * w) * vx + (1 - 2 * (x * x + z * z)) * vy + 2 * (y * z - x * w) * vz,
    2 * (x * z - y * w) * vx + 2 * (y * z + x * w) * vy + (1 - 2 * (x * x + y * y)) * vz,
  ];
}

export function yawOfQuat(q: number[]): number {
  const xAxis = quatRotate(q, [1, 0, 0]);
  return Math.atan2(xAxis[1]!, xAxis[0]!);
}

/** Project a table-frame point through the snapshot camera to a pixel. */
export function projectTablePoint(cam: SceneSnapshot["camera"], point: number[]): [number, number] {
  const rotated = quatRotate(cam.pose_quat_wxyz, point);
  const p = [
    rotated[0]! + cam.pose_translation[0]!,
    rotated[1]! + cam.pose_translation[1]!,
    rotated[2]! + cam.pose_translation[2]!,
  ];
  if (p[2]! <= 0) throw new Error("point behind the camera");
  return [cam.fx * p[0]! / p[2]! + cam.cx, cam.fy * p[1]! / p[2]! + cam.cy];
}

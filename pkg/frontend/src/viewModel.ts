// Client-side view state. The server is the single source of truth: this
// reducer only mirrors the last snapshot plus subsequent updates, so a full
// refresh after a reconnect reproduces the identical view.

import {
  Ack,
  Marker,
  MenuUpdate,
  Message,
  PhaseUpdate,
  RobotStatus,
  SceneSnapshot,
  TrialResult,
  ackSchema,
  decodeLine,
  menuUpdateSchema,
  phaseUpdateSchema,
  robotStatusSchema,
  sceneSnapshotSchema,
  trialResultSchema,
} from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface ViewModel {
  connection: ConnectionState;
  serverMode: string | null;
  snapshot: SceneSnapshot | null;
  menu: MenuUpdate | null;
  phase: PhaseUpdate | null;
  marker: Marker | null;
  robot: RobotStatus | null;
  gripperTable: number[] | null;
  clock: number;
  countedCommands: number;
  warning: string | null;
  lastError: string | null;
  trialResult: TrialResult | null;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    serverMode: null,
    snapshot: null,
    menu: null,
    phase: null,
    marker: null,
    robot: null,
    gripperTable: null,
    clock: 0,
    countedCommands: 0,
    warning: null,
    lastError: null,
    trialResult: null,
  };
}

export function applyMessage(vm: ViewModel, msg: Message): ViewModel {
  const next = { ...vm };
  switch (msg.kind) {
    case "hello": {
      next.serverMode = (msg.payload["mode"] as string) ?? null;
      break;
    }
    case "scene_snapshot": {
      const snap = sceneSnapshotSchema.parse(msg.payload);
      next.snapshot = snap;
      next.clock = snap.clock;
      if (snap.gripper_table) next.gripperTable = snap.gripper_table;
      next.trialResult = null;
      break;
    }
    case "menu_update": {
      next.menu = menuUpdateSchema.parse(msg.payload);
      next.clock = next.menu.clock;
      break;
    }
    case "phase_update": {
      const phase = phaseUpdateSchema.parse(msg.payload);
      next.phase = phase;
      next.clock = phase.clock;
      next.marker = phase.marker ?? null;
      next.warning = phase.warning ?? null;
      next.countedCommands = phase.counted_commands;
      break;
    }
    case "robot_status": {
      const status = robotStatusSchema.parse(msg.payload);
      next.robot = status;
      next.clock = status.clock;
      if (status.gripper_table) next.gripperTable = status.gripper_table;
      break;
    }
    case "ack": {
      const ack = ackSchema.parse(msg.payload);
      if (ack.clock !== undefined) next.clock = ack.clock;
      if (ack.counted !== undefined) next.countedCommands = ack.counted;
      if (ack.warning !== undefined) next.warning = ack.warning ?? null;
      if (ack.marker) next.marker = ack.marker;
      if (ack.gripper_table) next.gripperTable = ack.gripper_table;
      break;
    }
    case "trial_result": {
      const result = trialResultSchema.parse(msg.payload);
      next.trialResult = result;
      next.clock = result.clock;
      break;
    }
    case "error": {
      next.lastError = String(msg.payload["message"] ?? "unknown error");
      break;
    }
    default:
      break;
  }
  return next;
}

export function applyLine(vm: ViewModel, line: string): ViewModel {
  return applyMessage(vm, decodeLine(line));
}

export function setConnection(vm: ViewModel, state: ConnectionState): ViewModel {
  return { ...vm, connection: state };
}

export function currentPhase(vm: ViewModel): string {
  return vm.phase?.phase ?? "idle";
}

/** Highlighted menu index as the server last reported it. */
export function highlightedIndex(vm: ViewModel): number {
  return vm.menu?.highlighted ?? 0;
}

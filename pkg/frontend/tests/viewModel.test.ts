import { describe, expect, it } from "vitest";

import {
  applyLine,
  currentPhase,
  highlightedIndex,
  initialViewModel,
  setConnection,
} from "../src/viewModel.js";

const SNAPSHOT_LINE = JSON.stringify({
  v: 1, seq: 1, kind: "scene_snapshot",
  payload: {
    clock: 0, mode: "semiauto",
    scene: {
      schema_version: 1,
      table_extent: [-0.3, -0.2, 0.3, 0.2],
      reachable_region: [-0.24, -0.15, 0.24, 0.15],
      objects: [{
        id: 2, class_label: "ball", grasp_width: 0.059,
        pose: { quat_wxyz: [1, 0, 0, 0], translation: [0.1, 0.05, 0] },
        primitives: [{ kind: "sphere", dims: [0.03], offset: [0, 0, 0.03], yaw: 0 }],
      }],
    },
    camera: {
      fx: 500, fy: 500, cx: 320, cy: 240, width: 640, height: 480,
      pose_quat_wxyz: [0, 1, 0, 0], pose_translation: [0, 0, 1],
    },
    target: [0.1, 0.1],
    gripper_table: [0, 0, 0.25],
    gripper_opening: 0.1,
  },
});

const MENU_LINE = JSON.stringify({
  v: 1, seq: 2, kind: "menu_update",
  payload: {
    clock: 0,
    items: [{ object_id: 2, label: "ball", actions: ["pick"] }],
    highlighted: 0,
  },
});

const PHASE_LINE = JSON.stringify({
  v: 1, seq: 3, kind: "phase_update",
  payload: {
    clock: 0, phase: "object_menu", warning: null, marker: null,
    held_object: null, counted_commands: 0,
  },
});

describe("view model reducer", () => {
  it("builds the full view from a snapshot bundle", () => {
    let vm = initialViewModel();
    vm = applyLine(vm, SNAPSHOT_LINE);
    vm = applyLine(vm, MENU_LINE);
    vm = applyLine(vm, PHASE_LINE);
    expect(vm.snapshot?.scene.objects).toHaveLength(1);
    expect(vm.menu?.items[0]?.label).toBe("ball");
    expect(currentPhase(vm)).toBe("object_menu");
    expect(vm.gripperTable).toEqual([0, 0, 0.25]);
  });

  it("mirrors the server's highlight exactly", () => {
    let vm = initialViewModel();
    vm = applyLine(vm, MENU_LINE);
    expect(highlightedIndex(vm)).toBe(0);
    const moved = JSON.parse(MENU_LINE);
    moved.payload.highlighted = 0;
    moved.payload.items.push({ object_id: 3, label: "tape", actions: ["pick"] });
    moved.payload.highlighted = 1;
    vm = applyLine(vm, JSON.stringify(moved));
    expect(highlightedIndex(vm)).toBe(1);
  });

  it("tracks clock, marker, and counted commands from updates", () => {
    let vm = initialViewModel();
    vm = applyLine(vm, JSON.stringify({
      v: 1, seq: 5, kind: "phase_update",
      payload: {
        clock: 6.5, phase: "place_pointing", warning: null,
        marker: { pixel: [320, 240], table_point: [0, 0.03, 0] },
        held_object: 2, counted_commands: 1,
      },
    }));
    expect(vm.clock).toBe(6.5);
    expect(vm.marker?.pixel).toEqual([320, 240]);
    expect(vm.countedCommands).toBe(1);
    vm = applyLine(vm, JSON.stringify({
      v: 1, seq: 6, kind: "ack",
      payload: {
        ref_seq: 3, clock: 6.55, counted: 1,
        marker: { pixel: [330, 240], table_point: [0.01, 0.03, 0] },
      },
    }));
    expect(vm.clock).toBe(6.55);
    expect(vm.marker?.pixel).toEqual([330, 240]);
  });

  it("records trial results and errors", () => {
    let vm = initialViewModel();
    vm = applyLine(vm, JSON.stringify({
      v: 1, seq: 9, kind: "trial_result",
      payload: {
        clock: 9, picked: true, placed: true, pickup_time: 5,
        place_time: 4, n_commands: 2, judge: true,
      },
    }));
    expect(vm.trialResult?.placed).toBe(true);
    vm = applyLine(vm, JSON.stringify({
      v: 1, seq: 10, kind: "error", payload: { message: "boom" },
    }));
    expect(vm.lastError).toBe("boom");
  });

  it("full refresh reproduces the identical view (server authoritative)", () => {
    // A reconnect replays snapshot + menu + phase; the rebuilt view equals
    // the view that received them live, modulo connection state.
    let live = initialViewModel();
    for (const line of [SNAPSHOT_LINE, MENU_LINE, PHASE_LINE]) {
      live = applyLine(live, line);
    }
    let refreshed = initialViewModel();
    for (const line of [SNAPSHOT_LINE, MENU_LINE, PHASE_LINE]) {
      refreshed = applyLine(refreshed, line);
    }
    expect(setConnection(refreshed, live.connection)).toEqual(live);
  });
});

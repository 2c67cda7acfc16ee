/**
 * Pure view-model: one telemetry frame in, drawable numbers out.
 *
 * The schematic is 2-D: a top-down disc (palm dial plus three finger arcs
 * at 120 degree spacing) and a side strip showing the body flip.  Finger
 * curl is drawn from the same constant-curvature idea the simulator uses,
 * scaled into glyph space; fidelity matches the rule-level physics.
 */

import { STAGE_ORDER, StageEvent, TelemetryFrame } from "./protocol.js";

export const STRAIGHT_BEND_EPSILON = 0.5; // deg; below this a finger draws straight

export interface FingerGlyph {
  index: 0 | 1 | 2;
  mountAngleDeg: number; // around the palm, top-down
  bendDeg: number;
  straight: boolean;
  /** SVG path in a local frame: finger root at origin, +y outward. */
  path: string;
}

export interface ViewModel {
  palmAngleDeg: number;
  palmVelocityDps: number;
  fingers: [FingerGlyph, FingerGlyph, FingerGlyph];
  vacuumOn: boolean;
  facing: "down" | "up";
  flipAngleDeg: number;
  stageIndex: number; // into STAGE_ORDER
  stages: readonly string[];
  heldLabel: string | null;
  fault: StageEvent | null; // flash this with its quote as tooltip
  timestampMs: number;
}

/** Polyline along a constant-curvature arc, in a 60-unit finger frame. */
export function fingerArcPath(bendDeg: number, segments = 16, lengthUnits = 60): string {
  const theta = (Math.PI / 180) * bendDeg;
  const points: string[] = [];
  for (let i = 0; i <= segments; i++) {
    const s = (i / segments) * lengthUnits;
    let x: number;
    let y: number;
    if (Math.abs(theta) < 1e-9) {
      x = 0;
      y = s;
    } else {
      const radius = lengthUnits / theta;
      const a = (s / lengthUnits) * theta;
      // curl toward the palm axis (negative x in the glyph frame)
      x = -radius * (1 - Math.cos(a));
      y = radius * Math.sin(a);
    }
    points.push(`${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return `M ${points.join(" L ")}`;
}

export function viewModel(frame: TelemetryFrame): ViewModel {
  const bends = frame.state.finger_bends;
  const fingers = [0, 1, 2].map((i) => {
    const bend = bends[i] ?? 0;
    return {
      index: i as 0 | 1 | 2,
      mountAngleDeg: i * 120,
      bendDeg: bend,
      straight: bend < STRAIGHT_BEND_EPSILON,
      path: fingerArcPath(bend),
    };
  }) as [FingerGlyph, FingerGlyph, FingerGlyph];

  const held = frame.state.held_object;
  const heldLabel = held
    ? `${held.obj.name} (${held.obj.mass} g, ${held.hold_mode}${held.draped ? ", draped" : ""})`
    : null;

  const stageIndex = Math.max(0, STAGE_ORDER.indexOf(frame.stage as (typeof STAGE_ORDER)[number]));
  const fault = frame.last_event && frame.last_event.outcome === "failed" ? frame.last_event : null;

  return {
    palmAngleDeg: frame.state.palm_angle,
    palmVelocityDps: frame.state.palm_velocity,
    fingers,
    vacuumOn: frame.state.vacuum_on,
    facing: frame.state.facing,
    flipAngleDeg: frame.state.flip_angle,
    stageIndex,
    stages: STAGE_ORDER,
    heldLabel,
    fault,
    timestampMs: frame.timestamp_ms,
  };
}

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { Hello, TelemetryFrame, GripperStateWire, StageEvent } from "../src/protocol.js";
import { Session, CommandSink } from "../src/session.js";

const here = dirname(fileURLToPath(import.meta.url));
export const REPO_ROOT = join(here, "..", "..");

/** Shared schema fixtures, the same file the server's tests assert against. */
export function loadFixtures(): {
  config: { servo_range: [number, number]; max_palm_speed: number };
  valid_commands: Record<string, unknown>[];
  invalid_commands: { message: Record<string, unknown>; why: string }[];
  telemetry_frames: TelemetryFrame[];
} {
  const path = join(REPO_ROOT, "tests", "fixtures", "protocol_fixtures.json");
  return JSON.parse(readFileSync(path, "utf-8"));
}

export function serverBuiltinObjects(): Record<string, unknown>[] {
  const path = join(REPO_ROOT, "src", "palmgrip", "data", "builtin_objects.json");
  return JSON.parse(readFileSync(path, "utf-8")).objects;
}

export class FakeSink implements CommandSink {
  sent: string[] = [];
  send(text: string): void {
    this.sent.push(text);
  }
}

export function idleState(overrides: Partial<GripperStateWire> = {}): GripperStateWire {
  return {
    palm_angle: 0,
    palm_velocity: 0,
    finger_command: 0,
    finger_bends: [0, 0, 0],
    vacuum_on: false,
    flip_angle: 0,
    facing: "down",
    held_object: null,
    ...overrides,
  };
}

export function frame(
  ts: number,
  stage = "IDLE",
  state: Partial<GripperStateWire> = {},
  lastEvent: StageEvent | null = null,
): TelemetryFrame {
  return {
    type: "telemetry",
    timestamp_ms: ts,
    stage,
    state: idleState(state),
    last_event: lastEvent,
  };
}

export function operatorSession(): { session: Session; sink: FakeSink } {
  const session = new Session();
  const sink = new FakeSink();
  session.attach(sink);
  const hello: Hello = { type: "hello", role: "operator", replay: [] };
  session.handleMessage(JSON.stringify(hello));
  return { session, sink };
}

/**
 * Wire protocol types and client-side validation.
 *
 * Messages are one JSON object per WebSocket text frame, snake_case keys.
 * The validation here duplicates the server's range rules on purpose: the
 * console must never emit a command the server would reject, so both ends
 * are pinned to the same schema fixtures in their test suites.
 */

export interface RigLimits {
  servoRange: [number, number];
  maxPalmSpeed: number;
}

export const DEFAULT_LIMITS: RigLimits = {
  servoRange: [-150, 150],
  maxPalmSpeed: 700,
};

export interface ObjectSpec {
  name: string;
  mass: number; // grams
  shape_class: "ovoid" | "cylinder" | "annulus" | "sphere" | "cloth";
  characteristic_width: number; // mm
  height: number; // mm
  cloth_like: boolean;
  com_height_frac: number;
}

export interface SequencePlan {
  obj: ObjectSpec;
  finger_type: "moulded_oval" | "printed";
  target_yaw: number;
  grasp_u: number | null;
  rotation_speed: number;
  restart_on_failure: boolean;
  retry_failed_stage: boolean;
}

export type Command =
  | { type: "set_fingers"; id: number; u: number }
  | { type: "rotate_palm"; id: number; target_deg: number; speed_dps: number }
  | { type: "vacuum"; id: number; on: boolean }
  | { type: "flip"; id: number; direction: "up" | "down" }
  | { type: "load_object"; id: number; object: ObjectSpec }
  | { type: "run_sequence"; id: number; plan: SequencePlan }
  | { type: "pause"; id: number }
  | { type: "resume"; id: number }
  | { type: "cancel"; id: number }
  | { type: "reset"; id: number };

export interface HeldObject {
  obj: ObjectSpec;
  hold_mode: "in_fingers" | "on_palm" | "none";
  object_yaw: number;
  draped: boolean;
}

export interface GripperStateWire {
  palm_angle: number;
  palm_velocity: number;
  finger_command: number;
  finger_bends: [number, number, number];
  vacuum_on: boolean;
  flip_angle: number;
  facing: "down" | "up";
  held_object: HeldObject | null;
}

export interface StageEvent {
  stage: string;
  outcome: "ok" | "failed";
  failure: string | null;
  note: string | null;
  paper_quote: string | null;
}

export interface TelemetryFrame {
  type: "telemetry";
  timestamp_ms: number;
  state: GripperStateWire;
  stage: string;
  last_event: StageEvent | null;
}

export interface Reply {
  type: "reply";
  id: number;
  status: "accepted" | "rejected" | "completed";
  reason?: string;
  result?: Record<string, unknown>;
}

export interface Hello {
  type: "hello";
  role: "operator" | "observer";
  replay: TelemetryFrame[];
}

export type ServerMessage = TelemetryFrame | Reply | Hello;

const COMMAND_FIELDS: Record<string, string[]> = {
  set_fingers: ["type", "id", "u"],
  rotate_palm: ["type", "id", "target_deg", "speed_dps"],
  vacuum: ["type", "id", "on"],
  flip: ["type", "id", "direction"],
  load_object: ["type", "id", "object"],
  run_sequence: ["type", "id", "plan"],
  pause: ["type", "id"],
  resume: ["type", "id"],
  cancel: ["type", "id"],
  reset: ["type", "id"],
};

function validObject(obj: unknown): string[] {
  if (typeof obj !== "object" || obj === null) return ["object: must be an object"];
  const o = obj as Record<string, unknown>;
  const errors: string[] = [];
  if (typeof o.name !== "string") errors.push("object.name: must be a string");
  if (typeof o.mass !== "number" || !(o.mass > 0)) errors.push("object.mass: must be > 0");
  if (typeof o.characteristic_width !== "number" || !(o.characteristic_width > 0))
    errors.push("object.characteristic_width: must be > 0");
  if (typeof o.height !== "number" || !(o.height > 0)) errors.push("object.height: must be > 0");
  const shapes = ["ovoid", "cylinder", "annulus", "sphere", "cloth"];
  if (!shapes.includes(o.shape_class as string)) errors.push("object.shape_class: unknown");
  if (typeof o.cloth_like !== "boolean") errors.push("object.cloth_like: must be boolean");
  if ((o.shape_class === "cloth") !== o.cloth_like)
    errors.push("object.cloth_like: must match shape_class");
  if (
    typeof o.com_height_frac !== "number" ||
    o.com_height_frac < 0 ||
    o.com_height_frac > 1
  )
    errors.push("object.com_height_frac: must be in [0, 1]");
  return errors;
}

/** Structural + range validation; [] means the server will accept it. */
export function validateCommand(raw: unknown, limits: RigLimits = DEFAULT_LIMITS): string[] {
  if (typeof raw !== "object" || raw === null) return ["command must be an object"];
  const cmd = raw as Record<string, unknown>;
  const fields = COMMAND_FIELDS[cmd.type as string];
  if (!fields) return [`unknown command type: ${String(cmd.type)}`];
  if (typeof cmd.id !== "number" || !Number.isInteger(cmd.id)) return ["id: must be an integer"];
  const unknown = Object.keys(cmd).filter((k) => !fields.includes(k));
  if (unknown.length) return unknown.map((k) => `unknown field: ${k}`);
  const missing = fields.filter((k) => !(k in cmd));
  if (missing.length) return missing.map((k) => `missing field: ${k}`);

  const [lo, hi] = limits.servoRange;
  const errors: string[] = [];
  switch (cmd.type) {
    case "set_fingers": {
      const u = cmd.u;
      if (typeof u !== "number" || u < 0 || u > 1) errors.push("u: must be in [0, 1]");
      break;
    }
    case "rotate_palm": {
      const target = cmd.target_deg;
      const speed = cmd.speed_dps;
      if (typeof target !== "number" || target < lo || target > hi)
        errors.push(`target_deg: outside servo range [${lo}, ${hi}]`);
      if (typeof speed !== "number" || !(speed > 0) || speed > limits.maxPalmSpeed)
        errors.push(`speed_dps: must be in (0, ${limits.maxPalmSpeed}]`);
      break;
    }
    case "vacuum":
      if (typeof cmd.on !== "boolean") errors.push("on: must be boolean");
      break;
    case "flip":
      if (cmd.direction !== "up" && cmd.direction !== "down")
        errors.push("direction: must be 'up' or 'down'");
      break;
    case "load_object":
      errors.push(...validObject(cmd.object));
      break;
    case "run_sequence": {
      const plan = cmd.plan as Record<string, unknown> | null;
      if (typeof plan !== "object" || plan === null) {
        errors.push("plan: must be an object");
        break;
      }
      errors.push(...validObject(plan.obj).map((e) => `plan.${e}`));
      if (plan.finger_type !== "moulded_oval" && plan.finger_type !== "printed")
        errors.push("plan.finger_type: unknown");
      const yaw = plan.target_yaw;
      if (typeof yaw !== "number" || yaw < lo || yaw > hi)
        errors.push(`plan.target_yaw: outside servo range [${lo}, ${hi}]`);
      const speed = plan.rotation_speed;
      if (typeof speed !== "number" || !(speed > 0) || speed > limits.maxPalmSpeed)
        errors.push(`plan.rotation_speed: must be in (0, ${limits.maxPalmSpeed}]`);
      break;
    }
  }
  return errors;
}

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}

/** Lenient parse of server messages; returns null for junk frames. */
export function parseMessage(text: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.type === "telemetry" && typeof msg.timestamp_ms === "number" && msg.state)
    return msg as unknown as TelemetryFrame;
  if (msg.type === "reply" && typeof msg.id === "number") return msg as unknown as Reply;
  if (msg.type === "hello" && (msg.role === "operator" || msg.role === "observer"))
    return msg as unknown as Hello;
  return null;
}

/** The five built-in test objects (mirrors the server's data file). */
export const BUILTIN_OBJECTS: ObjectSpec[] = [
  { name: "styrofoam_egg", mass: 1, shape_class: "ovoid", characteristic_width: 60, height: 45, cloth_like: false, com_height_frac: 0.5 },
  { name: "cylindrical_container", mass: 33, shape_class: "cylinder", characteristic_width: 50, height: 100, cloth_like: false, com_height_frac: 0.5 },
  { name: "glove", mass: 40, shape_class: "cloth", characteristic_width: 120, height: 20, cloth_like: true, com_height_frac: 0.5 },
  { name: "tape", mass: 50, shape_class: "annulus", characteristic_width: 100, height: 25, cloth_like: false, com_height_frac: 0.5 },
  { name: "tennis_ball", mass: 62, shape_class: "sphere", characteristic_width: 67, height: 67, cloth_like: false, com_height_frac: 0.5 },
];

export const STAGE_ORDER = [
  "IDLE", "APPROACH", "GRASP", "LIFT", "FLIP_UP", "DROP_TO_PALM",
  "ROTATE_PALM", "REGRASP", "FLIP_DOWN", "PLACE", "DONE",
] as const;

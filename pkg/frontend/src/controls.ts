/**
 * Control emitters: turn operator intent into validated commands.
 *
 * Every emitter goes through Session.send, which refuses anything the
 * server would reject (and refuses everything while observing).  The
 * slider is throttled to at most 10 commands per second, latest value
 * winning, to protect the server's bounded command queue.
 */

import { BUILTIN_OBJECTS, ObjectSpec, SequencePlan } from "./protocol.js";
import { Session } from "./session.js";
import { CommandThrottle } from "./throttle.js";

export const JOG_STEPS_DEG = [5, 45] as const;
export const DEFAULT_ROTATE_SPEED_DPS = 600;

export class Controls {
  readonly sliderThrottle: CommandThrottle<number>;

  constructor(
    private session: Session,
    now?: () => number,
  ) {
    this.sliderThrottle = new CommandThrottle<number>(
      (u) => void this.session.send({ type: "set_fingers", u } as never),
      10,
      now,
    );
  }

  get enabled(): boolean {
    return this.session.role === "operator";
  }

  /** Finger slider input in [0, 1]; throttled. */
  slider(u: number): void {
    if (!this.enabled) return;
    this.sliderThrottle.offer(Math.min(1, Math.max(0, u)));
  }

  /** Relative palm jog; clamps the target into the servo range. */
  jog(deltaDeg: number, speed = DEFAULT_ROTATE_SPEED_DPS): number | null {
    const current = this.session.latestFrame?.state.palm_angle ?? 0;
    const [lo, hi] = this.session.limits.servoRange;
    const target = Math.min(hi, Math.max(lo, current + deltaDeg));
    return this.session.send({ type: "rotate_palm", target_deg: target, speed_dps: speed } as never);
  }

  /** Absolute palm dial. */
  rotateTo(targetDeg: number, speed = DEFAULT_ROTATE_SPEED_DPS): number | null {
    return this.session.send({
      type: "rotate_palm",
      target_deg: targetDeg,
      speed_dps: speed,
    } as never);
  }

  vacuum(on: boolean): number | null {
    return this.session.send({ type: "vacuum", on } as never);
  }

  flip(direction: "up" | "down"): number | null {
    return this.session.send({ type: "flip", direction } as never);
  }

  loadBuiltin(name: string): number | null {
    const obj = BUILTIN_OBJECTS.find((o) => o.name === name);
    if (!obj) return null;
    return this.loadObject(obj);
  }

  loadObject(obj: ObjectSpec): number | null {
    return this.session.send({ type: "load_object", object: obj } as never);
  }

  /** Parse an uploaded JSON object file; returns the command id or null. */
  loadObjectJson(text: string): number | null {
    try {
      return this.loadObject(JSON.parse(text) as ObjectSpec);
    } catch {
      return null;
    }
  }

  runSequence(
    obj: ObjectSpec,
    fingerType: "moulded_oval" | "printed",
    targetYaw: number,
    rotationSpeed = DEFAULT_ROTATE_SPEED_DPS,
  ): number | null {
    const plan: SequencePlan = {
      obj,
      finger_type: fingerType,
      target_yaw: targetYaw,
      grasp_u: null,
      rotation_speed: rotationSpeed,
      restart_on_failure: true,
      retry_failed_stage: false,
    };
    return this.session.send({ type: "run_sequence", plan } as never);
  }

  pause(): number | null {
    return this.session.send({ type: "pause" } as never);
  }

  resume(): number | null {
    return this.session.send({ type: "resume" } as never);
  }

  cancel(): number | null {
    return this.session.send({ type: "cancel" } as never);
  }

  reset(): number | null {
    return this.session.send({ type: "reset" } as never);
  }
}

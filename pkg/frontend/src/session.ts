/**
 * Session state machine: everything the UI renders derives from here.
 *
 * Frames always replace the latest snapshot (processing is O(1) per frame,
 * so a 30 Hz stream never accumulates), the event log is a 500-entry ring,
 * and the pending-command set only ever shrinks on replies.  The socket is
 * injected so the whole thing is testable without a network.
 */

import {
  Command,
  Hello,
  Reply,
  RigLimits,
  DEFAULT_LIMITS,
  StageEvent,
  TelemetryFrame,
  encodeCommand,
  parseMessage,
  validateCommand,
} from "./protocol.js";

export const EVENT_LOG_CAPACITY = 500;

export interface LogEntry {
  at_ms: number;
  kind: "fault" | "stage" | "reply" | "info";
  text: string;
  quote: string | null; // observation sentence shown as tooltip on faults
}

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface CommandSink {
  send(text: string): void;
}

export class Session {
  connection: ConnectionStatus = "connecting";
  role: "operator" | "observer" | null = null;
  latestFrame: TelemetryFrame | null = null;
  eventLog: LogEntry[] = [];
  pending = new Map<number, Command>();
  framesSeen = 0;
  malformedSeen = 0;
  reconnects = 0;

  private sink: CommandSink | null = null;
  private nextId = 1;
  private lastEventKey = "";

  constructor(public limits: RigLimits = DEFAULT_LIMITS) {}

  attach(sink: CommandSink): void {
    this.sink = sink;
    this.connection = "open";
  }

  detach(): void {
    this.sink = null;
    this.connection = "closed";
    this.role = null;
    this.reconnects += 1;
    this.pending.clear(); // replies for these will never arrive
  }

  /** Feed one raw socket message. Malformed input keeps the previous view. */
  handleMessage(text: string): void {
    const message = parseMessage(text);
    if (message === null) {
      this.malformedSeen += 1;
      this.log("info", "malformed message ignored", null);
      return;
    }
    switch (message.type) {
      case "hello":
        this.handleHello(message);
        return;
      case "telemetry":
        this.handleFrame(message);
        return;
      case "reply":
        this.handleReply(message);
        return;
    }
  }

  private handleHello(hello: Hello): void {
    this.role = hello.role;
    this.log("info", `role: ${hello.role}`, null);
    for (const frame of hello.replay ?? []) this.handleFrame(frame);
  }

  private handleFrame(frame: TelemetryFrame): void {
    this.latestFrame = frame; // replace, never queue
    this.framesSeen += 1;
    if (frame.last_event) this.noteEvent(frame.timestamp_ms, frame.last_event);
  }

  private noteEvent(at: number, event: StageEvent): void {
    const key = `${event.stage}|${event.outcome}|${event.failure}|${event.note}`;
    if (key === this.lastEventKey) return; // frames repeat the last event
    this.lastEventKey = key;
    if (event.outcome === "failed") {
      this.log("fault", `${event.stage}: ${event.failure}`, event.paper_quote);
    } else {
      const note = event.note ? ` (${event.note})` : "";
      this.log("stage", `${event.stage}: ok${note}`, null);
    }
  }

  private handleReply(reply: Reply): void {
    if (this.pending.has(reply.id) && reply.status !== "accepted") {
      this.pending.delete(reply.id); // shrink only on a final reply
    }
    if (reply.status === "rejected") {
      this.log("reply", `#${reply.id} rejected: ${reply.reason ?? ""}`, null);
    } else if (reply.status === "completed") {
      this.log("reply", `#${reply.id} completed`, null);
    }
  }

  /**
   * Validate and send a command; invalid commands are never emitted
   * (client-side validation duplicates the server's rules).
   */
  send(partial: Omit<Command, "id"> & { id?: number }): number | null {
    if (this.sink === null || this.role !== "operator") return null;
    const cmd = { id: partial.id ?? this.nextId++, ...partial } as Command;
    const problems = validateCommand(cmd, this.limits);
    if (problems.length > 0) {
      this.log("info", `blocked invalid command: ${problems[0]}`, null);
      return null;
    }
    this.pending.set(cmd.id, cmd);
    this.sink.send(encodeCommand(cmd));
    return cmd.id;
  }

  private log(kind: LogEntry["kind"], text: string, quote: string | null): void {
    const at = this.latestFrame?.timestamp_ms ?? 0;
    this.eventLog.push({ at_ms: at, kind, text, quote });
    if (this.eventLog.length > EVENT_LOG_CAPACITY) {
      this.eventLog.splice(0, this.eventLog.length - EVENT_LOG_CAPACITY);
    }
  }

  exportLog(): string {
    return JSON.stringify(this.eventLog, null, 2);
  }
}

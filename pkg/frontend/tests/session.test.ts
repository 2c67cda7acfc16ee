import { describe, expect, it } from "vitest";

import { EVENT_LOG_CAPACITY, Session } from "../src/session.js";
import { FakeSink, frame, loadFixtures, operatorSession } from "./helpers.js";

const fixtures = loadFixtures();

describe("telemetry soak: 60 s at 30 Hz", () => {
  it("processes 1800 frames with no dropped-frame accumulation", () => {
    const { session } = operatorSession();
    const start = performance.now();
    for (let i = 0; i < 1800; i++) {
      // stage events repeat on most frames, like the real stream
      const event =
        i % 90 < 45
          ? { stage: "GRASP", outcome: "ok" as const, failure: null, note: null, paper_quote: null }
          : null;
      session.handleMessage(JSON.stringify(frame(33 * (i + 1), "GRASP", {}, event)));
    }
    const elapsed = performance.now() - start;

    expect(session.framesSeen).toBe(1800);
    expect(session.latestFrame!.timestamp_ms).toBe(33 * 1800); // only the latest is kept
    expect(session.eventLog.length).toBeLessThanOrEqual(EVENT_LOG_CAPACITY);
    expect(session.pending.size).toBe(0);
    // O(1) per frame: a minute of telemetry costs well under a second
    expect(elapsed).toBeLessThan(1000);
  });

  it("ring buffer caps at 500 entries", () => {
    const { session } = operatorSession();
    for (let i = 0; i < 700; i++) {
      const event = {
        stage: "GRASP",
        outcome: (i % 2 ? "ok" : "failed") as "ok" | "failed",
        failure: i % 2 ? null : "twisted_out",
        note: String(i), // force every event to be distinct
        paper_quote: null,
      };
      session.handleMessage(JSON.stringify(frame(i + 1, "GRASP", {}, event)));
    }
    expect(session.eventLog.length).toBe(EVENT_LOG_CAPACITY);
    const last = session.eventLog[session.eventLog.length - 1];
    expect(last.text).toContain("699");
  });
});

describe("event handling", () => {
  it("repeated last_event logs once", () => {
    const { session } = operatorSession();
    const event = { stage: "GRASP", outcome: "ok" as const, failure: null, note: null, paper_quote: null };
    const before = session.eventLog.length;
    for (let i = 0; i < 10; i++) {
      session.handleMessage(JSON.stringify(frame(i + 1, "GRASP", {}, event)));
    }
    expect(session.eventLog.length).toBe(before + 1);
  });

  it("fault events carry the observation quote for the tooltip", () => {
    const { session } = operatorSession();
    const faultFrame = fixtures.telemetry_frames.find(
      (f) => f.last_event && f.last_event.outcome === "failed",
    )!;
    session.handleMessage(JSON.stringify(faultFrame));
    const fault = session.eventLog.find((e) => e.kind === "fault")!;
    expect(fault.text).toContain("blocked_rotation");
    expect(fault.quote).toBeTruthy();
    expect(fault.quote).toContain("gaps between the fingers");
  });

  it("malformed frames keep the previous view", () => {
    const { session } = operatorSession();
    session.handleMessage(JSON.stringify(frame(100)));
    const kept = session.latestFrame;
    session.handleMessage("{broken json");
    expect(session.latestFrame).toBe(kept);
    expect(session.malformedSeen).toBe(1);
  });
});

describe("pending commands", () => {
  it("shrinks only on final replies", () => {
    const { session } = operatorSession();
    const id = session.send({ type: "vacuum", on: true } as never)!;
    expect(session.pending.size).toBe(1);
    session.handleMessage(JSON.stringify({ type: "reply", id, status: "accepted" }));
    expect(session.pending.size).toBe(1); // accepted is not final
    session.handleMessage(JSON.stringify({ type: "reply", id, status: "completed" }));
    expect(session.pending.size).toBe(0);
  });

  it("rejected replies clear pending and log the reason", () => {
    const { session } = operatorSession();
    const id = session.send({ type: "vacuum", on: true } as never)!;
    session.handleMessage(JSON.stringify({ type: "reply", id, status: "rejected", reason: "busy" }));
    expect(session.pending.size).toBe(0);
    expect(session.eventLog.some((e) => e.text.includes("busy"))).toBe(true);
  });
});

describe("send gate", () => {
  it("never emits invalid commands", () => {
    const { session, sink } = operatorSession();
    expect(session.send({ type: "set_fingers", u: 2.0 } as never)).toBeNull();
    expect(session.send({ type: "rotate_palm", target_deg: 999, speed_dps: 600 } as never)).toBeNull();
    expect(sink.sent.length).toBe(0);
  });

  it("observers cannot emit at all", () => {
    const session = new Session();
    const sink = new FakeSink();
    session.attach(sink);
    session.handleMessage(JSON.stringify({ type: "hello", role: "observer", replay: [] }));
    expect(session.send({ type: "vacuum", on: true } as never)).toBeNull();
    expect(sink.sent.length).toBe(0);
  });
});

describe("reconnect", () => {
  it("resumes with the server-assigned role and replays buffered frames", () => {
    const { session } = operatorSession();
    session.handleMessage(JSON.stringify(frame(50)));
    session.detach();
    expect(session.connection).toBe("closed");
    expect(session.role).toBeNull();

    const sink = new FakeSink();
    session.attach(sink);
    const replay = [frame(60), frame(90), frame(120)];
    session.handleMessage(JSON.stringify({ type: "hello", role: "observer", replay }));
    expect(session.role).toBe("observer");
    expect(session.latestFrame!.timestamp_ms).toBe(120);
    expect(session.reconnects).toBe(1);
  });
});

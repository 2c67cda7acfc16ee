/**
 * Console entry point: URL-configured connection, reconnect-as-observer,
 * and wiring between socket, session, controls and renderer.
 *
 * Configuration via query string: ?host=127.0.0.1:8765&rate=30
 */

import { BUILTIN_OBJECTS, ObjectSpec } from "./protocol.js";
import { Session } from "./session.js";
import { Controls, JOG_STEPS_DEG } from "./controls.js";
import { Renderer } from "./render.js";
import { viewModel } from "./view.js";

const RECONNECT_DELAY_MS = 1500;

function wsUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? "127.0.0.1:8765";
  return `ws://${host}/ws`;
}

function start(): void {
  const session = new Session();
  const controls = new Controls(session);
  const renderer = new Renderer(document);

  let socket: WebSocket | null = null;

  function connect(): void {
    socket = new WebSocket(wsUrl());
    socket.onopen = () => session.attach({ send: (text) => socket?.send(text) });
    socket.onmessage = (event: MessageEvent) => session.handleMessage(String(event.data));
    socket.onclose = () => {
      session.detach();
      // reconnecting resumes as whatever the server assigns (observer
      // unless the operator slot is free); the hello replays recent frames
      setTimeout(connect, RECONNECT_DELAY_MS);
    };
    socket.onerror = () => socket?.close();
  }
  connect();

  // ---- controls wiring ----
  const slider = document.getElementById("finger-slider") as HTMLInputElement;
  slider.addEventListener("input", () => controls.slider(Number(slider.value)));
  setInterval(() => controls.sliderThrottle.tick(), 25);

  for (const step of JOG_STEPS_DEG) {
    document.getElementById(`jog-plus-${step}`)!.addEventListener("click", () => controls.jog(step));
    document.getElementById(`jog-minus-${step}`)!.addEventListener("click", () => controls.jog(-step));
  }
  const dial = document.getElementById("palm-dial-input") as HTMLInputElement;
  document.getElementById("rotate-go")!.addEventListener("click", () =>
    controls.rotateTo(Number(dial.value)),
  );

  const vacuumBox = document.getElementById("vacuum-toggle") as HTMLInputElement;
  vacuumBox.addEventListener("change", () => controls.vacuum(vacuumBox.checked));
  const flipBox = document.getElementById("flip-toggle") as HTMLInputElement;
  flipBox.addEventListener("change", () => controls.flip(flipBox.checked ? "up" : "down"));

  const picker = document.getElementById("object-picker") as HTMLSelectElement;
  for (const obj of BUILTIN_OBJECTS) {
    const option = document.createElement("option");
    option.value = obj.name;
    option.textContent = `${obj.name} (${obj.mass} g)`;
    picker.appendChild(option);
  }
  document.getElementById("load-object")!.addEventListener("click", () =>
    controls.loadBuiltin(picker.value),
  );
  const upload = document.getElementById("object-upload") as HTMLInputElement;
  upload.addEventListener("change", async () => {
    const file = upload.files?.[0];
    if (file) controls.loadObjectJson(await file.text());
  });

  const fingerSel = document.getElementById("finger-type") as HTMLSelectElement;
  const yawInput = document.getElementById("target-yaw") as HTMLInputElement;
  document.getElementById("run-sequence")!.addEventListener("click", () => {
    const obj: ObjectSpec | undefined = BUILTIN_OBJECTS.find((o) => o.name === picker.value);
    if (obj)
      controls.runSequence(
        obj,
        fingerSel.value as "moulded_oval" | "printed",
        Number(yawInput.value),
      );
  });
  document.getElementById("cancel")!.addEventListener("click", () => controls.cancel());
  document.getElementById("reset")!.addEventListener("click", () => controls.reset());
  document.getElementById("export-log")!.addEventListener("click", () => {
    const blob = new Blob([session.exportLog()], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "event-log.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  // ---- render loop ----
  function paint(): void {
    const controlsEnabled = controls.enabled;
    document.querySelectorAll<HTMLInputElement | HTMLButtonElement | HTMLSelectElement>(
      ".operator-only",
    ).forEach((el) => (el.disabled = !controlsEnabled));
    if (session.latestFrame) renderer.render(viewModel(session.latestFrame), session);
    requestAnimationFrame(paint);
  }
  requestAnimationFrame(paint);
}

window.addEventListener("DOMContentLoaded", start);

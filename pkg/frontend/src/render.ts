/**
 * Thin DOM binding of the view-model: an SVG schematic (top-down palm and
 * fingers, side flip strip), the stage strip, indicators, and the event
 * log.  All geometry comes precomputed from view.ts; this file only moves
 * attributes.
 */

import { LogEntry, Session } from "./session.js";
import { ViewModel } from "./view.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export class Renderer {
  private palmDial: SVGGElement;
  private fingerPaths: SVGPathElement[] = [];
  private sideGroup: SVGGElement;
  private vacuumEl: HTMLElement;
  private stageEls: HTMLElement[] = [];
  private heldEl: HTMLElement;
  private statusEl: HTMLElement;
  private logEl: HTMLElement;
  private faultEl: HTMLElement;
  private renderedLogLength = 0;

  constructor(root: Document) {
    const topDown = root.getElementById("top-down")!;
    const palm = root.createElementNS(SVG_NS, "g");
    palm.setAttribute("id", "palm-dial");
    const disc = root.createElementNS(SVG_NS, "circle");
    disc.setAttribute("r", "34");
    disc.setAttribute("class", "palm");
    const marker = root.createElementNS(SVG_NS, "line");
    marker.setAttribute("x1", "0");
    marker.setAttribute("y1", "0");
    marker.setAttribute("x2", "0");
    marker.setAttribute("y2", "-30");
    marker.setAttribute("class", "palm-marker");
    palm.append(disc, marker);
    topDown.appendChild(palm);
    this.palmDial = palm;

    for (let i = 0; i < 3; i++) {
      const group = root.createElementNS(SVG_NS, "g");
      group.setAttribute("transform", `rotate(${i * 120}) translate(0 42)`);
      const path = root.createElementNS(SVG_NS, "path");
      path.setAttribute("class", "finger");
      group.appendChild(path);
      topDown.appendChild(group);
      this.fingerPaths.push(path);
    }

    const side = root.getElementById("side-view")!;
    const body = root.createElementNS(SVG_NS, "g");
    const chassis = root.createElementNS(SVG_NS, "rect");
    chassis.setAttribute("x", "-30");
    chassis.setAttribute("y", "-8");
    chassis.setAttribute("width", "60");
    chassis.setAttribute("height", "16");
    chassis.setAttribute("class", "chassis");
    const palmMark = root.createElementNS(SVG_NS, "line");
    palmMark.setAttribute("x1", "-30");
    palmMark.setAttribute("y1", "10");
    palmMark.setAttribute("x2", "30");
    palmMark.setAttribute("y2", "10");
    palmMark.setAttribute("class", "palm-face");
    body.append(chassis, palmMark);
    side.appendChild(body);
    this.sideGroup = body;

    this.vacuumEl = root.getElementById("vacuum-indicator")!;
    this.heldEl = root.getElementById("held-object")!;
    this.statusEl = root.getElementById("status")!;
    this.logEl = root.getElementById("event-log")!;
    this.faultEl = root.getElementById("fault-flash")!;

    const strip = root.getElementById("stage-strip")!;
    for (const stage of [
      "IDLE", "APPROACH", "GRASP", "LIFT", "FLIP_UP", "DROP_TO_PALM",
      "ROTATE_PALM", "REGRASP", "FLIP_DOWN", "PLACE", "DONE",
    ]) {
      const el = root.createElement("span");
      el.className = "stage";
      el.textContent = stage;
      strip.appendChild(el);
      this.stageEls.push(el);
    }
  }

  render(vm: ViewModel, session: Session): void {
    this.palmDial.setAttribute("transform", `rotate(${vm.palmAngleDeg})`);
    vm.fingers.forEach((finger, i) => {
      const el = this.fingerPaths[i];
      el.setAttribute("d", finger.path);
      el.classList.toggle("straight", finger.straight);
    });
    this.sideGroup.setAttribute("transform", `rotate(${vm.flipAngleDeg})`);
    this.vacuumEl.classList.toggle("on", vm.vacuumOn);
    this.vacuumEl.textContent = vm.vacuumOn ? "vacuum ON" : "vacuum off";
    this.heldEl.textContent = vm.heldLabel ?? "nothing held";
    this.statusEl.textContent =
      `${session.connection} | ${session.role ?? "-"} | ` +
      `t=${(vm.timestampMs / 1000).toFixed(1)}s | facing ${vm.facing}`;
    this.stageEls.forEach((el, i) => el.classList.toggle("active", i === vm.stageIndex));

    if (vm.fault) {
      this.faultEl.textContent = `${vm.fault.stage}: ${vm.fault.failure}`;
      this.faultEl.title = vm.fault.paper_quote ?? "";
      this.faultEl.classList.add("flash");
    } else {
      this.faultEl.classList.remove("flash");
    }

    this.renderLog(session.eventLog);
  }

  private renderLog(entries: LogEntry[]): void {
    if (entries.length === this.renderedLogLength) return;
    this.renderedLogLength = entries.length;
    const doc = this.logEl.ownerDocument;
    this.logEl.replaceChildren(
      ...entries.slice(-50).reverse().map((entry) => {
        const li = doc.createElement("li");
        li.className = entry.kind;
        li.textContent = `[${(entry.at_ms / 1000).toFixed(1)}s] ${entry.text}`;
        if (entry.quote) li.title = entry.quote; // observation sentence tooltip
        return li;
      }),
    );
  }
}

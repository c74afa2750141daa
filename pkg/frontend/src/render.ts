// Deterministic DOM rendering of a SessionView. Rendering is a pure function
// of the view: same view, same markup, which the replay tests rely on.

import type { SessionView, StepView } from "./view.js";

function el(doc: Document, tag: string, className: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderGrid(doc: Document, view: SessionView): HTMLElement {
  const grid = el(doc, "div", "grid");
  grid.setAttribute("data-width", String(view.grid.width));
  grid.setAttribute("data-height", String(view.grid.height));
  const byCell = new Map<string, string[]>();
  for (const [name, cells] of Object.entries(view.grid.furniture)) {
    for (const [x, y] of cells) {
      const key = `${x},${y}`;
      byCell.set(key, [...(byCell.get(key) ?? []), `furniture:${name}`]);
    }
  }
  for (const [agent, [x, y]] of Object.entries(view.agents)) {
    const key = `${x},${y}`;
    byCell.set(key, [...(byCell.get(key) ?? []), `agent:${agent}`]);
  }
  for (const [obj, holder] of Object.entries(view.objects).sort()) {
    const cells = view.grid.furniture[resolveHolder(view, holder)];
    if (!cells || cells.length === 0) continue;
    const [x, y] = cells[0]!;
    const key = `${x},${y}`;
    byCell.set(key, [...(byCell.get(key) ?? []), `object:${obj}`]);
  }
  for (const key of [...byCell.keys()].sort()) {
    const cell = el(doc, "div", "cell");
    cell.setAttribute("data-cell", key);
    cell.setAttribute("data-contents", byCell.get(key)!.join(" "));
    grid.appendChild(cell);
  }
  return grid;
}

function resolveHolder(view: SessionView, holder: string): string {
  // follow containment (object held by object) down to a furniture name
  let current = holder;
  const seen = new Set<string>();
  while (current in view.objects && !seen.has(current)) {
    seen.add(current);
    current = view.objects[current]!;
  }
  return current;
}

function stepClass(step: StepView): string {
  const allocation = step.allocation ? ` alloc-${step.allocation}` : "";
  return `step status-${step.status}${allocation}`;
}

function renderPlan(doc: Document, view: SessionView): HTMLElement {
  const list = el(doc, "ol", "plan");
  for (const step of view.steps) {
    const item = el(doc, "li", stepClass(step), `${step.index}: ${step.text}`);
    item.setAttribute("data-step", String(step.index));
    if (step.doneBy) item.setAttribute("data-done-by", step.doneBy);
    if (step.allocation) item.setAttribute("data-allocation", step.allocation);
    list.appendChild(item);
  }
  return list;
}

function renderTranscript(doc: Document, view: SessionView): HTMLElement {
  const list = el(doc, "ol", "transcript");
  for (const entry of view.transcript) {
    const item = el(
      doc,
      "li",
      `utterance from-${entry.actor} act-${entry.act}`,
      `[${entry.envStep}] ${entry.actor} (${entry.act}): ${entry.text}`,
    );
    list.appendChild(item);
  }
  return list;
}

function renderGauge(doc: Document, view: SessionView): HTMLElement {
  const gauge = el(doc, "div", "gauge");
  const value = view.pHelp;
  gauge.setAttribute("data-p-help", value === null ? "none" : value.toFixed(4));
  const bar = el(doc, "div", "gauge-bar");
  bar.setAttribute("style", `width: ${Math.round((value ?? 0) * 100)}%`);
  gauge.appendChild(bar);
  const trace = el(
    doc,
    "div",
    "gauge-trace",
    view.gaugeTrace.map((p) => `${p.envStep}:${p.value.toFixed(4)}`).join(" "),
  );
  gauge.appendChild(trace);
  return gauge;
}

function renderBanner(doc: Document, view: SessionView): HTMLElement {
  if (view.terminated !== null) {
    return el(doc, "div", "banner terminated", `Trial over: ${view.terminated}`);
  }
  if (view.pending !== null) {
    return el(
      doc,
      "div",
      "banner pending",
      `Robot is waiting on you (${view.pending.act}, steps ${view.pending.refs.join(", ")})`,
    );
  }
  return el(doc, "div", "banner idle", "");
}

/** Render the whole view into `root`, replacing previous content. */
export function render(root: HTMLElement, view: SessionView): void {
  const doc = root.ownerDocument;
  const container = el(doc, "div", "session");
  container.setAttribute("data-scenario", view.scenario);
  container.setAttribute("data-env-step", String(view.envStep));
  container.appendChild(renderBanner(doc, view));
  container.appendChild(renderGrid(doc, view));
  container.appendChild(renderPlan(doc, view));
  container.appendChild(renderGauge(doc, view));
  container.appendChild(renderTranscript(doc, view));
  root.replaceChildren(container);
}

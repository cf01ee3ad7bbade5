/** DOM rendering: profile chart, valve board, alarms, localization, controls. */

import type { ConsoleViewState } from "./state.js";
import { canOpen } from "./state.js";

const PA = 1e4; // display unit: 10^4 Pa, SI shown in tooltips

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function profileSvg(state: ConsoleViewState, line: string): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 640 240");
  svg.setAttribute("class", "profile");
  const series: Array<[string, Record<number, number>]> = [];
  const live = state.profiles[line];
  if (live) series.push(["live", live]);
  for (const [key, curve] of Object.entries(state.curves[line] ?? {})) {
    series.push([key, curve]);
  }
  const xs = series.flatMap(([, c]) => Object.keys(c).map(Number));
  const ps = series.flatMap(([, c]) => Object.values(c));
  if (!xs.length) return svg;
  const [xMin, xMax] = [Math.min(...xs), Math.max(...xs)];
  const [pMin, pMax] = [Math.min(...ps) * 0.98, Math.max(...ps) * 1.02];
  const sx = (x: number) => (640 * (x - xMin)) / Math.max(1, xMax - xMin);
  const sy = (p: number) => 240 - (240 * (p - pMin)) / Math.max(1, pMax - pMin);
  series.forEach(([label, curve], i) => {
    const pts = Object.entries(curve)
      .map(([x, p]) => [Number(x), p] as const)
      .sort((a, b) => a[0] - b[0]);
    if (pts.length < 2) return;
    const poly = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    poly.setAttribute("points", pts.map(([x, p]) => `${sx(x)},${sy(p)}`).join(" "));
    poly.setAttribute("fill", "none");
    poly.setAttribute("stroke", label === "live" ? "#e53" : `hsl(${200 + i * 20},70%,45%)`);
    poly.setAttribute("stroke-width", label === "live" ? "2.5" : "1.2");
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${line} ${label} (pressures in Pa: ${pts.map(([, p]) => p.toFixed(0)).join(", ")})`;
    poly.appendChild(title);
    svg.appendChild(poly);
  });
  return svg;
}

export interface AppHooks {
  onOpenValve: (valveId: string) => void;
}

export function render(root: HTMLElement, state: ConsoleViewState, status: string, hooks: AppHooks): void {
  root.textContent = "";

  const header = el("header");
  header.appendChild(el("h1", {}, "pipeline operator console"));
  header.appendChild(el("span", { class: `status ${status === "live" ? "live" : "down"}` }, status));
  header.appendChild(el("span", { class: "clock" }, `t = ${state.simTime.toFixed(0)} s`));
  root.appendChild(header);

  const charts = el("section", { class: "charts" });
  for (const line of Object.keys(state.profiles).sort()) {
    const box = el("div", { class: "chart" });
    box.appendChild(el("h2", {}, `${line} pressure profile (10⁴ Pa)`));
    box.appendChild(profileSvg(state, line));
    charts.appendChild(box);
  }
  root.appendChild(charts);

  const board = el("section", { class: "board" });
  board.appendChild(el("h2", {}, "valve board"));
  for (const [id, vs] of Object.entries(state.valves).sort()) {
    board.appendChild(el("span", { class: `valve ${vs}`, title: id }, `${id}: ${vs}`));
  }
  root.appendChild(board);

  const loc = el("section", { class: "localization" });
  loc.appendChild(el("h2", {}, "isolated-section estimate"));
  const { Z_pa, Z1, l1_raw_m, l1_m, l3_m } = state.localization;
  const fmt = (v: number | null, d = 1) => (v === null ? "-" : v.toFixed(d));
  loc.appendChild(
    el(
      "p",
      { title: "Z in Pa, lengths in m" },
      `Z = ${Z_pa === null ? "-" : (Z_pa / PA).toFixed(3)}×10⁴ Pa, ` +
        `Z₁ = ${fmt(Z1, 4)}, l₁ = ${fmt(l1_raw_m)} m (addressed: ${fmt(l1_m, 0)} m), ` +
        `l₃ = ${fmt(l3_m, 0)} m`,
    ),
  );
  root.appendChild(loc);

  const controls = el("section", { class: "controls" });
  controls.appendChild(el("h2", {}, "crossover activation"));
  const gateIds = Object.keys(state.gates).sort();
  if (!gateIds.length) {
    controls.appendChild(el("p", {}, "no verdict yet"));
  }
  for (const vid of gateIds) {
    const button = el("button", { "data-valve": vid }, `open ${vid}`);
    button.disabled = !canOpen(state, vid);
    button.addEventListener("click", () => hooks.onOpenValve(vid));
    controls.appendChild(button);
  }
  root.appendChild(controls);

  const alarms = el("section", { class: "alarms" });
  alarms.appendChild(el("h2", {}, "alarm feed"));
  const list = el("ul");
  for (const alarm of state.alarms.slice(-14).reverse()) {
    list.appendChild(el("li", { class: alarm.severity }, `[${alarm.time_s.toFixed(0)}s] ${alarm.text}`));
  }
  alarms.appendChild(list);
  root.appendChild(alarms);
}

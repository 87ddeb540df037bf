/** Explorer application: policy sliders issue trajectory queries against the
 * service; fan charts render the returned quantiles; a pinned ground-truth
 * panel sits above the surrogate panel with the fidelity score between them.
 * Sessions export as the request JSON the CLI replays.
 */

import { ApiClient, QueryLatch, ServiceError } from "./api.js";
import {
  bandPath,
  layoutFanChart,
  linePath,
  valueDomain,
  type LayoutResult,
} from "./fanchart.js";
import { curvesForPolicy, layoutCurves, parseResultsCsv } from "./curves.js";
import {
  ALGORITHMS,
  defaultSession,
  exportSession,
  formFor,
  importSession,
  POLICY_FORMS,
  toRequest,
  validateSession,
  type ExplorerSession,
} from "./session.js";
import type { DatabaseInfo, QuantileSeries } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_W = 640;
const CHART_H = 220;

interface PanelState {
  setId: string | null;
  series: QuantileSeries | null;
  value: number | null;
  cached: boolean;
}

const state = {
  session: defaultSession(),
  databases: [] as DatabaseInfo[],
  variable: "",
  truth: { setId: null, series: null, value: null, cached: false } as PanelState,
  surrogate: { setId: null, series: null, value: null, cached: false } as PanelState,
  fidelity: null as number | null,
};

const api = new ApiClient("");
const surrogateLatch = new QueryLatch();
const truthLatch = new QueryLatch();

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

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(message: string, isError = false): void {
  const box = byId<HTMLDivElement>("status");
  box.textContent = message;
  box.className = isError ? "status error" : "status";
}

function showError(err: unknown): void {
  if (err instanceof ServiceError) {
    setStatus(`${err.code}: ${err.advice}`, true);
  } else {
    setStatus(String(err), true);
  }
}

/* ---------- form ---------- */

function renderPolicyForm(): void {
  const holder = byId<HTMLDivElement>("params");
  holder.replaceChildren();
  const form = formFor(state.session.policyClass);
  form.params.forEach((spec, i) => {
    const row = el("label", { class: "param-row" });
    row.append(el("span", { class: "param-name" }, spec.name));
    const input = el("input", {
      type: "range",
      min: String(spec.min),
      max: String(spec.max),
      step: String(spec.step),
      value: String(state.session.params[i] ?? spec.initial),
    });
    const value = el("span", { class: "param-value" },
      String(state.session.params[i] ??spec.initial));
    input.addEventListener("input", () => {
      state.session.params[i] = Number(input.value);
      value.textContent = input.value;
      void submitQuery();
    });
    row.append(input, value);
    holder.append(row);
  });
}

function renderControls(): void {
  const classSel = byId<HTMLSelectElement>("policy-class");
  classSel.replaceChildren(
    ...POLICY_FORMS.map((f) =>
      el("option", { value: f.policyClass }, `${f.policyClass} — ${f.label}`),
    ),
  );
  classSel.value = state.session.policyClass;
  classSel.addEventListener("change", () => {
    const form = formFor(classSel.value);
    state.session.policyClass = form.policyClass;
    state.session.params = form.params.map((p) => p.initial);
    renderPolicyForm();
    void submitQuery();
  });

  const algSel = byId<HTMLSelectElement>("algorithm");
  algSel.replaceChildren(
    ...ALGORITHMS.filter((a) => a !== "ground_truth").map((a) =>
      el("option", { value: a }, a),
    ),
  );
  algSel.value = state.session.algorithm;
  algSel.addEventListener("change", () => {
    state.session.algorithm = algSel.value as typeof state.session.algorithm;
    void submitQuery();
  });

  for (const field of ["n", "h", "seed"] as const) {
    const input = byId<HTMLInputElement>(field);
    input.value = String(state.session[field]);
    input.addEventListener("change", () => {
      state.session[field] = Number(input.value);
      void submitQuery();
    });
  }

  byId<HTMLButtonElement>("pin-truth").addEventListener("click", () => {
    void pinGroundTruth();
  });
  byId<HTMLButtonElement>("export").addEventListener("click", downloadSession);
  byId<HTMLInputElement>("import").addEventListener("change", onImportFile);
  byId<HTMLInputElement>("curves-file").addEventListener("change", onCurvesFile);

  const varSel = byId<HTMLSelectElement>("variable");
  varSel.addEventListener("change", () => {
    state.variable = varSel.value;
    void refreshCharts();
  });
}

function renderVariableOptions(db: DatabaseInfo): void {
  const varSel = byId<HTMLSelectElement>("variable");
  const options = [...db.markov_features, "reward", "cumulative_reward"];
  varSel.replaceChildren(...options.map((v) => el("option", { value: v }, v)));
  if (!options.includes(state.variable)) state.variable = options[0] ?? "";
  varSel.value = state.variable;
}

/* ---------- queries ---------- */

async function submitQuery(): Promise<void> {
  const problems = validateSession(state.session);
  if (problems.length) {
    setStatus(`fix before submitting: ${problems.join("; ")}`, true);
    return;
  }
  const current = surrogateLatch.begin();
  setStatus("stitching…");
  try {
    const started = performance.now();
    const res = await api.trajectories(toRequest(state.session));
    if (!current()) return;
    state.surrogate.setId = res.set_id;
    state.surrogate.value = res.value_estimate;
    state.surrogate.cached = res.cached;
    await refreshCharts();
    if (!current()) return;
    await refreshFidelity();
    if (!current()) return;
    const ms = Math.round(performance.now() - started);
    setStatus(
      `${res.algorithm}: value ${res.value_estimate.toFixed(4)} ` +
        `(${res.cached ? "cached" : `${ms} ms`})`,
    );
  } catch (err) {
    if (current()) showError(err);
  }
}

async function pinGroundTruth(): Promise<void> {
  const problems = validateSession(state.session);
  if (problems.length) {
    setStatus(`fix before submitting: ${problems.join("; ")}`, true);
    return;
  }
  const current = truthLatch.begin();
  setStatus("rolling out ground truth…");
  try {
    const req = { ...toRequest(state.session), algorithm: "ground_truth" as const };
    const res = await api.trajectories(req);
    if (!current()) return;
    state.truth.setId = res.set_id;
    state.truth.value = res.value_estimate;
    state.truth.cached = res.cached;
    state.session.pinnedTruthId = res.set_id;
    await refreshCharts();
    if (!current()) return;
    await refreshFidelity();
    if (!current()) return;
    setStatus(`pinned ground truth: value ${res.value_estimate.toFixed(4)}`);
  } catch (err) {
    if (current()) showError(err);
  }
}

async function refreshCharts(): Promise<void> {
  const levels = state.session.quantileLevels;
  for (const panel of [state.truth, state.surrogate]) {
    panel.series =
      panel.setId && state.variable
        ? await api.fanchart(panel.setId, state.variable, levels)
        : null;
  }
  drawPanels();
}

async function refreshFidelity(): Promise<void> {
  if (!state.truth.setId || !state.surrogate.setId) {
    state.fidelity = null;
  } else {
    const res = await api.fidelity({
      truth_set_id: state.truth.setId,
      surrogate_set_id: state.surrogate.setId,
    });
    state.fidelity = res.weighted_total;
  }
  drawFidelity();
}

/* ---------- rendering ---------- */

function drawFidelity(): void {
  const box = byId<HTMLDivElement>("fidelity");
  if (state.fidelity === null) {
    box.textContent = "pin a ground-truth panel to score fidelity";
  } else {
    box.textContent = `visual fidelity error: ${state.fidelity.toFixed(4)}`;
  }
}

function drawPanels(): void {
  const shared =
    state.truth.series && state.surrogate.series
      ? valueDomain([state.truth.series, state.surrogate.series])
      : undefined;
  drawChart("truth-chart", state.truth, "ground truth (pinned)", shared);
  drawChart("surrogate-chart", state.surrogate, "surrogate", shared);
}

function drawChart(
  mountId: string,
  panel: PanelState,
  title: string,
  domain?: { min: number; max: number },
): void {
  const mount = byId<HTMLDivElement>(mountId);
  mount.replaceChildren();
  mount.append(el("h3", {}, panel.value !== null
    ? `${title} — value ${panel.value.toFixed(4)}${panel.cached ? " (cached)" : ""}`
    : title));
  if (!panel.series) {
    mount.append(el("div", { class: "placeholder" }, "no data — submit a query"));
    return;
  }
  const layout: LayoutResult = layoutFanChart(
    panel.series,
    { width: CHART_W, height: CHART_H },
    domain,
  );
  if (layout.kind === "placeholder") {
    mount.append(el("div", { class: "placeholder" }, layout.message));
    return;
  }
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${CHART_W} ${CHART_H}`);
  svg.setAttribute("width", String(CHART_W));
  svg.setAttribute("height", String(CHART_H));
  layout.bands.forEach((band, i) => {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", bandPath(band));
    path.setAttribute("class", `band band-${i}`);
    path.setAttribute("data-lower", String(band.lower));
    path.setAttribute("data-upper", String(band.upper));
    svg.append(path);
  });
  const median = document.createElementNS(SVG_NS, "path");
  median.setAttribute("d", linePath(layout.median));
  median.setAttribute("class", "median");
  svg.append(median);
  for (const tick of layout.yTicks) {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", "4");
    label.setAttribute("y", String(tick.pixel + 3));
    label.setAttribute("class", "tick");
    label.textContent = tick.value.toPrecision(3);
    svg.append(label);
  }
  for (const tick of layout.xTicks) {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(tick.pixel));
    label.setAttribute("y", String(CHART_H - 6));
    label.setAttribute("class", "tick tick-x");
    label.textContent = String(tick.value);
    svg.append(label);
  }
  mount.append(svg);
}

/* ---------- session + curves I/O ---------- */

function downloadSession(): void {
  try {
    const blob = new Blob([exportSession(state.session)], {
      type: "application/json",
    });
    const a = el("a", {
      href: URL.createObjectURL(blob),
      download: "session.json",
    });
    a.click();
    URL.revokeObjectURL(a.href);
    setStatus(
      "session exported — replay with: trajstitch simulate --db <database dir> --request session.json",
    );
  } catch (err) {
    showError(err);
  }
}

function onImportFile(event: Event): void {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  void file.text().then((text) => {
    try {
      state.session = importSession(text);
      const classSel = byId<HTMLSelectElement>("policy-class");
      classSel.value = state.session.policyClass;
      for (const field of ["n", "h", "seed"] as const) {
        byId<HTMLInputElement>(field).value = String(state.session[field]);
      }
      byId<HTMLSelectElement>("algorithm").value = state.session.algorithm;
      renderPolicyForm();
      void submitQuery();
    } catch (err) {
      showError(err);
    }
  });
}

function onCurvesFile(event: Event): void {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  void file.text().then((text) => {
    try {
      const rows = parseResultsCsv(text);
      const policies = [...new Set(rows.map((r) => r.policy_class))];
      const mount = byId<HTMLDivElement>("curves");
      mount.replaceChildren();
      for (const policy of policies) {
        const series = curvesForPolicy(rows, policy);
        const layout = layoutCurves(series, { width: CHART_W, height: CHART_H });
        mount.append(el("h3", {}, `fidelity error vs database size — ${policy}`));
        const svg = document.createElementNS(SVG_NS, "svg");
        svg.setAttribute("viewBox", `0 0 ${CHART_W} ${CHART_H}`);
        svg.setAttribute("width", String(CHART_W));
        svg.setAttribute("height", String(CHART_H));
        layout.lines.forEach((line, i) => {
          const path = document.createElementNS(SVG_NS, "path");
          path.setAttribute("d", linePath(line.points));
          path.setAttribute("class", `curve curve-${i}`);
          svg.append(path);
          if (line.points.length) {
            const label = document.createElementNS(SVG_NS, "text");
            const last = line.points[line.points.length - 1]!;
            label.setAttribute("x", String(last.x + 4));
            label.setAttribute("y", String(last.y));
            label.setAttribute("class", "tick");
            label.textContent = line.label;
            svg.append(label);
          }
        });
        mount.append(svg);
      }
      setStatus(`loaded learning curves for ${policies.length} query class(es)`);
    } catch (err) {
      showError(err);
    }
  });
}

/* ---------- boot ---------- */

async function boot(): Promise<void> {
  renderControls();
  renderPolicyForm();
  drawPanels();
  drawFidelity();
  try {
    state.databases = await api.databases();
  } catch (err) {
    showError(err);
    return;
  }
  const dbSel = byId<HTMLSelectElement>("database");
  dbSel.replaceChildren(
    ...state.databases.map((d) =>
      el(
        "option",
        { value: d.db_id },
        `${d.db_id} — ${d.mode}, ${d.sets} sets, h=${d.horizon}`,
      ),
    ),
  );
  dbSel.addEventListener("change", onDatabaseChange);
  if (state.databases.length) {
    dbSel.value = state.databases[0]!.db_id;
    onDatabaseChange();
  } else {
    setStatus("no databases loaded — start the service with --db-dir", true);
  }
}

function onDatabaseChange(): void {
  const dbSel = byId<HTMLSelectElement>("database");
  const db = state.databases.find((d) => d.db_id === dbSel.value);
  if (!db) return;
  state.session.dbId = db.db_id;
  state.session.h = db.horizon;
  byId<HTMLInputElement>("h").value = String(db.horizon);
  state.truth = { setId: null, series: null, value: null, cached: false };
  state.surrogate = { setId: null, series: null, value: null, cached: false };
  state.fidelity = null;
  renderVariableOptions(db);
  void submitQuery();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot();
}

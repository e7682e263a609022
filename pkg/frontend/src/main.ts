// DOM bootstrap. Renders the two-row layout from GardenApp state and wires
// buttons back into its actions; every change callback repaints.

import { GardenApp } from "./app.js";
import type { Panel, Scope } from "./views.js";

const app = new GardenApp({ baseUrl: "" });

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const loginBox = $("login");
const ui = $("ui");
const note = $("note");
const frameUrls = new Map<string, string>();

function say(text: string): void {
  note.textContent = text;
}

// -- login ----------------------------------------------------------------

$("login-go").addEventListener("click", async () => {
  const user = $<HTMLInputElement>("login-user").value.trim();
  const pass = $<HTMLInputElement>("login-pass").value;
  try {
    await app.login(user, pass);
    loginBox.hidden = true;
    ui.hidden = false;
    render();
  } catch (err) {
    $("login-err").textContent = err instanceof Error ? err.message : "login failed";
  }
});

$("logout").addEventListener("click", async () => {
  await app.logout();
  ui.hidden = true;
  loginBox.hidden = false;
});

$<HTMLSelectElement>("mode").addEventListener("change", async (ev) => {
  const mode = (ev.target as HTMLSelectElement).value as never;
  try {
    await app.switchMode(mode);
  } catch (err) {
    say(err instanceof Error ? err.message : "mode switch failed");
  }
});

// -- top row: scope and style ----------------------------------------------

const SCOPES: { scope: Scope; label: string }[] = [
  { scope: "global", label: "Global map" },
  { scope: "plot", label: "My plot" },
];

function renderScopeRow(): void {
  const row = $("scope-row");
  row.replaceChildren();
  for (const { scope, label } of SCOPES) {
    const b = document.createElement("button");
    b.textContent = label;
    b.className = app.view.scope === scope ? "active" : "";
    b.addEventListener("click", () => {
      app.view.setScope(scope);
      render();
    });
    row.appendChild(b);
  }
  const style = document.createElement("button");
  style.textContent = app.view.style === "abstract" ? "Photo grid" : "Abstract";
  style.addEventListener("click", async () => {
    await app.toggleStyle();
    render();
  });
  row.appendChild(style);
}

// -- field ------------------------------------------------------------------

let viewBox = { x: 0, y: 0, w: 6000, h: 3000 };

function renderField(): void {
  const host = $("field");
  const view = app.fieldView();
  $("banner").className = view.stale ? "show" : "";

  if (view.style === "photo_grid" && view.snapshot && view.snapshot.refs.length > 0) {
    const grid = document.createElement("div");
    grid.className = "photo-grid";
    for (const ref of view.snapshot.refs) {
      const img = document.createElement("img");
      img.alt = ref;
      const cached = frameUrls.get(ref);
      if (cached) {
        img.src = cached;
      } else {
        app.api.fetchFrame(ref).then((blob) => {
          const url = URL.createObjectURL(blob);
          frameUrls.set(ref, url);
          img.src = url;
        }).catch(() => undefined);
      }
      grid.appendChild(img);
    }
    host.replaceChildren(grid);
    return;
  }

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `${viewBox.x} ${viewBox.y} ${viewBox.w} ${viewBox.h}`);
  for (const plot of view.plots) {
    const rect = document.createElementNS(svg.namespaceURI, "rect");
    rect.setAttribute("x", String(plot.origin[0]));
    rect.setAttribute("y", String(plot.origin[1]));
    rect.setAttribute("width", String(plot.size_mm));
    rect.setAttribute("height", String(plot.size_mm));
    rect.setAttribute("fill", plot.owner === app.store.session?.user_id ? "#16653422" : "none");
    rect.setAttribute("stroke", "#888");
    rect.setAttribute("stroke-width", "4");
    svg.appendChild(rect);
  }
  for (const plant of view.circles) {
    // radius comes straight from the server; no client-side growth math
    const c = document.createElementNS(svg.namespaceURI, "circle");
    c.setAttribute("cx", String(plant.position[0]));
    c.setAttribute("cy", String(plant.position[1]));
    c.setAttribute("r", String(Math.max(plant.radiusMm, 8)));
    c.setAttribute("fill", plant.state === "sown" ? "#a16207aa" : "#15803daa");
    svg.appendChild(c);
  }
  for (const weed of view.weeds.values()) {
    const c = document.createElementNS(svg.namespaceURI, "circle");
    c.setAttribute("cx", String(weed.position[0]));
    c.setAttribute("cy", String(weed.position[1]));
    c.setAttribute("r", "20");
    c.setAttribute("fill", "#b91c1c");
    svg.appendChild(c);
  }
  svg.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY > 0 ? 1.2 : 1 / 1.2;
    const w = Math.min(Math.max(viewBox.w * factor, 500), 6000);
    const h = (w * viewBox.h) / viewBox.w;
    viewBox = {
      x: Math.max(0, viewBox.x + (viewBox.w - w) / 2),
      y: Math.max(0, viewBox.y + (viewBox.h - h) / 2),
      w,
      h,
    };
    renderField();
  });
  let drag: { x: number; y: number } | null = null;
  svg.addEventListener("pointerdown", (ev) => {
    drag = { x: ev.clientX, y: ev.clientY };
  });
  svg.addEventListener("pointermove", (ev) => {
    if (!drag) return;
    const scale = viewBox.w / svg.clientWidth;
    viewBox.x -= (ev.clientX - drag.x) * scale;
    viewBox.y -= (ev.clientY - drag.y) * scale;
    drag = { x: ev.clientX, y: ev.clientY };
    svg.setAttribute("viewBox", `${viewBox.x} ${viewBox.y} ${viewBox.w} ${viewBox.h}`);
  });
  svg.addEventListener("pointerup", () => {
    drag = null;
  });
  svg.addEventListener("click", (ev) => void onFieldTap(svg, ev));
  host.replaceChildren(svg);
}

// Tap-to-place: convert the click to field millimetres and submit a sow at
// that spot (when the species picker has one selected).
async function onFieldTap(svg: SVGSVGElement, ev: MouseEvent): Promise<void> {
  const picker = document.getElementById("species") as HTMLSelectElement | null;
  if (!picker || !picker.value || !app.actions().sowAtTarget) return;
  const box = svg.getBoundingClientRect();
  const x = Math.round(viewBox.x + ((ev.clientX - box.left) / box.width) * viewBox.w);
  const y = Math.round(viewBox.y + ((ev.clientY - box.top) / box.height) * viewBox.h);
  const outcome = await app.placeSeed(picker.value, [x, y]);
  if (!outcome.ok && outcome.rejection) {
    say(`${outcome.rejection.message} ${outcome.rejection.reasons
      .map((r) => r.message).join("; ")}`);
  } else if (outcome.warnings.length > 0) {
    say(outcome.warnings.map((w) => w.message).join("; "));
  } else if (outcome.receipt) {
    say(`queued at position ${outcome.receipt.position}`);
  }
  render();
}

// -- bottom row: panels -------------------------------------------------------

const PANELS: { panel: Panel; label: string }[] = [
  { panel: "actions", label: "Actions" },
  { panel: "stream", label: "Queue" },
  { panel: "timeline", label: "Timeline" },
  { panel: "chat", label: "Chat" },
  { panel: "weather", label: "Weather" },
];

function renderPanelRow(): void {
  const row = $("panel-row");
  row.replaceChildren();
  for (const { panel, label } of PANELS) {
    const b = document.createElement("button");
    b.textContent = label;
    b.className = app.view.panel === panel ? "active" : "";
    b.addEventListener("click", () => {
      app.view.setPanel(panel);
      render();
    });
    row.appendChild(b);
  }
}

function renderPanel(): void {
  const host = $("panel");
  host.replaceChildren();
  switch (app.view.panel) {
    case "actions":
      renderActions(host);
      break;
    case "stream":
      renderQueue(host);
      break;
    case "timeline":
      renderTimeline(host);
      break;
    case "chat":
      renderChat(host);
      break;
    case "weather":
      void renderWeather(host);
      break;
  }
}

function renderActions(host: HTMLElement): void {
  const avail = app.actions();
  const wrap = document.createElement("div");
  wrap.className = "actions";

  const picker = document.createElement("select");
  picker.id = "species";
  for (const s of ["", "lettuce", "radish", "cornflower", "marigold", "cumin"]) {
    const opt = document.createElement("option");
    opt.value = s;
    opt.textContent = s || "pick a species";
    picker.appendChild(opt);
  }
  wrap.appendChild(picker);

  const sow = document.createElement("button");
  sow.textContent = avail.sowAtTarget ? "Sow (tap map or auto-place)" : "Sow (auto-place)";
  sow.disabled = !avail.sowAuto;
  sow.addEventListener("click", async () => {
    if (!picker.value) return say("pick a species first");
    const outcome = await app.placeSeed(picker.value);
    say(outcome.ok && outcome.receipt
      ? `queued at position ${outcome.receipt.position}`
      : outcome.rejection?.message ?? "");
    render();
  });
  wrap.appendChild(sow);

  if (avail.waterAll) {
    const water = document.createElement("button");
    water.id = "water-all";
    water.textContent = "Water All";
    water.disabled = app.waterAllDisabled;
    water.addEventListener("click", async () => {
      const outcome = await app.waterAll();
      if (outcome.deduped) return; // swallowed while in flight
      say(outcome.ok && outcome.receipt
        ? `watering queued at position ${outcome.receipt.position}`
        : outcome.rejection?.message ?? "");
      render();
    });
    wrap.appendChild(water);
  }

  if (avail.weed) {
    const weed = document.createElement("button");
    weed.id = "weed";
    weed.textContent = "Weed at plot center";
    weed.addEventListener("click", async () => {
      const me = app.store.session;
      const plot = app.store.plots.find((p) => p.plot_id === me?.plot_id);
      if (!plot) return;
      const center: [number, number] = [
        plot.origin[0] + plot.size_mm / 2,
        plot.origin[1] + plot.size_mm / 2,
      ];
      const outcome = await app.weedAt(center);
      say(outcome.ok ? "weeding queued" : outcome.rejection?.message ?? "");
      render();
    });
    wrap.appendChild(weed);
  }

  const scan = document.createElement("button");
  scan.textContent = "Scan plot";
  scan.addEventListener("click", async () => {
    const outcome = await app.scanPlot(app.store.session?.plot_id);
    say(outcome.ok ? "scan queued" : outcome.rejection?.message ?? "");
    render();
  });
  wrap.appendChild(scan);

  host.appendChild(wrap);
}

function renderQueue(host: HTMLElement): void {
  const list = document.createElement("ul");
  for (const row of app.store.queuePanel()) {
    const li = document.createElement("li");
    const pos = row.position === null ? "running" : `#${row.position}`;
    li.textContent =
      `${pos} ${row.kind} by ${row.user_id}` +
      (row.position !== null ? ` (~${Math.round(row.cumulative_wait_s)}s wait)` : "");
    list.appendChild(li);
  }
  if (!list.firstChild) list.textContent = "queue is empty";
  host.appendChild(list);
}

function renderTimeline(host: HTMLElement): void {
  const filter = document.createElement("select");
  for (const [value, label] of [["", "everyone"], ["robot", "robot only"]]) {
    const opt = document.createElement("option");
    opt.value = value ?? "";
    opt.textContent = label ?? "";
    filter.appendChild(opt);
  }
  host.appendChild(filter);
  const list = document.createElement("ul");
  const paint = () => {
    list.replaceChildren();
    const events = app.store.timelineView(
      filter.value ? { actor: filter.value } : {},
    );
    for (const e of events.slice(-200).reverse()) {
      const li = document.createElement("li");
      li.textContent = `${e.timestamp} ${e.actor} ${e.kind}`;
      list.appendChild(li);
    }
  };
  filter.addEventListener("change", paint);
  paint();
  host.appendChild(list);
}

function renderChat(host: HTMLElement): void {
  const list = document.createElement("ul");
  for (const m of app.store.chat.slice(-100)) {
    const li = document.createElement("li");
    li.textContent = `${m.user_id}: ${m.message}`;
    list.appendChild(li);
  }
  host.appendChild(list);
  const input = document.createElement("input");
  input.placeholder = "say something";
  input.addEventListener("keydown", async (ev) => {
    if (ev.key !== "Enter" || !input.value.trim()) return;
    await app.postChat(input.value.trim());
    input.value = "";
  });
  host.appendChild(input);
}

async function renderWeather(host: HTMLElement): Promise<void> {
  try {
    const doc = await app.api.weather();
    const pre = document.createElement("pre");
    pre.textContent = JSON.stringify(doc, null, 2);
    host.replaceChildren(pre);
  } catch {
    host.textContent = "weather unavailable";
  }
}

// -- paint loop ---------------------------------------------------------------

function render(): void {
  const me = app.store.session;
  $("whoami").textContent = me ? `${me.display_name} (${me.plot_id}, ${me.mode})` : "";
  if (me) $<HTMLSelectElement>("mode").value = me.mode;
  renderScopeRow();
  renderField();
  renderPanelRow();
  renderPanel();
}

app.onChange = () => {
  if (!ui.hidden) render();
};

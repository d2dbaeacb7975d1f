/** DOM wiring for the mesh explorer. */

import { getFixtures, postMesh } from "./api.js";
import { exportConfig } from "./config.js";
import { renderMesh } from "./render.js";
import { ExplorerState } from "./state.js";
import { MeshParams } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

interface SliderSpec {
  id: string;
  get: (p: MeshParams) => number;
  set: (v: number) => Partial<MeshParams>;
}

function sliders(state: ExplorerState): SliderSpec[] {
  const p = () => state.params;
  return [
    { id: "cutoff", get: (q) => q.cutoff, set: (v) => ({ cutoff: v }) },
    {
      id: "max_edge_inner",
      get: (q) => q.max_edge[0],
      set: (v) => ({ max_edge: [v, p().max_edge[1]] }),
    },
    {
      id: "max_edge_outer",
      get: (q) => q.max_edge[1],
      set: (v) => ({ max_edge: [p().max_edge[0], v] }),
    },
    { id: "min_angle", get: (q) => q.min_angle, set: (v) => ({ min_angle: v }) },
    {
      id: "offset_inner",
      get: (q) => q.offset[0],
      set: (v) => ({ offset: [v, p().offset[1]] }),
    },
    {
      id: "offset_outer",
      get: (q) => q.offset[1],
      set: (v) => ({ offset: [p().offset[0], v] }),
    },
    {
      id: "n_initial_x",
      get: (q) => q.n_initial[0],
      set: (v) => ({ n_initial: [v, p().n_initial[1]] }),
    },
    {
      id: "n_initial_y",
      get: (q) => q.n_initial[1],
      set: (v) => ({ n_initial: [p().n_initial[0], v] }),
    },
  ];
}

export function boot(): void {
  const canvas = el<HTMLCanvasElement>("mesh-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");

  const state = new ExplorerState((req) => postMesh(req));
  const specs = sliders(state);

  for (const spec of specs) {
    const input = el<HTMLInputElement>(spec.id);
    const label = el<HTMLSpanElement>(`${spec.id}-value`);
    input.value = String(spec.get(state.params));
    label.textContent = input.value;
    input.addEventListener("input", () => {
      state.setParams(spec.set(Number(input.value)));
    });
  }

  for (const name of ["boundary", "points", "regions"] as const) {
    el<HTMLInputElement>(`overlay-${name}`).addEventListener("change", () =>
      state.toggleOverlay(name),
    );
  }

  el<HTMLButtonElement>("export-btn").addEventListener("click", () => {
    el<HTMLTextAreaElement>("export-out").value = exportConfig(state.params);
  });

  const banner = el<HTMLDivElement>("banner");
  const stats = el<HTMLDivElement>("stats");
  const spinner = el<HTMLSpanElement>("spinner");

  state.subscribe((snap) => {
    for (const spec of specs) {
      el<HTMLSpanElement>(`${spec.id}-value`).textContent = String(
        spec.get(snap.params),
      );
    }
    spinner.style.visibility = snap.inFlight ? "visible" : "hidden";
    if (snap.error) {
      banner.textContent = `request failed — ${snap.error}`;
      banner.className = "banner error";
    } else if (snap.lastResponse?.truncated) {
      banner.textContent =
        "mesh exceeds the transfer cap; statistics only (coarsen the parameters)";
      banner.className = "banner warn";
    } else {
      banner.textContent = "";
      banner.className = "banner";
    }
    const s = snap.lastResponse?.stats;
    stats.textContent = s
      ? `vertices ${s.n_vertices} · triangles ${s.n_triangles} · ` +
        `min angle ${s.min_angle.toFixed(2)}° · ` +
        `max inner edge ${s.max_inner_edge.toFixed(3)} km · ` +
        `area ${s.area.toFixed(1)} km²`
      : "no mesh yet";
    if (snap.lastResponse) {
      renderMesh(
        ctx,
        { width: canvas.width, height: canvas.height },
        snap.lastResponse,
        snap.overlays,
      );
    }
  });

  void getFixtures()
    .then((names) => {
      const select = el<HTMLSelectElement>("fixture-select");
      select.innerHTML = "";
      for (const name of names) {
        const opt = document.createElement("option");
        opt.value = name;
        opt.textContent = name;
        select.appendChild(opt);
      }
      select.addEventListener("change", () => state.setBoundary(select.value));
    })
    .catch(() => {
      banner.textContent = "mesh service unreachable — run `lgcp serve`";
      banner.className = "banner error";
    });

  void state.refresh();
}

if (typeof document !== "undefined" && document.getElementById("mesh-canvas")) {
  boot();
}

/** Explorer state: slider clamping, debounce, latest-wins request handling.
 *
 * The UI never computes meshes locally; every triangulation comes from the
 * service.  Rapid slider changes are debounced (refinement costs seconds at
 * realistic sizes) and tagged with a request id so a slow stale response can
 * never overdraw a newer one.
 */

import {
  DEFAULT_PARAMS,
  MeshParams,
  MeshRequest,
  MeshResponse,
  OverlayToggles,
  PARAM_LIMITS,
} from "./types.js";

export const DEBOUNCE_MS = 300;

export type FetchMesh = (req: MeshRequest) => Promise<MeshResponse>;
export type Scheduler = (fn: () => void, ms: number) => number;
export type Canceler = (id: number) => void;

function clamp(v: number, min: number, max: number): number {
  if (!Number.isFinite(v)) return min;
  return Math.min(max, Math.max(min, v));
}

/** Clamp arbitrary input onto the documented valid ranges. */
export function clampParams(p: MeshParams): MeshParams {
  const L = PARAM_LIMITS;
  const nInit: [number, number] = [
    Math.round(clamp(p.n_initial[0], L.n_initial.min, L.n_initial.max)),
    Math.round(clamp(p.n_initial[1], L.n_initial.min, L.n_initial.max)),
  ];
  const inner = clamp(p.max_edge[0], L.max_edge_inner.min, L.max_edge_inner.max);
  return {
    cutoff: clamp(p.cutoff, L.cutoff.min, L.cutoff.max),
    max_edge: [inner, Math.max(inner, clamp(p.max_edge[1], L.max_edge_outer.min, L.max_edge_outer.max))],
    min_angle: clamp(p.min_angle, L.min_angle.min, L.min_angle.max),
    offset: [
      clamp(p.offset[0], L.offset_inner.min, L.offset_inner.max),
      clamp(p.offset[1], L.offset_outer.min, L.offset_outer.max),
    ],
    n_initial: nInit,
  };
}

export interface StateSnapshot {
  params: MeshParams;
  boundary: string;
  lastResponse: MeshResponse | null;
  overlays: OverlayToggles;
  inFlight: boolean;
  error: string | null;
}

export class ExplorerState {
  params: MeshParams = { ...DEFAULT_PARAMS };
  boundary = "chorley";
  lastResponse: MeshResponse | null = null;
  overlays: OverlayToggles = { boundary: true, points: false, regions: true };
  error: string | null = null;

  private fetchMesh: FetchMesh;
  private schedule: Scheduler;
  private cancel: Canceler;
  private listeners: Array<(s: StateSnapshot) => void> = [];
  private timer: number | null = null;
  private nextRequestId = 0;
  private latestAppliedId = -1;
  private inFlightCount = 0;

  constructor(
    fetchMesh: FetchMesh,
    schedule: Scheduler = (fn, ms) => setTimeout(fn, ms) as unknown as number,
    cancel: Canceler = (id) => clearTimeout(id),
  ) {
    this.fetchMesh = fetchMesh;
    this.schedule = schedule;
    this.cancel = cancel;
  }

  get inFlight(): boolean {
    return this.inFlightCount > 0;
  }

  snapshot(): StateSnapshot {
    return {
      params: { ...this.params },
      boundary: this.boundary,
      lastResponse: this.lastResponse,
      overlays: { ...this.overlays },
      inFlight: this.inFlight,
      error: this.error,
    };
  }

  subscribe(fn: (s: StateSnapshot) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const fn of this.listeners) fn(snap);
  }

  /** Slider edit: clamp, then debounce a refresh. */
  setParams(p: Partial<MeshParams>): void {
    this.params = clampParams({ ...this.params, ...p });
    this.debounceRefresh();
    this.emit();
  }

  setBoundary(name: string): void {
    this.boundary = name;
    this.debounceRefresh();
    this.emit();
  }

  toggleOverlay(name: keyof OverlayToggles): void {
    this.overlays[name] = !this.overlays[name];
    this.emit(); // re-render only; geometry untouched
  }

  private debounceRefresh(): void {
    if (this.timer !== null) this.cancel(this.timer);
    this.timer = this.schedule(() => {
      this.timer = null;
      void this.refresh();
    }, DEBOUNCE_MS);
  }

  /** Issue a request now.  Latest-wins: responses for superseded ids are
   * dropped; on failure the previous mesh is retained with an error banner. */
  async refresh(): Promise<void> {
    const id = this.nextRequestId++;
    this.inFlightCount++;
    this.emit();
    try {
      const response = await this.fetchMesh({
        boundary: this.boundary,
        ...this.params,
      });
      if (id > this.latestAppliedId) {
        this.latestAppliedId = id;
        this.lastResponse = response;
        this.error = null;
      }
    } catch (err) {
      if (id > this.latestAppliedId) {
        this.latestAppliedId = id;
        this.error = err instanceof Error ? err.message : String(err);
        // previous mesh retained
      }
    } finally {
      this.inFlightCount--;
      this.emit();
    }
  }
}

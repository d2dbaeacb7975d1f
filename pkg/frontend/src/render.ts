/** Canvas rendering of a mesh response.
 *
 * Canvas (not SVG): realistic meshes carry >10k triangles and SVG DOM nodes
 * would wreck the frame rate.  The draw routine is written against a minimal
 * 2D-context interface so it can be unit-tested without a browser.
 */

import { MeshResponse, OverlayToggles } from "./types.js";

export interface Ctx2d {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

export interface Viewport {
  width: number;
  height: number;
}

export interface Transform {
  scale: number;
  tx: number;
  ty: number;
}

/** Fit the mesh bounding box into the viewport with a small margin. */
export function fitTransform(
  vertices: [number, number][],
  view: Viewport,
  margin = 10,
): Transform {
  let xmin = Infinity;
  let ymin = Infinity;
  let xmax = -Infinity;
  let ymax = -Infinity;
  for (const [x, y] of vertices) {
    if (x < xmin) xmin = x;
    if (x > xmax) xmax = x;
    if (y < ymin) ymin = y;
    if (y > ymax) ymax = y;
  }
  const w = Math.max(xmax - xmin, 1e-9);
  const h = Math.max(ymax - ymin, 1e-9);
  const scale = Math.min(
    (view.width - 2 * margin) / w,
    (view.height - 2 * margin) / h,
  );
  return {
    scale,
    tx: margin - xmin * scale + ((view.width - 2 * margin) - w * scale) / 2,
    // canvas y grows downward; flip so north stays up
    ty: view.height - margin + ymin * scale - ((view.height - 2 * margin) - h * scale) / 2,
  };
}

export function toScreen(t: Transform, x: number, y: number): [number, number] {
  return [t.tx + x * t.scale, t.ty - y * t.scale];
}

export interface RenderCounts {
  triangles: number;
  boundarySegments: number;
  points: number;
}

export const COLORS = {
  inner: "#9fd3ff",
  outer: "#e4e9ee",
  edge: "#5b7a94",
  boundary: "#c0392b",
  point: "#2c3e50",
};

/** Draw the mesh; returns what was drawn for introspection/tests. */
export function renderMesh(
  ctx: Ctx2d,
  view: Viewport,
  mesh: MeshResponse,
  overlays: OverlayToggles,
  boundaryRing: [number, number][] | null = null,
  points: [number, number][] | null = null,
): RenderCounts {
  ctx.clearRect(0, 0, view.width, view.height);
  const counts: RenderCounts = { triangles: 0, boundarySegments: 0, points: 0 };
  if (mesh.truncated || !mesh.vertices || !mesh.triangles) return counts;
  const t = fitTransform(mesh.vertices, view);
  const marker = mesh.inner_marker ?? [];

  ctx.lineWidth = 0.5;
  ctx.strokeStyle = COLORS.edge;
  for (const [a, b, c] of mesh.triangles) {
    const inner =
      overlays.regions && marker.length > 0 && marker[a] && marker[b] && marker[c];
    ctx.fillStyle = inner ? COLORS.inner : COLORS.outer;
    ctx.beginPath();
    const [ax, ay] = toScreen(t, mesh.vertices[a][0], mesh.vertices[a][1]);
    const [bx, by] = toScreen(t, mesh.vertices[b][0], mesh.vertices[b][1]);
    const [cx, cy] = toScreen(t, mesh.vertices[c][0], mesh.vertices[c][1]);
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.lineTo(cx, cy);
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
    counts.triangles++;
  }

  if (overlays.boundary && boundaryRing && boundaryRing.length > 1) {
    ctx.strokeStyle = COLORS.boundary;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const [x0, y0] = toScreen(t, boundaryRing[0][0], boundaryRing[0][1]);
    ctx.moveTo(x0, y0);
    for (let i = 1; i < boundaryRing.length; i++) {
      const [x, y] = toScreen(t, boundaryRing[i][0], boundaryRing[i][1]);
      ctx.lineTo(x, y);
      counts.boundarySegments++;
    }
    ctx.closePath();
    ctx.stroke();
  }

  if (overlays.points && points) {
    ctx.fillStyle = COLORS.point;
    for (const [px, py] of points) {
      const [x, y] = toScreen(t, px, py);
      ctx.beginPath();
      ctx.arc(x, y, 1.5, 0, 2 * Math.PI);
      ctx.fill();
      counts.points++;
    }
  }
  return counts;
}

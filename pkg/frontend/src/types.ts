/** Request/response shapes of the mesh service JSON API. */

export interface MeshRequest {
  boundary: string | GeoJsonPolygon;
  cutoff: number;
  max_edge: [number, number];
  min_angle: number;
  offset: [number, number];
  n_initial: [number, number];
}

export interface GeoJsonPolygon {
  type: "Polygon";
  coordinates: number[][][];
}

export interface MeshStats {
  n_vertices: number;
  n_triangles: number;
  min_angle: number;
  max_inner_edge: number;
  area: number;
}

export interface MeshResponse {
  stats: MeshStats;
  truncated: boolean;
  vertices?: [number, number][];
  triangles?: [number, number, number][];
  inner_marker?: boolean[];
}

export interface OverlayToggles {
  boundary: boolean;
  points: boolean;
  regions: boolean;
}

/** Parameter values the sliders edit; boundary is chosen separately. */
export interface MeshParams {
  cutoff: number;
  max_edge: [number, number];
  min_angle: number;
  offset: [number, number];
  n_initial: [number, number];
}

export const PARAM_LIMITS = {
  cutoff: { min: 0.05, max: 2.0 },
  max_edge_inner: { min: 0.1, max: 4.0 },
  max_edge_outer: { min: 0.1, max: 8.0 },
  min_angle: { min: 20.0, max: 33.5 },
  offset_inner: { min: 0.1, max: 5.0 },
  offset_outer: { min: 0.5, max: 10.0 },
  n_initial: { min: 4, max: 64 },
} as const;

export const DEFAULT_PARAMS: MeshParams = {
  cutoff: 0.4,
  max_edge: [0.6, 1.2],
  min_angle: 27.0,
  offset: [0.5, 2.0],
  n_initial: [16, 16],
};

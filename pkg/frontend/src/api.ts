/** Thin JSON client for the mesh service. */

import { MeshRequest, MeshResponse } from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export async function getFixtures(
  fetchImpl: FetchLike = fetch,
  base = "",
): Promise<string[]> {
  const r = await fetchImpl(`${base}/fixtures`);
  if (!r.ok) throw new Error(`fixtures: HTTP ${r.status}`);
  const body = (await r.json()) as { fixtures: string[] };
  return body.fixtures;
}

export async function postMesh(
  req: MeshRequest,
  fetchImpl: FetchLike = fetch,
  base = "",
): Promise<MeshResponse> {
  const r = await fetchImpl(`${base}/mesh`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(req),
  });
  const body = (await r.json()) as Record<string, unknown>;
  if (!r.ok) {
    if (typeof body.errors === "object" && body.errors !== null) {
      const parts = Object.entries(body.errors as Record<string, string>).map(
        ([k, v]) => `${k}: ${v}`,
      );
      throw new Error(parts.join("; "));
    }
    throw new Error(String(body.error ?? `HTTP ${r.status}`));
  }
  return body as unknown as MeshResponse;
}

/** Export the chosen mesh parameters as the CLI's `[mesh]` TOML section.
 *
 * The emitted text must parse through the CLI configuration loader and
 * round-trip: export -> parse -> export is a fixpoint.
 */

import { MeshParams } from "./types.js";

/** TOML float literal: always carries a decimal point. */
function tomlFloat(v: number): string {
  if (Number.isInteger(v)) return `${v}.0`;
  return String(v);
}

function tomlFloatPair(v: [number, number]): string {
  return `[${tomlFloat(v[0])}, ${tomlFloat(v[1])}]`;
}

export function exportConfig(params: MeshParams): string {
  return [
    "[mesh]",
    `cutoff = ${tomlFloat(params.cutoff)}`,
    `max_edge = ${tomlFloatPair(params.max_edge)}`,
    `min_angle = ${tomlFloat(params.min_angle)}`,
    `offset = ${tomlFloatPair(params.offset)}`,
    `n_initial = [${params.n_initial[0]}, ${params.n_initial[1]}]`,
    "",
  ].join("\n");
}

/** Parse a `[mesh]` fragment produced by exportConfig (or hand-edited with
 * the same shape).  Throws on unknown keys or malformed values so the
 * fixpoint property is honest. */
export function parseConfig(text: string): MeshParams {
  const params: Partial<Record<string, number | [number, number]>> = {};
  let inMesh = false;
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (line === "" || line.startsWith("#")) continue;
    if (line.startsWith("[")) {
      inMesh = line === "[mesh]";
      continue;
    }
    if (!inMesh) continue;
    const m = line.match(/^([a-z_]+)\s*=\s*(.+)$/);
    if (!m) throw new Error(`malformed line: ${line}`);
    const [, key, value] = m;
    if (key === "cutoff" || key === "min_angle") {
      const v = Number(value);
      if (!Number.isFinite(v)) throw new Error(`${key}: not a number`);
      params[key] = v;
    } else if (key === "max_edge" || key === "offset" || key === "n_initial") {
      const pm = value.match(/^\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]$/);
      if (!pm) throw new Error(`${key}: not a pair`);
      const a = Number(pm[1]);
      const b = Number(pm[2]);
      if (!Number.isFinite(a) || !Number.isFinite(b)) {
        throw new Error(`${key}: not numeric`);
      }
      params[key] = [a, b];
    } else {
      throw new Error(`unknown mesh key: ${key}`);
    }
  }
  for (const key of ["cutoff", "max_edge", "min_angle", "offset", "n_initial"]) {
    if (!(key in params)) throw new Error(`missing mesh key: ${key}`);
  }
  return {
    cutoff: params.cutoff as number,
    max_edge: params.max_edge as [number, number],
    min_angle: params.min_angle as number,
    offset: params.offset as [number, number],
    n_initial: params.n_initial as [number, number],
  };
}

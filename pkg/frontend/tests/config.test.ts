import { describe, expect, it } from "vitest";

import { exportConfig, parseConfig } from "../src/config";
import { DEFAULT_PARAMS } from "../src/types";

describe("exportConfig", () => {
  it("emits the default parameter set with cutoff = 0.4", () => {
    const text = exportConfig(DEFAULT_PARAMS);
    expect(text).toContain("[mesh]");
    expect(text).toContain("cutoff = 0.4");
    expect(text).toContain("max_edge = [0.6, 1.2]");
    expect(text).toContain("min_angle = 27.0");
    expect(text).toContain("offset = [0.5, 2.0]");
    expect(text).toContain("n_initial = [16, 16]");
  });

  it("omits no mesh field", () => {
    const text = exportConfig(DEFAULT_PARAMS);
    for (const key of ["cutoff", "max_edge", "min_angle", "offset", "n_initial"]) {
      expect(text).toMatch(new RegExp(`^${key} = `, "m"));
    }
  });

  it("always writes floats with a decimal point", () => {
    const text = exportConfig({
      cutoff: 1,
      max_edge: [2, 4],
      min_angle: 30,
      offset: [1, 3],
      n_initial: [8, 8],
    });
    expect(text).toContain("cutoff = 1.0");
    expect(text).toContain("max_edge = [2.0, 4.0]");
    expect(text).toContain("n_initial = [8, 8]");
  });

  it("export -> parse -> export is a fixpoint", () => {
    const first = exportConfig(DEFAULT_PARAMS);
    const second = exportConfig(parseConfig(first));
    expect(second).toBe(first);

    const odd = exportConfig({
      cutoff: 0.35,
      max_edge: [0.55, 1.25],
      min_angle: 26.5,
      offset: [0.4, 1.8],
      n_initial: [12, 20],
    });
    expect(exportConfig(parseConfig(odd))).toBe(odd);
  });
});

describe("parseConfig", () => {
  it("reads the exported fragment back", () => {
    const p = parseConfig(exportConfig(DEFAULT_PARAMS));
    expect(p).toEqual(DEFAULT_PARAMS);
  });

  it("ignores comments, blank lines and other sections", () => {
    const p = parseConfig(
      "# exported\n[data]\nsource = [1, 2]\n\n" + exportConfig(DEFAULT_PARAMS),
    );
    expect(p.cutoff).toBe(0.4);
  });

  it("rejects unknown keys", () => {
    expect(() => parseConfig("[mesh]\ncutof = 0.4\n")).toThrow(/unknown/);
  });

  it("rejects missing keys", () => {
    expect(() => parseConfig("[mesh]\ncutoff = 0.4\n")).toThrow(/missing/);
  });

  it("rejects malformed pairs", () => {
    const text = exportConfig(DEFAULT_PARAMS).replace(
      "max_edge = [0.6, 1.2]",
      "max_edge = [0.6]",
    );
    expect(() => parseConfig(text)).toThrow(/pair/);
  });
});

import { readFileSync, writeFileSync, mkdtempSync, cpSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { openDataset } from "../src/dataset.js";
import { parseManifest } from "../src/manifest.js";
import { CloudParseError, parseCloud, RECORD_SIZE } from "../src/svpc.js";

const here = dirname(fileURLToPath(import.meta.url));
const FIXTURE = join(here, "fixture");
const MANIFEST = join(FIXTURE, "manifest.txt");

const expected = JSON.parse(readFileSync(join(FIXTURE, "expected.json"), "utf-8"));

describe("openDataset", () => {
  it("reports the split counts without loading points", () => {
    const ds = openDataset(MANIFEST);
    expect(ds.name).toBe(expected.manifest_name);
    expect(ds.entries().length).toBe(expected.plots);
    expect(ds.splitCounts()).toEqual(expected.split_counts);
  });

  it("filters entries by split and preserves manifest order", () => {
    const ds = openDataset(MANIFEST);
    const val = ds.entries("val");
    expect(val.length).toBe(expected.split_counts.val);
    const all = ds.entries();
    const valInOrder = all.filter((e) => e.split === "val");
    expect(val).toEqual(valInOrder);
  });

  it("rejects unknown split names", () => {
    const ds = openDataset(MANIFEST);
    expect(() => ds.entries("validation")).toThrow(/unknown split/);
  });

  it("handles an empty manifest", () => {
    const text = "# sylva-manifest v1\nname = Sim_0_0\nscenes = \nplots = 0\n";
    const manifest = parseManifest(text);
    expect(manifest.entries.length).toBe(0);
  });

  it("fails at open time when a referenced plot file is missing", () => {
    const tmp = mkdtempSync(join(tmpdir(), "sylva-reader-"));
    try {
      cpSync(MANIFEST, join(tmp, "manifest.txt"));
      // No plots directory copied: open must fail, not a later iterate.
      expect(() => openDataset(join(tmp, "manifest.txt"))).toThrow(/plot file missing/);
    } finally {
      rmSync(tmp, { recursive: true, force: true });
    }
  });
});

describe("loadPlot", () => {
  it("returns arrays bitwise equal to the file records", () => {
    const ds = openDataset(MANIFEST);
    const entry = ds.entries()[0];
    const arrays = ds.loadPlot(entry);
    expect(arrays.count).toBe(expected.first_plot.points);

    // Independent oracle: walk the raw bytes with explicit offsets.
    const raw = readFileSync(ds.plotPath(entry));
    const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
    const count = Number(view.getBigUint64(6, true));
    expect(count).toBe(arrays.count);
    const stride = RECORD_SIZE;
    const checkRows = new Set<number>([0, 1, count - 1]);
    for (let i = 0; i < count; i += 97) checkRows.add(i);
    for (const i of checkRows) {
      const off = 14 + i * stride;
      // Bit-level equality on doubles via BigUint64 views.
      expect(view.getBigUint64(off, true)).toBe(
        new DataView(arrays.positions.buffer).getBigUint64(8 * (3 * i), true),
      );
      expect(view.getBigUint64(off + 8, true)).toBe(
        new DataView(arrays.positions.buffer).getBigUint64(8 * (3 * i + 1), true),
      );
      expect(view.getBigUint64(off + 16, true)).toBe(
        new DataView(arrays.positions.buffer).getBigUint64(8 * (3 * i + 2), true),
      );
      expect(view.getUint32(off + 24, true)).toBe(arrays.instance[i]);
      expect(view.getUint8(off + 28)).toBe(arrays.semantic[i]);
      expect(view.getUint8(off + 29)).toBe(arrays.returnNumber[i]);
      expect(view.getBigInt64(off + 30, true)).toBe(arrays.pulse[i]);
      expect(view.getBigUint64(off + 38, true)).toBe(
        new DataView(arrays.time.buffer).getBigUint64(8 * i, true),
      );
    }
  });

  it("matches the manifest's recorded point count for every plot", () => {
    const ds = openDataset(MANIFEST);
    for (const entry of ds.entries()) {
      const arrays = ds.loadPlot(entry);
      expect(arrays.count).toBe(entry.points);
    }
  });

  it("only yields known semantic codes", () => {
    const ds = openDataset(MANIFEST);
    const arrays = ds.loadPlot(0);
    for (let i = 0; i < arrays.count; i++) {
      expect(arrays.semantic[i]).toBeLessThanOrEqual(2);
    }
  });

  it("rejects truncated files with a byte offset", () => {
    const ds = openDataset(MANIFEST);
    const raw = readFileSync(ds.plotPath(ds.entries()[0]));
    expect(() => parseCloud(raw.subarray(0, raw.byteLength - 13))).toThrow(CloudParseError);
    expect(() => parseCloud(raw.subarray(0, raw.byteLength - 13))).toThrow(/byte/);
  });

  it("rejects a corrupt magic", () => {
    const bogus = new Uint8Array(64);
    bogus.set([0x4e, 0x4f, 0x50, 0x45]); // "NOPE"
    expect(() => parseCloud(bogus)).toThrow(/bad magic/);
  });
});

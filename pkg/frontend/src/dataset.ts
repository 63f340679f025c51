/**
 * Dataset handle: lazy plot loading over a parsed manifest.
 *
 * Opening validates that every referenced plot file exists (fail fast);
 * point data is only read when a plot is loaded or iterated.
 */

import { readFileSync, existsSync } from "node:fs";
import { dirname, join } from "node:path";

import { Manifest, ManifestEntry, parseManifest } from "./manifest.js";
import {
  CylinderSample,
  cutCylinder,
  gridCenters,
  randomCenters,
} from "./sampler.js";
import { parseCloud, PlotArrays } from "./svpc.js";

export const SPLITS = ["train", "val", "test"] as const;
export type SplitName = (typeof SPLITS)[number];

export class DatasetHandle {
  constructor(
    readonly manifest: Manifest,
    private readonly baseDir: string,
  ) {}

  get name(): string {
    return this.manifest.name;
  }

  get scenes(): string[] {
    return this.manifest.scenes;
  }

  /** Entries in manifest order, optionally filtered by split. */
  entries(split?: string): ManifestEntry[] {
    if (split === undefined) return this.manifest.entries;
    if (!(SPLITS as readonly string[]).includes(split)) {
      throw new Error(`unknown split name ${JSON.stringify(split)}`);
    }
    return this.manifest.entries.filter((e) => e.split === split);
  }

  splitCounts(): Record<SplitName, number> {
    const counts: Record<SplitName, number> = { train: 0, val: 0, test: 0 };
    for (const e of this.manifest.entries) {
      if (e.split in counts) counts[e.split as SplitName] += 1;
    }
    return counts;
  }

  densities(): number[] {
    return this.manifest.entries.map((e) => e.density);
  }

  plotPath(entry: ManifestEntry): string {
    if (!entry.path) {
      throw new Error(
        `plot ${entry.scene} ${entry.tile} has no file path in the manifest`,
      );
    }
    return join(this.baseDir, entry.path);
  }

  /** Load one plot's records as dense arrays (bitwise file contents). */
  loadPlot(plot: number | ManifestEntry): PlotArrays {
    const entry =
      typeof plot === "number" ? this.manifest.entries[plot] : plot;
    if (!entry) {
      throw new Error(`plot index out of range`);
    }
    const arrays = parseCloud(readFileSync(this.plotPath(entry)));
    if (arrays.count !== entry.points) {
      throw new Error(
        `plot ${entry.path}: manifest says ${entry.points} points, file has ${arrays.count}`,
      );
    }
    return arrays;
  }

  /**
   * Iterate cylinder samples over the plots of a split.
   *
   * Grid mode (`{stride}`) walks the centered lattice; random mode
   * (`{count, seed}`) reproduces the producer's seeded centers exactly.
   */
  *iterCylinders(
    split: string | undefined,
    radius: number,
    mode: { stride: number } | { count: number; seed: number | bigint },
  ): Generator<CylinderSample & { entry: ManifestEntry }> {
    for (const entry of this.entries(split)) {
      const arrays = this.loadPlot(entry);
      const centers =
        "stride" in mode
          ? gridCenters(entry.bounds, mode.stride)
          : randomCenters(entry.bounds, mode.count, mode.seed);
      for (const center of centers) {
        yield { ...cutCylinder(arrays, center, radius), entry };
      }
    }
  }
}

/** Open a dataset manifest, verifying every referenced plot file exists. */
export function openDataset(manifestPath: string): DatasetHandle {
  if (!existsSync(manifestPath)) {
    throw new Error(`manifest not found: ${manifestPath}`);
  }
  const manifest = parseManifest(readFileSync(manifestPath, "utf-8"));
  const baseDir = dirname(manifestPath);
  for (const entry of manifest.entries) {
    if (entry.path !== undefined) {
      const p = join(baseDir, entry.path);
      if (!existsSync(p)) {
        throw new Error(`plot file missing: ${p}`);
      }
    }
  }
  return new DatasetHandle(manifest, baseDir);
}

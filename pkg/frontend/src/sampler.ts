/**
 * Cylinder sampling that reproduces the dataset producer's centers exactly:
 * the same keyed hash stream for random mode and the same centered lattice
 * for grid mode, evaluated with identical floating-point expressions.
 */

import { Bounds } from "./manifest.js";
import { PURPOSE_CENTER, u01 } from "./rng.js";
import { PlotArrays } from "./svpc.js";

export interface CylinderSample {
  center: [number, number];
  radius: number;
  positions: Float64Array;
  instance: Uint32Array;
  semantic: Uint8Array;
  returnNumber: Uint8Array;
  count: number;
}

/** Centered lattice: per axis max(1, ceil(size / stride)) columns. */
export function gridCenters(bounds: Bounds, stride: number): Array<[number, number]> {
  if (!(stride > 0)) {
    throw new Error("stride must be positive");
  }
  const axis = (lo: number, size: number): number[] => {
    const n = Math.max(1, Math.ceil(size / stride - 1e-9));
    const mid = lo + 0.5 * size;
    const start = mid - 0.5 * (n - 1) * stride;
    const out: number[] = [];
    for (let i = 0; i < n; i++) out.push(start + i * stride);
    return out;
  };
  const xs = axis(bounds.xmin, bounds.xmax - bounds.xmin);
  const ys = axis(bounds.ymin, bounds.ymax - bounds.ymin);
  const centers: Array<[number, number]> = [];
  for (const x of xs) for (const y of ys) centers.push([x, y]);
  return centers;
}

/** Seed-keyed uniform centers, one draw pair per cylinder ordinal. */
export function randomCenters(
  bounds: Bounds,
  count: number,
  seed: number | bigint,
): Array<[number, number]> {
  if (count < 0) {
    throw new Error("count must be >= 0");
  }
  const width = bounds.xmax - bounds.xmin;
  const height = bounds.ymax - bounds.ymin;
  const centers: Array<[number, number]> = [];
  for (let k = 0; k < count; k++) {
    const cx = bounds.xmin + u01(seed, PURPOSE_CENTER, k, 0) * width;
    const cy = bounds.ymin + u01(seed, PURPOSE_CENTER, k, 1) * height;
    centers.push([cx, cy]);
  }
  return centers;
}

/** Cut one cylinder out of a plot's arrays (closed disc membership). */
export function cutCylinder(
  plot: PlotArrays,
  center: [number, number],
  radius: number,
): CylinderSample {
  const r2 = radius * radius;
  const keep: number[] = [];
  for (let i = 0; i < plot.count; i++) {
    const dx = plot.positions[3 * i] - center[0];
    const dy = plot.positions[3 * i + 1] - center[1];
    if (dx * dx + dy * dy <= r2) keep.push(i);
  }
  const n = keep.length;
  const positions = new Float64Array(n * 3);
  const instance = new Uint32Array(n);
  const semantic = new Uint8Array(n);
  const returnNumber = new Uint8Array(n);
  for (let j = 0; j < n; j++) {
    const i = keep[j];
    positions[3 * j] = plot.positions[3 * i];
    positions[3 * j + 1] = plot.positions[3 * i + 1];
    positions[3 * j + 2] = plot.positions[3 * i + 2];
    instance[j] = plot.instance[i];
    semantic[j] = plot.semantic[i];
    returnNumber[j] = plot.returnNumber[i];
  }
  return { center, radius, positions, instance, semantic, returnNumber, count: n };
}

/** Parser for the key-value dataset manifest. */

export class ManifestParseError extends Error {
  constructor(message: string, public readonly line?: number) {
    super(line === undefined ? message : `${message} (line ${line})`);
    this.name = "ManifestParseError";
  }
}

export interface Bounds {
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
}

export interface ManifestEntry {
  scene: string;
  tile: [number, number];
  split: string;
  points: number;
  density: number;
  bounds: Bounds;
  path?: string;
}

export interface Manifest {
  name: string;
  scenes: string[];
  entries: ManifestEntry[];
}

const MAGIC = "# sylva-manifest v1";

export function parseManifest(text: string): Manifest {
  const lines = text.split(/\r?\n/);
  if (lines[0] !== MAGIC) {
    throw new ManifestParseError("not a manifest file", 1);
  }
  let name: string | undefined;
  let scenes: string[] = [];
  let count = 0;
  const blocks = new Map<number, Map<string, string>>();

  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) {
      throw new ManifestParseError("manifest line is not key = value", i + 1);
    }
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (key === "name") {
      name = value;
    } else if (key === "scenes") {
      scenes = value ? value.split(",") : [];
    } else if (key === "plots") {
      count = parseInt(value, 10);
    } else if (key.startsWith("plot.")) {
      const rest = key.slice("plot.".length);
      const dot = rest.indexOf(".");
      if (dot < 0) throw new ManifestParseError(`bad plot key ${key}`, i + 1);
      const idx = parseInt(rest.slice(0, dot), 10);
      const field = rest.slice(dot + 1);
      if (!blocks.has(idx)) blocks.set(idx, new Map());
      blocks.get(idx)!.set(field, value);
    } else {
      throw new ManifestParseError(`unknown manifest key ${key}`, i + 1);
    }
  }
  if (name === undefined) {
    throw new ManifestParseError("manifest missing name");
  }

  const entries: ManifestEntry[] = [];
  for (let i = 0; i < count; i++) {
    const block = blocks.get(i);
    if (!block) throw new ManifestParseError(`manifest missing plot ${i}`);
    const need = (field: string): string => {
      const v = block.get(field);
      if (v === undefined) {
        throw new ManifestParseError(`plot ${i} missing field ${field}`);
      }
      return v;
    };
    const tileParts = need("tile").split(",").map((v) => parseInt(v, 10));
    const b = need("bounds").split(/\s+/).map(Number);
    if (tileParts.length !== 2 || b.length !== 4 || b.some(Number.isNaN)) {
      throw new ManifestParseError(`plot ${i} has malformed tile or bounds`);
    }
    entries.push({
      scene: need("scene"),
      tile: [tileParts[0], tileParts[1]],
      split: need("split"),
      points: parseInt(need("points"), 10),
      density: Number(need("density")),
      bounds: { xmin: b[0], ymin: b[1], xmax: b[2], ymax: b[3] },
      path: block.get("path"),
    });
  }
  return { name, scenes, entries };
}

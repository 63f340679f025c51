export { openDataset, DatasetHandle, SPLITS } from "./dataset.js";
export { parseManifest, ManifestParseError } from "./manifest.js";
export type { Manifest, ManifestEntry, Bounds } from "./manifest.js";
export { parseCloud, CloudParseError, RECORD_SIZE } from "./svpc.js";
export type { PlotArrays } from "./svpc.js";
export { gridCenters, randomCenters, cutCylinder } from "./sampler.js";
export type { CylinderSample } from "./sampler.js";
export { hash64, u01 } from "./rng.js";

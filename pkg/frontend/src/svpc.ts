/**
 * Parser for the binary point-cloud format.
 *
 * Layout: magic "SVPC", u16 version, u64 count, then packed little-endian
 * records {f64 x,y,z; u32 instance; u8 semantic; u8 return; i64 pulse;
 * f64 time} (46 bytes per point).
 */

export const RECORD_SIZE = 46;
const HEADER_SIZE = 14;
const MAGIC = 0x43505653; // "SVPC" little-endian

export class CloudParseError extends Error {
  constructor(message: string, public readonly byteOffset: number) {
    super(`${message} (byte ${byteOffset})`);
    this.name = "CloudParseError";
  }
}

export interface PlotArrays {
  /** Flat n x 3 positions: [x0, y0, z0, x1, ...]. */
  positions: Float64Array;
  instance: Uint32Array;
  semantic: Uint8Array;
  returnNumber: Uint8Array;
  pulse: BigInt64Array;
  time: Float64Array;
  count: number;
}

/** Parse a binary cloud buffer into dense column arrays (row order kept). */
export function parseCloud(buffer: ArrayBuffer | Uint8Array): PlotArrays {
  const bytes =
    buffer instanceof Uint8Array
      ? buffer
      : new Uint8Array(buffer);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (bytes.byteLength < HEADER_SIZE) {
    throw new CloudParseError("truncated header", bytes.byteLength);
  }
  if (view.getUint32(0, true) !== MAGIC) {
    throw new CloudParseError("bad magic", 0);
  }
  const version = view.getUint16(4, true);
  if (version !== 1) {
    throw new CloudParseError(`unsupported version ${version}`, 4);
  }
  const count = Number(view.getBigUint64(6, true));
  const expected = HEADER_SIZE + count * RECORD_SIZE;
  if (bytes.byteLength !== expected) {
    throw new CloudParseError(
      "point record block has wrong length",
      Math.min(bytes.byteLength, expected),
    );
  }

  const positions = new Float64Array(count * 3);
  const instance = new Uint32Array(count);
  const semantic = new Uint8Array(count);
  const returnNumber = new Uint8Array(count);
  const pulse = new BigInt64Array(count);
  const time = new Float64Array(count);

  let off = HEADER_SIZE;
  for (let i = 0; i < count; i++) {
    positions[3 * i] = view.getFloat64(off, true);
    positions[3 * i + 1] = view.getFloat64(off + 8, true);
    positions[3 * i + 2] = view.getFloat64(off + 16, true);
    instance[i] = view.getUint32(off + 24, true);
    semantic[i] = view.getUint8(off + 28);
    returnNumber[i] = view.getUint8(off + 29);
    pulse[i] = view.getBigInt64(off + 30, true);
    time[i] = view.getFloat64(off + 38, true);
    off += RECORD_SIZE;
  }
  return { positions, instance, semantic, returnNumber, pulse, time, count };
}

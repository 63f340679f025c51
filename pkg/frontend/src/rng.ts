/**
 * Keyed counter-based random stream: splitmix64 applied once per key word,
 * floats from the top 53 bits. Matches the generator used by the dataset
 * producer bit for bit, so seeded draws reproduce exactly.
 */

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;
const U01_SCALE = 2 ** -53;

/** Stream purpose tag for cylinder centers (shared constant with the producer). */
export const PURPOSE_CENTER = 7n;

function splitmix(z: bigint): bigint {
  z = (z + GOLDEN) & MASK64;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK64;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK64;
  return z ^ (z >> 31n);
}

export function hash64(...words: Array<bigint | number>): bigint {
  let h = 0n;
  for (const w of words) {
    const word = typeof w === "bigint" ? w : BigInt(Math.trunc(w));
    h = splitmix(h ^ (word & MASK64));
  }
  return h;
}

/** Uniform draw in [0, 1) keyed by the given words. */
export function u01(...words: Array<bigint | number>): number {
  return Number(hash64(...words) >> 11n) * U01_SCALE;
}

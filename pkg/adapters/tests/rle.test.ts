import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { maskArea, rleDecode, rleEncode } from "../src/rle.js";

const fixturesDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

interface RleCase {
  height: number;
  width: number;
  bitmap: number[][];
  rle_counts: number[];
}

function flat(bitmap: number[][]): Uint8Array {
  return Uint8Array.from(bitmap.flat());
}

describe("rle codec", () => {
  it("matches the Python codec on shared fixtures bit-exactly", () => {
    const cases: RleCase[] = JSON.parse(
      readFileSync(join(fixturesDir, "rle_cases.json"), "utf-8"),
    );
    expect(cases.length).toBeGreaterThan(20);
    for (const c of cases) {
      const bitmap = flat(c.bitmap);
      expect(rleEncode(bitmap)).toEqual(c.rle_counts);
      expect(Array.from(rleDecode(c.rle_counts, c.height, c.width))).toEqual(
        Array.from(bitmap),
      );
    }
  });

  it("round-trips random bitmaps", () => {
    let seed = 1234567;
    const rand = () => {
      // deterministic LCG so failures reproduce
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let i = 0; i < 200; i++) {
      const h = 1 + Math.floor(rand() * 16);
      const w = 1 + Math.floor(rand() * 16);
      const density = rand();
      const bitmap = new Uint8Array(h * w);
      for (let j = 0; j < bitmap.length; j++) {
        bitmap[j] = rand() < density ? 1 : 0;
      }
      const counts = rleEncode(bitmap);
      expect(Array.from(rleDecode(counts, h, w))).toEqual(Array.from(bitmap));
      expect(rleEncode(rleDecode(counts, h, w))).toEqual(counts);
    }
  });

  it("validates run structure", () => {
    expect(() => rleDecode([2, 2], 2, 3)).toThrow(/sum/);
    expect(() => rleDecode([2, 0, 4], 2, 3)).toThrow(/zero-length/);
    expect(() => rleDecode([-1, 7], 2, 3)).toThrow(/non-negative/);
    expect(maskArea([2, 3, 1])).toBe(3);
    expect(maskArea([4])).toBe(0);
  });
});

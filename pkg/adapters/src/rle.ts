/**
 * Row-major uncompressed run-length codec for binary masks.
 *
 * Counts alternate background/foreground starting with background (a
 * leading 0 marks foreground in the first cell); they must sum to
 * height * width. Bit-exact with the Python toolkit codec.
 */

export type Bitmap = Uint8Array; // row-major 0/1 cells

export function rleEncode(bitmap: Bitmap): number[] {
  if (bitmap.length === 0) return [];
  const counts: number[] = [];
  let current = 0; // background first
  let run = 0;
  for (const cell of bitmap) {
    const v = cell ? 1 : 0;
    if (v === current) {
      run += 1;
    } else {
      counts.push(run);
      current = v;
      run = 1;
    }
  }
  counts.push(run);
  return counts;
}

export function rleDecode(counts: number[], height: number, width: number): Bitmap {
  const total = height * width;
  let sum = 0;
  counts.forEach((c, i) => {
    if (!Number.isInteger(c) || c < 0) {
      throw new Error(`rle counts must be non-negative ints: ${c}`);
    }
    if (c === 0 && i > 0) {
      throw new Error("zero-length run after the first count");
    }
    sum += c;
  });
  if (sum !== total) {
    throw new Error(`rle counts sum ${sum} != height*width ${total}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const c of counts) {
    if (value === 1) out.fill(1, pos, pos + c);
    pos += c;
    value = 1 - value;
  }
  return out;
}

export function maskArea(counts: number[]): number {
  let area = 0;
  for (let i = 1; i < counts.length; i += 2) area += counts[i];
  return area;
}

/** Wire schemas shared with the core toolkit, validated with zod. */

import { z } from "zod";

import { rleDecode } from "./rle.js";

export const MaskRecordSchema = z
  .object({
    video_id: z.string(),
    frame_index: z.number().int().min(1),
    tag: z.string().min(1),
    height: z.number().int().min(1),
    width: z.number().int().min(1),
    rle_counts: z.array(z.number().int().min(0)),
    score: z.number().min(0).max(1).nullable().optional(),
  })
  .superRefine((rec, ctx) => {
    try {
      rleDecode(rec.rle_counts, rec.height, rec.width);
    } catch (err) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: (err as Error).message,
      });
    }
  });

export type MaskRecord = z.infer<typeof MaskRecordSchema>;

export const SegmentRequestSchema = z.object({
  image_b64: z.string().optional(),
  image_ref: z.string().optional(),
  width: z.number().int().min(1),
  height: z.number().int().min(1),
  tag: z.string().min(1),
  video_id: z.string().optional(),
  frame_index: z.number().int().min(1).optional(),
});

export type SegmentRequest = z.infer<typeof SegmentRequestSchema>;

export const MrRecordSchema = z.object({
  item_id: z.string(),
  video_id: z.string(),
  query: z.string(),
  span_start_s: z.number().min(0),
  span_end_s: z.number().min(0),
  duration_s: z.number().positive().optional(),
});

export type MrRecord = z.infer<typeof MrRecordSchema>;

export const HdRecordSchema = z.object({
  item_id: z.string(),
  clips: z.array(z.tuple([z.number().int().min(0), z.number()])),
});

export type HdRecord = z.infer<typeof HdRecordSchema>;

export function parseMaskRecordLines(text: string): MaskRecord[] {
  const records: MaskRecord[] = [];
  const lines = text.split("\n");
  lines.forEach((line, i) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    let obj: unknown;
    try {
      obj = JSON.parse(trimmed);
    } catch (err) {
      throw new Error(`line ${i + 1}: invalid JSON: ${(err as Error).message}`);
    }
    const parsed = MaskRecordSchema.safeParse(obj);
    if (!parsed.success) {
      throw new Error(`line ${i + 1}: ${parsed.error.message}`);
    }
    records.push(parsed.data);
  });
  return records;
}

export function toNdjson(records: object[]): string {
  return records.map((r) => JSON.stringify(sortKeys(r))).join("\n") + "\n";
}

function sortKeys(obj: object): object {
  return Object.fromEntries(
    Object.entries(obj).sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)),
  );
}

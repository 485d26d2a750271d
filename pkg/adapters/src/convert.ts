/**
 * Dataset converters to the toolkit's canonical record files.
 *
 * activitynet: dense-captions JSON {vid: {duration, timestamps,
 * sentences}} -> moment-retrieval NDJSON records.
 *
 * qvhighlights: JSONL with qid/query/vid/duration/relevant_clip_ids/
 * saliency_scores -> highlight gold NDJSON (2 s clips, mean annotator
 * saliency, unannotated clips 0) plus an item metadata sidecar.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { HdRecordSchema, MrRecordSchema, toNdjson } from "./wire.js";

interface ActivityNetEntry {
  duration: number;
  timestamps: [number, number][];
  sentences: string[];
}

export function convertActivityNet(src: string, dst: string): number {
  const data = JSON.parse(readFileSync(src, "utf-8")) as Record<string, ActivityNetEntry>;
  const records: object[] = [];
  for (const [videoId, entry] of Object.entries(data)) {
    if (entry.timestamps.length !== entry.sentences.length) {
      throw new Error(`${videoId}: timestamps/sentences length mismatch`);
    }
    entry.timestamps.forEach(([start, end], i) => {
      const rec = {
        item_id: `${videoId}#${i + 1}`,
        video_id: videoId,
        query: entry.sentences[i].trim(),
        span_start_s: Math.min(start, end),
        span_end_s: Math.max(start, end),
        duration_s: entry.duration,
      };
      MrRecordSchema.parse(rec);
      records.push(rec);
    });
  }
  writeFileSync(dst, toNdjson(records));
  return records.length;
}

interface QVHighlightsLine {
  qid: number;
  query: string;
  vid: string;
  duration: number;
  relevant_clip_ids?: number[];
  saliency_scores?: number[][];
}

export const QV_CLIP_SECONDS = 2;

export function convertQVHighlights(
  src: string,
  dst: string,
  metaDst?: string,
): number {
  const lines = readFileSync(src, "utf-8").split("\n");
  const records: object[] = [];
  const meta: Record<string, object> = {};
  for (const line of lines) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    const entry = JSON.parse(trimmed) as QVHighlightsLine;
    const nClips = Math.ceil(entry.duration / QV_CLIP_SECONDS);
    const saliency = new Array<number>(nClips).fill(0);
    const clipIds = entry.relevant_clip_ids ?? [];
    const scores = entry.saliency_scores ?? [];
    clipIds.forEach((clipId, i) => {
      if (clipId < 0 || clipId >= nClips) {
        throw new Error(`qid ${entry.qid}: clip id ${clipId} out of range`);
      }
      const perAnnotator = scores[i] ?? [];
      const mean =
        perAnnotator.length > 0
          ? perAnnotator.reduce((a, b) => a + b, 0) / perAnnotator.length
          : 0;
      saliency[clipId] = mean;
    });
    const itemId = `qv${entry.qid}`;
    const rec = {
      item_id: itemId,
      clips: saliency.map((s, i) => [i, s] as [number, number]),
    };
    HdRecordSchema.parse(rec);
    records.push(rec);
    meta[itemId] = {
      video_id: entry.vid,
      query: entry.query,
      duration_s: entry.duration,
    };
  }
  writeFileSync(dst, toNdjson(records));
  if (metaDst) {
    const sorted = Object.fromEntries(
      Object.keys(meta)
        .sort()
        .map((k) => [k, meta[k]]),
    );
    writeFileSync(metaDst, JSON.stringify(sorted, null, 2) + "\n");
  }
  return records.length;
}

export function main(argv: string[]): number {
  const [dataset, src, dst, metaDst] = argv;
  if (!dataset || !src || !dst) {
    console.error(
      "usage: convert.js activitynet|qvhighlights SRC DST [META_DST]",
    );
    return 2;
  }
  let n: number;
  if (dataset === "activitynet") {
    n = convertActivityNet(src, dst);
  } else if (dataset === "qvhighlights") {
    n = convertQVHighlights(src, dst, metaDst);
  } else {
    console.error(`unknown dataset ${dataset}`);
    return 2;
  }
  console.log(`wrote ${n} records to ${dst}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("convert.js")) {
  process.exit(main(process.argv.slice(2)));
}

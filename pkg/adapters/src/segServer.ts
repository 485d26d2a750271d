/**
 * Open-vocabulary segmentation server speaking the toolkit's mask wire
 * schema: POST /segment -> {masks: [...]}.
 *
 * Backends implement a single lookup; the bundled fixture backend
 * serves precomputed records from an NDJSON file. Recall-first: every
 * instance at or above the binarization threshold is emitted, no
 * top-K (maxInstances is an optional safety bound, unlimited by
 * default).
 */

import express from "express";
import { readFileSync } from "node:fs";

import { MaskRecord, SegmentRequest, SegmentRequestSchema, parseMaskRecordLines } from "./wire.js";

export interface AdapterConfig {
  model: string; // "fixture:<path>" or a real model identifier
  device: string;
  threshold: number; // binarization threshold in (0,1)
  maxInstances?: number;
  port: number;
}

export interface SegmentationBackend {
  segment(req: SegmentRequest): MaskRecord[];
}

export class FixtureBackend implements SegmentationBackend {
  private records: MaskRecord[];

  constructor(fixturePath: string) {
    this.records = parseMaskRecordLines(readFileSync(fixturePath, "utf-8"));
  }

  segment(req: SegmentRequest): MaskRecord[] {
    return this.records.filter((rec) => {
      if (rec.tag !== req.tag) return false;
      if (rec.height !== req.height || rec.width !== req.width) return false;
      if (req.video_id !== undefined && rec.video_id !== req.video_id) return false;
      if (req.frame_index !== undefined && rec.frame_index !== req.frame_index) return false;
      return true;
    });
  }
}

export function makeBackend(config: AdapterConfig): SegmentationBackend {
  if (config.model.startsWith("fixture:")) {
    return new FixtureBackend(config.model.slice("fixture:".length));
  }
  throw new Error(
    `no backend for model ${config.model}; implement SegmentationBackend ` +
      "and register it here (fixture:<path> is built in)",
  );
}

export function createSegApp(config: AdapterConfig, backend?: SegmentationBackend) {
  if (config.threshold <= 0 || config.threshold >= 1) {
    throw new Error("threshold must be in (0,1)");
  }
  const impl = backend ?? makeBackend(config);
  const app = express();
  app.use(express.json({ limit: "64mb" }));

  app.get("/health", (_req, res) => {
    res.json({ status: "ok", model: config.model });
  });

  app.post("/segment", (req, res) => {
    const parsed = SegmentRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(422).json({ error: parsed.error.message });
      return;
    }
    let masks = impl
      .segment(parsed.data)
      .filter((m) => (m.score ?? 1.0) >= config.threshold);
    if (config.maxInstances !== undefined) {
      masks = masks.slice(0, config.maxInstances);
    }
    res.json({ masks });
  });

  return app;
}

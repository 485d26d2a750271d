/**
 * Vid-LLM proxy speaking the chat-completions wire shape the toolkit
 * client sends: POST /chat/completions with image attachments and a
 * text prompt; the reply text sits at choices[0].message.content.
 *
 * Fixture mode scripts replies per item id (carried in the request's
 * "user" field), falling back to prompt-substring keys.
 */

import express from "express";
import { readFileSync } from "node:fs";
import { z } from "zod";

const ContentPartSchema = z.union([
  z.object({ type: z.literal("text"), text: z.string() }),
  z.object({
    type: z.literal("image_url"),
    image_url: z.object({ url: z.string() }),
  }),
]);

const ChatRequestSchema = z.object({
  model: z.string().optional(),
  messages: z.array(
    z.object({
      role: z.string(),
      content: z.union([z.string(), z.array(ContentPartSchema)]),
    }),
  ),
  temperature: z.number().optional(),
  user: z.string().optional(),
});

export interface VidLLMBackend {
  complete(prompt: string, imageCount: number, itemId?: string): string;
}

export class FixtureVidLLM implements VidLLMBackend {
  private oracle: Record<string, string>;

  constructor(fixturePath: string) {
    this.oracle = JSON.parse(readFileSync(fixturePath, "utf-8"));
  }

  complete(prompt: string, _imageCount: number, itemId?: string): string {
    if (itemId && itemId in this.oracle) return this.oracle[itemId];
    for (const [key, reply] of Object.entries(this.oracle)) {
      if (prompt.includes(key)) return reply;
    }
    throw new Error(`no scripted reply for item ${itemId ?? "<none>"}`);
  }
}

export interface VidLLMConfig {
  model: string; // "fixture:<path>" or a real model identifier
  port: number;
}

export function makeVidLLMBackend(config: VidLLMConfig): VidLLMBackend {
  if (config.model.startsWith("fixture:")) {
    return new FixtureVidLLM(config.model.slice("fixture:".length));
  }
  throw new Error(
    `no backend for model ${config.model}; implement VidLLMBackend and ` +
      "register it here (fixture:<path> is built in)",
  );
}

export function createVidLLMApp(config: VidLLMConfig, backend?: VidLLMBackend) {
  const impl = backend ?? makeVidLLMBackend(config);
  const app = express();
  app.use(express.json({ limit: "256mb" }));

  app.get("/health", (_req, res) => {
    res.json({ status: "ok", model: config.model });
  });

  app.post("/chat/completions", (req, res) => {
    const parsed = ChatRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(422).json({ error: parsed.error.message });
      return;
    }
    let prompt = "";
    let images = 0;
    for (const message of parsed.data.messages) {
      if (typeof message.content === "string") {
        prompt += message.content;
        continue;
      }
      for (const part of message.content) {
        if (part.type === "text") prompt += part.text;
        else images += 1;
      }
    }
    try {
      const text = impl.complete(prompt, images, parsed.data.user);
      res.json({
        model: parsed.data.model ?? config.model,
        choices: [{ index: 0, message: { role: "assistant", content: text } }],
      });
    } catch (err) {
      res.status(404).json({ error: (err as Error).message });
    }
  });

  return app;
}

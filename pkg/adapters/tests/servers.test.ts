import { Server } from "node:http";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createSegApp } from "../src/segServer.js";
import { createVidLLMApp } from "../src/vidllmServer.js";
import { MaskRecordSchema } from "../src/wire.js";

const fixturesDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function listen(app: ReturnType<typeof createSegApp>): Promise<Server> {
  return new Promise((resolve) => {
    const server = app.listen(0, () => resolve(server));
  });
}

function urlOf(server: Server): string {
  const addr = server.address() as AddressInfo;
  return `http://127.0.0.1:${addr.port}`;
}

describe("segmentation adapter (fixture mode)", () => {
  let server: Server;

  beforeAll(async () => {
    const app = createSegApp({
      model: `fixture:${join(fixturesDir, "masks_fixture.ndjson")}`,
      device: "cpu",
      threshold: 0.5,
      port: 0,
    });
    server = await listen(app);
  });

  afterAll(() => server.close());

  it("serves schema-valid records for a tag", async () => {
    const resp = await fetch(`${urlOf(server)}/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        width: 10,
        height: 8,
        tag: "man",
        video_id: "vidA",
        frame_index: 1,
      }),
    });
    expect(resp.status).toBe(200);
    const body = (await resp.json()) as { masks: unknown[] };
    expect(body.masks.length).toBe(2); // recall-first: both instances kept
    for (const mask of body.masks) {
      expect(MaskRecordSchema.safeParse(mask).success).toBe(true);
    }
  });

  it("filters by threshold without top-K", async () => {
    const app = createSegApp({
      model: `fixture:${join(fixturesDir, "masks_fixture.ndjson")}`,
      device: "cpu",
      threshold: 0.75,
      port: 0,
    });
    const srv = await listen(app);
    try {
      const resp = await fetch(`${urlOf(srv)}/segment`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          width: 10,
          height: 8,
          tag: "man",
          video_id: "vidA",
          frame_index: 1,
        }),
      });
      const body = (await resp.json()) as { masks: unknown[] };
      expect(body.masks.length).toBe(0); // both man masks at frame 1 are < 0.75
    } finally {
      srv.close();
    }
  });

  it("rejects malformed requests", async () => {
    const resp = await fetch(`${urlOf(server)}/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ width: -3, tag: "" }),
    });
    expect(resp.status).toBe(422);
  });

  it("rejects bad config", () => {
    expect(() =>
      createSegApp({ model: "fixture:/nope", device: "cpu", threshold: 2, port: 0 }),
    ).toThrow(/threshold/);
  });
});

describe("vidllm adapter (fixture mode)", () => {
  let server: Server;

  beforeAll(async () => {
    const app = createVidLLMApp({
      model: `fixture:${join(fixturesDir, "oracle_fixture.json")}`,
      port: 0,
    });
    server = await listen(app);
  });

  afterAll(() => server.close());

  async function chat(body: object) {
    const resp = await fetch(`${urlOf(server)}/chat/completions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return resp;
  }

  it("scripts replies by item id in the user field", async () => {
    const resp = await chat({
      messages: [
        {
          role: "user",
          content: [
            { type: "text", text: "During which frames can we see a man?" },
            { type: "image_url", image_url: { url: "data:image/png;base64,AA==" } },
          ],
        },
      ],
      temperature: 0,
      user: "vidA#1",
    });
    expect(resp.status).toBe(200);
    const body = (await resp.json()) as {
      choices: { message: { content: string } }[];
    };
    expect(body.choices[0].message.content).toBe("From 2 to 5");
  });

  it("falls back to prompt-substring keys", async () => {
    const resp = await chat({
      messages: [{ role: "user", content: "tell me about the fallback key" }],
    });
    const body = (await resp.json()) as {
      choices: { message: { content: string } }[];
    };
    expect(body.choices[0].message.content).toBe("From 1 to 3");
  });

  it("404s when nothing is scripted", async () => {
    const resp = await chat({
      messages: [{ role: "user", content: "unknown" }],
      user: "missing",
    });
    expect(resp.status).toBe(404);
  });
});

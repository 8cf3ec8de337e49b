/**
 * The HTTP perception service.
 *
 * GET  /health      -> 200 {status: "ok", kinds: [...]}
 * POST /v1/{kind}   -> 200 <result object> | 404 {code: "no_fixture"}
 *                      | 400 {code: "bad_request"}
 *
 * The POST body is the gateway's unframed request JSON; the response body
 * is the bare result object, which the gateway wraps unchanged.
 */

import { createHash } from "node:crypto";
import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";

import { DEFAULT_LATENCY_MS, FixtureSet, WIRE_KINDS } from "./fixtures.js";

const MAX_BODY_BYTES = 32 * 1024 * 1024;

function sendJson(res: ServerResponse, status: number, body: unknown): void {
  const data = JSON.stringify(body);
  res.writeHead(status, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(data),
  });
  res.end(data);
}

function readBody(req: IncomingMessage): Promise<Buffer> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    let total = 0;
    req.on("data", (chunk: Buffer) => {
      total += chunk.length;
      if (total > MAX_BODY_BYTES) {
        reject(new Error("body too large"));
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => resolve(Buffer.concat(chunks)));
    req.on("error", reject);
  });
}

interface ParsedRequest {
  image: Buffer;
}

/** Returns the decoded image, or null when the request violates the schema. */
function parseRequest(body: Buffer, pathKind: string): ParsedRequest | null {
  let doc: unknown;
  try {
    doc = JSON.parse(body.toString("utf-8"));
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    return null;
  }
  const request = doc as Record<string, unknown>;
  const allowed = new Set(["v", "id", "kind", "image", "params"]);
  if (Object.keys(request).some((k) => !allowed.has(k))) {
    return null;
  }
  if (request.v !== 1) {
    return null;
  }
  if (typeof request.id !== "string" || request.id.length === 0) {
    return null;
  }
  if (request.kind !== pathKind) {
    return null;
  }
  if ("params" in request) {
    const params = request.params;
    if (typeof params !== "object" || params === null || Array.isArray(params)) {
      return null;
    }
    if (Object.values(params).some((v) => typeof v !== "string")) {
      return null;
    }
  }
  if (typeof request.image !== "string") {
    return null;
  }
  let image: Buffer;
  try {
    image = Buffer.from(request.image, "base64");
    // Round-trip check: Buffer.from ignores invalid characters silently.
    if (image.toString("base64").replace(/=+$/, "") !== request.image.replace(/=+$/, "")) {
      return null;
    }
  } catch {
    return null;
  }
  if (image.subarray(0, 2).toString("ascii") !== "P5") {
    return null;
  }
  return { image };
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export function createService(fixtures: FixtureSet): Server {
  return createServer((req, res) => {
    void handle(req, res).catch(() => {
      if (!res.headersSent) {
        sendJson(res, 500, { code: "internal" });
      } else {
        res.end();
      }
    });
  });

  async function handle(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const url = req.url ?? "/";
    if (req.method === "GET" && url === "/health") {
      sendJson(res, 200, { status: "ok", kinds: fixtures.kinds });
      return;
    }
    const match = /^\/v1\/([a-z_]+)$/.exec(url);
    if (req.method === "POST" && match) {
      const kind = match[1];
      if (!(WIRE_KINDS as readonly string[]).includes(kind)) {
        sendJson(res, 400, { code: "bad_request" });
        return;
      }
      let body: Buffer;
      try {
        body = await readBody(req);
      } catch {
        sendJson(res, 400, { code: "bad_request" });
        return;
      }
      const parsed = parseRequest(body, kind);
      if (parsed === null) {
        sendJson(res, 400, { code: "bad_request" });
        return;
      }
      const digest = createHash("sha256").update(parsed.image).digest("hex");
      const entry = fixtures.byKey.get(`${kind}:${digest}`);
      if (entry === undefined) {
        sendJson(res, 404, { code: "no_fixture" });
        return;
      }
      const latency = entry.latency_ms ?? DEFAULT_LATENCY_MS[kind] ?? 0;
      if (latency > 0) {
        await sleep(latency);
      }
      sendJson(res, 200, entry.result);
      return;
    }
    sendJson(res, 404, { code: "not_found" });
  }
}

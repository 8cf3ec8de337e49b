/**
 * Fixture document handling, mirroring the gateway's validation rules
 * bit for bit: a JSON array of {kind, digest, result, latency_ms?} entries
 * keyed by the SHA-256 of canonical PGM bytes.
 */

import { readFileSync } from "node:fs";

export const FIXTURE_KINDS = ["scene", "objects", "ocr", "face"] as const;
export const WIRE_KINDS = ["scene", "objects", "ocr"] as const;
export type WireKind = (typeof WIRE_KINDS)[number];

export const DEFAULT_LATENCY_MS: Record<string, number> = {
  scene: 150,
  objects: 150,
  ocr: 150,
};

export const EMBEDDING_DIM = 128;

export interface FixtureEntry {
  kind: string;
  digest: string;
  result: Record<string, unknown>;
  latency_ms?: number;
}

export interface FixtureSet {
  entries: FixtureEntry[];
  byKey: Map<string, FixtureEntry>;
  kinds: WireKind[];
}

function isNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function checkBbox(value: unknown): string | null {
  if (!Array.isArray(value) || value.length !== 4 || !value.every(isNumber)) {
    return "bbox must be a list of 4 numbers";
  }
  const [x0, y0, x1, y1] = value as number[];
  if (!(x0 >= 0 && x0 < x1 && x1 <= 1 && y0 >= 0 && y0 < y1 && y1 <= 1)) {
    return "bbox must be well-ordered within [0, 1]";
  }
  return null;
}

export function validateResult(kind: string, result: unknown): string[] {
  const errors: string[] = [];
  if (!isRecord(result)) {
    return [`result for kind '${kind}' must be an object`];
  }
  const keys = Object.keys(result).sort();
  if (kind === "scene") {
    if (keys.join(",") !== "caption") {
      errors.push("scene result must hold exactly the key 'caption'");
    } else if (typeof result.caption !== "string" || !result.caption.trim()) {
      errors.push("caption must be a non-empty string");
    }
  } else if (kind === "objects") {
    if (keys.join(",") !== "detections" || !Array.isArray(result.detections)) {
      return ["objects result must hold exactly a 'detections' list"];
    }
    (result.detections as unknown[]).forEach((det, i) => {
      if (!isRecord(det) || Object.keys(det).sort().join(",") !== "bbox,confidence,label") {
        errors.push(`detections[${i}] must hold label, confidence, bbox`);
        return;
      }
      if (typeof det.label !== "string" || !det.label) {
        errors.push(`detections[${i}].label must be a non-empty string`);
      }
      if (!isNumber(det.confidence) || det.confidence < 0 || det.confidence > 1) {
        errors.push(`detections[${i}].confidence must lie in [0, 1]`);
      }
      const bboxError = checkBbox(det.bbox);
      if (bboxError) {
        errors.push(`detections[${i}].${bboxError}`);
      }
    });
  } else if (kind === "ocr") {
    if (keys.join(",") !== "lines" || !Array.isArray(result.lines)) {
      return ["ocr result must hold exactly a 'lines' list"];
    }
    (result.lines as unknown[]).forEach((line, i) => {
      if (!isRecord(line) || !("text" in line) || !("confidence" in line)) {
        errors.push(`lines[${i}] must hold at least text and confidence`);
        return;
      }
      const allowed = new Set(["text", "confidence", "bbox", "order_index"]);
      const extra = Object.keys(line).filter((k) => !allowed.has(k));
      if (extra.length > 0) {
        errors.push(`lines[${i}] has unknown keys [${extra.sort().join(", ")}]`);
      }
      if (typeof line.text !== "string") {
        errors.push(`lines[${i}].text must be a string`);
      }
      if (!isNumber(line.confidence) || line.confidence < 0 || line.confidence > 1) {
        errors.push(`lines[${i}].confidence must lie in [0, 1]`);
      }
      if ("bbox" in line) {
        const bboxError = checkBbox(line.bbox);
        if (bboxError) {
          errors.push(`lines[${i}].${bboxError}`);
        }
      }
      if ("order_index" in line && !Number.isInteger(line.order_index)) {
        errors.push(`lines[${i}].order_index must be an integer`);
      }
    });
  } else if (kind === "face") {
    if (keys.join(",") !== "embedding") {
      errors.push("face result must hold exactly the key 'embedding'");
    } else if (
      !Array.isArray(result.embedding) ||
      result.embedding.length !== EMBEDDING_DIM ||
      !result.embedding.every(isNumber)
    ) {
      errors.push(`embedding must be a list of ${EMBEDDING_DIM} numbers`);
    }
  } else {
    errors.push(`unknown fixture kind '${kind}'`);
  }
  return errors;
}

export function validateFixtureDoc(doc: unknown): {
  entries: FixtureEntry[];
  errors: string[];
} {
  const errors: string[] = [];
  const entries: FixtureEntry[] = [];
  if (!Array.isArray(doc)) {
    return { entries, errors: ["fixture document must be a JSON array"] };
  }
  const seen = new Map<string, number>();
  doc.forEach((entry, i) => {
    if (!isRecord(entry)) {
      errors.push(`entry ${i}: must be an object`);
      return;
    }
    const allowed = new Set(["kind", "digest", "result", "latency_ms"]);
    const extra = Object.keys(entry).filter((k) => !allowed.has(k));
    if (extra.length > 0) {
      errors.push(`entry ${i}: unknown keys [${extra.sort().join(", ")}]`);
    }
    const missing = ["kind", "digest", "result"].filter((k) => !(k in entry));
    if (missing.length > 0) {
      errors.push(`entry ${i}: missing field [${missing.join(", ")}]`);
      return;
    }
    const kind = entry.kind as string;
    const digest = entry.digest as string;
    if (!(FIXTURE_KINDS as readonly string[]).includes(kind)) {
      errors.push(`entry ${i}: unknown kind '${String(kind)}'`);
      return;
    }
    if (typeof digest !== "string" || !/^[0-9a-f]{64}$/.test(digest)) {
      errors.push(`entry ${i}: digest must be 64 lowercase hex characters`);
      return;
    }
    const key = `${kind}:${digest}`;
    if (seen.has(key)) {
      errors.push(
        `entry ${i}: duplicate (kind, digest) already used by entry ${seen.get(key)}`
      );
      return;
    }
    if ("latency_ms" in entry && (!isNumber(entry.latency_ms) || entry.latency_ms < 0)) {
      errors.push(`entry ${i}: latency_ms must be a non-negative number`);
      return;
    }
    const resultErrors = validateResult(kind, entry.result);
    if (resultErrors.length > 0) {
      errors.push(...resultErrors.map((msg) => `entry ${i}: ${msg}`));
      return;
    }
    seen.set(key, i);
    entries.push({
      kind,
      digest,
      result: entry.result as Record<string, unknown>,
      latency_ms: "latency_ms" in entry ? (entry.latency_ms as number) : undefined,
    });
  });
  return { entries, errors };
}

export function buildFixtureSet(entries: FixtureEntry[]): FixtureSet {
  const byKey = new Map<string, FixtureEntry>();
  const kinds = new Set<WireKind>();
  for (const entry of entries) {
    byKey.set(`${entry.kind}:${entry.digest}`, entry);
    if ((WIRE_KINDS as readonly string[]).includes(entry.kind)) {
      kinds.add(entry.kind as WireKind);
    }
  }
  return { entries, byKey, kinds: [...kinds].sort() as WireKind[] };
}

export function loadFixtures(path: string): { set: FixtureSet; errors: string[] } {
  const doc: unknown = JSON.parse(readFileSync(path, "utf-8"));
  const { entries, errors } = validateFixtureDoc(doc);
  return { set: buildFixtureSet(entries), errors };
}

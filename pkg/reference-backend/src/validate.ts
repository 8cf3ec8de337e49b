/** Fixture file validator: prints one line per problem, exits nonzero if any. */

import { readFileSync } from "node:fs";

import { validateFixtureDoc } from "./fixtures.js";

function main(): void {
  const file = process.argv[2];
  if (!file) {
    console.error("usage: validate <fixtures.json>");
    process.exit(2);
  }
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(file, "utf-8"));
  } catch (err) {
    console.error(`cannot parse ${file}: ${String(err)}`);
    process.exit(1);
  }
  const { errors } = validateFixtureDoc(doc);
  for (const error of errors) {
    console.error(error);
  }
  process.exit(errors.length > 0 ? 1 : 0);
}

main();

/** CLI entry point: load + validate fixtures, bind, announce the port. */

import { parseArgs } from "node:util";

import { loadFixtures } from "./fixtures.js";
import { createService } from "./service.js";

function main(): void {
  const { values } = parseArgs({
    options: {
      port: { type: "string", default: "7610" },
      fixtures: { type: "string" },
      host: { type: "string", default: "127.0.0.1" },
    },
  });
  if (!values.fixtures) {
    console.error("usage: server --fixtures <file> [--port N] [--host H]");
    process.exit(2);
  }
  let set;
  try {
    const loaded = loadFixtures(values.fixtures);
    if (loaded.errors.length > 0) {
      for (const error of loaded.errors) {
        console.error(error);
      }
      process.exit(1);
    }
    set = loaded.set;
  } catch (err) {
    console.error(`cannot load fixtures: ${String(err)}`);
    process.exit(1);
  }
  const server = createService(set);
  server.on("error", (err) => {
    console.error(`bind failed: ${String(err)}`);
    process.exit(1);
  });
  server.listen(Number(values.port), values.host, () => {
    const address = server.address();
    const port = typeof address === "object" && address !== null ? address.port : values.port;
    console.log(`listening on http://${values.host}:${port}`);
  });
}

main();

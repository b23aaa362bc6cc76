/**
 * Capture-harness CLI.
 *
 *   node dist/cli.js <target-url> --actions actions.json --out capture.json
 *   node dist/cli.js --stub --out capture.json        # run against the bundled stub site
 *
 * The actions file supplies the selectors completing each stage:
 *   { "accept": "#accept", "revoke": "#revoke", "reject": "#reject" }
 */

import { readFileSync } from "node:fs";
import { parseArgs } from "node:util";

import type { ActionsScript } from "./schema.js";
import { runStages, writeCapture } from "./stages.js";
import { startStubSite } from "./stub/server.js";

const STUB_ACTIONS: ActionsScript = {
  accept: "#accept",
  revoke: "#revoke",
  reject: "#reject",
  interface_labels: {
    banner: "consent_banner",
    revocation_channel: "footer",
    steps_to_revoke: 1,
    steps_to_accept: 1,
  },
};

async function main(): Promise<number> {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      actions: { type: "string" },
      out: { type: "string" },
      stub: { type: "boolean", default: false },
    },
  });
  if (!values.out) {
    console.error("--out <capture.json> is required");
    return 2;
  }

  if (values.stub) {
    const site = await startStubSite();
    try {
      const capture = await runStages(site.pageUrl, STUB_ACTIONS);
      writeCapture(capture, values.out);
      console.error(`captured ${site.pageUrl} -> ${values.out}`);
    } finally {
      await site.close();
    }
    return 0;
  }

  const target = positionals[0];
  if (!target || !values.actions) {
    console.error("usage: cli.js <target-url> --actions <file> --out <file>  (or --stub --out <file>)");
    return 2;
  }
  const actions: ActionsScript = JSON.parse(readFileSync(values.actions, "utf-8"));
  const capture = await runStages(target, actions);
  writeCapture(capture, values.out);
  console.error(`captured ${target} -> ${values.out}`);
  return 0;
}

main().then(
  (code) => process.exit(code),
  (error) => {
    console.error(error);
    process.exit(1);
  },
);

/**
 * Four-stage capture protocol.
 *
 * One session covers initial landing, acceptance, and revocation in order;
 * rejection runs in a second session with a fresh profile so no state
 * carries over. Each consent action is stamped as the stage event time
 * immediately before the click, so every recorded request of that stage
 * sits at or after it; background data (cookies, storage, API snapshots,
 * API accesses, network log) is collected once the network is idle.
 */

import { mkdtempSync, renameSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";

import type { ActionsScript, CaptureJson, StageId, StageJson } from "./schema.js";
import { SCHEMA_VERSION } from "./schema.js";
import type { PageSession } from "./session.js";
import { JsdomSession } from "./session.js";

export type SessionFactory = () => PageSession;

async function collectStage(
  session: PageSession,
  stage: StageId,
  eventTime: string | null,
): Promise<StageJson> {
  await session.waitForIdle();
  const apiSnapshots = await session.snapshotApis();
  return {
    stage,
    stage_event_time: eventTime,
    cookies: session.snapshotCookies(),
    local_storage: session.snapshotLocalStorage(),
    api_snapshots: apiSnapshots,
    api_accesses: session.drainApiAccesses(),
    requests: session.drainRequests(),
  };
}

async function actOn(session: PageSession, selector: string): Promise<string> {
  const eventTime = new Date().toISOString();
  session.click(selector);
  return eventTime;
}

export async function runStages(
  targetUrl: string,
  actions: ActionsScript,
  makeSession: SessionFactory = () => new JsdomSession(),
): Promise<CaptureJson> {
  const crawlTime = new Date().toISOString();
  const stages: StageJson[] = [];

  const main = makeSession();
  try {
    await main.navigate(targetUrl);
    stages.push(await collectStage(main, "initial", null));

    const acceptedAt = await actOn(main, actions.accept);
    stages.push(await collectStage(main, "accepted", acceptedAt));

    const revokedAt = await actOn(main, actions.revoke);
    stages.push(await collectStage(main, "revoked", revokedAt));
  } finally {
    main.close();
  }

  const fresh = makeSession();
  try {
    await fresh.navigate(targetUrl);
    // the fresh-profile load mirrors initial landing; the rejected stage
    // records only what follows the reject action
    fresh.drainRequests();
    fresh.drainApiAccesses();
    const rejectedAt = await actOn(fresh, actions.reject);
    stages.push(await collectStage(fresh, "rejected", rejectedAt));
  } finally {
    fresh.close();
  }

  return {
    schema_version: SCHEMA_VERSION,
    site: new URL(targetUrl).hostname,
    crawl_time: crawlTime,
    interface_labels: actions.interface_labels ?? null,
    stages,
  };
}

/** Write the capture once, atomically (rename from a sibling temp file). */
export function writeCapture(capture: CaptureJson, outPath: string): void {
  const staging = mkdtempSync(join(tmpdir(), "revaudit-capture-"));
  const temp = join(staging, "capture.json");
  writeFileSync(temp, JSON.stringify(capture, null, 1) + "\n", "utf-8");
  try {
    renameSync(temp, outPath);
  } catch (error) {
    // cross-device rename: fall back to write-then-rename in the target dir
    const sibling = join(dirname(outPath), `.${Date.now()}.capture.tmp`);
    writeFileSync(sibling, JSON.stringify(capture, null, 1) + "\n", "utf-8");
    renameSync(sibling, outPath);
  }
}

/**
 * Page sessions: one browsing context with a fresh profile (cookie jar,
 * storage), instrumentation injected before page scripts run.
 *
 * `JsdomSession` executes the page for real (scripts, DOM events, XHR with
 * CORS and the cookie jar) inside jsdom; a DevTools-protocol session can
 * implement the same interface to drive a full browser against live sites.
 */

import { CookieJar, DOMWindow, JSDOM, ResourceLoader } from "jsdom";

import type {
  ApiAccessJson,
  ApiSnapshotsJson,
  CookieJson,
  RequestJson,
} from "./schema.js";
import { INSTRUMENTATION_SOURCE } from "./wrappers.js";

export class InjectionFailed extends Error {}
export class NavigationTimeout extends Error {}
export class ActionNotFound extends Error {}

export interface PageSession {
  navigate(url: string): Promise<void>;
  click(selector: string): void;
  waitForIdle(settleMs?: number, timeoutMs?: number): Promise<void>;
  snapshotApis(): Promise<ApiSnapshotsJson>;
  snapshotCookies(): CookieJson[];
  snapshotLocalStorage(): [string, string, string][];
  /** Requests recorded since the previous drain (document order). */
  drainRequests(): RequestJson[];
  drainApiAccesses(): ApiAccessJson[];
  close(): void;
}

interface HarnessControl {
  requests: RequestJson[];
  apiAccesses: ApiAccessJson[];
  pendingXhr(): number;
  tcData(): Promise<{ tcString?: string; gdprApplies?: boolean } | null>;
  activeGroups(): string | null;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/** Records subresource loads (document, scripts, images) into the log. */
class RecordingResourceLoader extends ResourceLoader {
  pending = 0;
  private nextId = 1;

  constructor(private readonly sink: RequestJson[]) {
    super();
  }

  fetch(url: string, options: Parameters<ResourceLoader["fetch"]>[1]) {
    const isDocument = options?.element === undefined;
    const entry: RequestJson = {
      id: "l" + this.nextId++,
      url,
      method: "GET",
      timestamp: new Date().toISOString(),
      initiator_url: options?.referrer ?? null,
      post_data: null,
      request_headers: [],
      response: null,
    };
    this.sink.push(entry);
    this.pending++;
    const promise = super.fetch(url, options);
    if (promise) {
      promise
        .then((buffer) => {
          // no header access at this layer: infer the kind, keep html bodies
          const html = isDocument || /\.html?(\?|$)/.test(url);
          entry.response = {
            status: 200,
            headers: [],
            redirect_url: null,
            body_kind: html ? "html" : "other",
            body: html ? buffer.toString("utf-8") : null,
          };
        })
        .catch(() => {
          entry.response = { status: 0, headers: [], redirect_url: null, body_kind: "none", body: null };
        })
        .finally(() => this.pending--);
    } else {
      this.pending--;
    }
    return promise;
  }
}

export class JsdomSession implements PageSession {
  private dom: JSDOM | null = null;
  private loader: RecordingResourceLoader;
  private readonly jar = new CookieJar();
  private readonly loaderRequests: RequestJson[] = [];
  private requestCursor = 0;
  private accessCursor = 0;

  constructor() {
    this.loader = new RecordingResourceLoader(this.loaderRequests);
  }

  private get window(): DOMWindow {
    if (!this.dom) throw new NavigationTimeout("no page loaded");
    return this.dom.window;
  }

  private get control(): HarnessControl {
    const control = (this.window as unknown as { __harnessControl?: HarnessControl })
      .__harnessControl;
    if (!control) throw new InjectionFailed("instrumentation not present on page");
    return control;
  }

  async navigate(url: string, timeoutMs = 15_000): Promise<void> {
    const loaded = JSDOM.fromURL(url, {
      resources: this.loader,
      runScripts: "dangerously",
      cookieJar: this.jar,
      beforeParse: (window) => {
        try {
          window.eval(INSTRUMENTATION_SOURCE);
        } catch (error) {
          throw new InjectionFailed(String(error));
        }
      },
    });
    const timeout = sleep(timeoutMs).then(() => {
      throw new NavigationTimeout(`navigation to ${url} exceeded ${timeoutMs}ms`);
    });
    this.dom = await Promise.race([loaded, timeout]);
    await this.waitForIdle();
  }

  click(selector: string): void {
    const element = this.window.document.querySelector(selector);
    if (!element) throw new ActionNotFound(`no element matches ${selector}`);
    (element as { click?: () => void }).click?.();
  }

  async waitForIdle(settleMs = 80, timeoutMs = 10_000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    let quietSince = Date.now();
    while (Date.now() < deadline) {
      const busy = this.loader.pending > 0 || (this.dom ? this.control.pendingXhr() > 0 : false);
      if (busy) {
        quietSince = Date.now();
      } else if (Date.now() - quietSince >= settleMs) {
        return;
      }
      await sleep(10);
    }
    throw new NavigationTimeout("network did not become idle");
  }

  async snapshotApis(): Promise<ApiSnapshotsJson> {
    const control = this.control;
    const tcData = await control.tcData();
    return {
      tcfapi_tc_string: tcData?.tcString ?? null,
      tcfapi_gdpr_applies: tcData ? Boolean(tcData.gdprApplies) : null,
      onetrust_active_groups: control.activeGroups(),
    };
  }

  snapshotCookies(): CookieJson[] {
    interface SerializedCookie {
      key?: string;
      value?: string;
      domain?: string;
      path?: string;
      expires?: string;
      creation?: string;
    }
    const serialized = this.jar.serializeSync() as { cookies?: SerializedCookie[] } | undefined;
    return (serialized?.cookies ?? []).map((cookie) => ({
      name: cookie.key ?? "",
      value: cookie.value ?? "",
      domain: cookie.domain ?? "",
      path: cookie.path ?? "/",
      expires:
        cookie.expires && cookie.expires !== "Infinity"
          ? new Date(cookie.expires).toISOString()
          : null,
      set_at: cookie.creation ? new Date(cookie.creation).toISOString() : null,
    }));
  }

  snapshotLocalStorage(): [string, string, string][] {
    const { localStorage, location } = this.window;
    const entries: [string, string, string][] = [];
    for (let i = 0; i < localStorage.length; i++) {
      const key = localStorage.key(i);
      if (key !== null) {
        entries.push([location.origin, key, localStorage.getItem(key) ?? ""]);
      }
    }
    return entries;
  }

  private mergedRequests(): RequestJson[] {
    const fromPage = this.dom ? this.control.requests : [];
    return [...this.loaderRequests, ...fromPage].sort((a, b) =>
      a.timestamp < b.timestamp ? -1 : a.timestamp > b.timestamp ? 1 : a.id < b.id ? -1 : 1,
    );
  }

  drainRequests(): RequestJson[] {
    const merged = this.mergedRequests();
    const fresh = merged.slice(this.requestCursor);
    this.requestCursor = merged.length;
    return fresh.map((entry) => ({ ...entry, response: entry.response && { ...entry.response } }));
  }

  drainApiAccesses(): ApiAccessJson[] {
    const accesses = this.dom ? this.control.apiAccesses : [];
    const fresh = accesses.slice(this.accessCursor);
    this.accessCursor = accesses.length;
    return fresh.map((access) => ({ ...access }));
  }

  close(): void {
    this.dom?.window.close();
    this.dom = null;
  }
}

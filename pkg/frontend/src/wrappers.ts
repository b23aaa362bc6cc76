/**
 * Page instrumentation evaluated before any page script runs.
 *
 * Traps the definition of the TCF API entry point and wraps it with a
 * recording proxy that forwards calls unchanged, logging the command, the
 * accessor script URL (topmost non-instrumentation stack frame), and a
 * timestamp. Defines an accessor-logging property for the OneTrust groups
 * variable, and taps XMLHttpRequest for the network log.
 *
 * The page sees only `__tcfapi` / `OneTrustActiveGroups`; the harness reads
 * results through the `__harnessControl` backdoor, which bypasses logging so
 * snapshots do not pollute the access records.
 */

export const INSTRUMENTATION_SOURCE = `(() => {
  if (window.__harnessControl) return;
  const requests = [];
  const apiAccesses = [];
  let pendingXhr = 0;
  let nextRequestId = 1;
  const now = () => new Date().toISOString();

  const callerUrl = () => {
    const stack = String(new Error().stack || "");
    for (const line of stack.split("\\n")) {
      // frames look like "at https://host:port/x.js:1:2" or "at fn (url:1:2)"
      const match = line.trim().match(/(https?:\\/\\/[^\\s)]+):\\d+:\\d+\\)?$/);
      if (match && !match[1].includes("harness-wrappers")) return match[1];
    }
    return "unknown";
  };

  // ---- network tap (XHR; subresources are recorded by the resource loader)
  const XHR = window.XMLHttpRequest;
  const origOpen = XHR.prototype.open;
  const origSend = XHR.prototype.send;
  XHR.prototype.open = function (method, url) {
    let absolute = String(url);
    try { absolute = new URL(url, window.location.href).href; } catch {}
    this.__harnessRequest = { method: String(method).toUpperCase(), url: absolute };
    return origOpen.apply(this, arguments);
  };
  XHR.prototype.send = function (body) {
    const info = this.__harnessRequest || { method: "GET", url: String(window.location.href) };
    const entry = {
      id: "x" + nextRequestId++,
      url: info.url,
      method: info.method,
      timestamp: now(),
      initiator_url: callerUrl(),
      post_data: body == null ? null : String(body),
      request_headers: [],
      response: null,
    };
    requests.push(entry);
    pendingXhr++;
    this.addEventListener("loadend", () => {
      pendingXhr--;
      try {
        const raw = (this.getAllResponseHeaders() || "").trim();
        const headers = raw
          ? raw.split(/\\r?\\n/).map((line) => {
              const i = line.indexOf(":");
              return [line.slice(0, i).trim(), line.slice(i + 1).trim()];
            })
          : [];
        const contentType = String(this.getResponseHeader("content-type") || "");
        let bodyKind = "other";
        if (contentType.includes("json")) bodyKind = "json";
        else if (contentType.includes("html")) bodyKind = "html";
        if (this.status === 0) bodyKind = "none";
        entry.response = {
          status: this.status,
          headers,
          redirect_url: null,
          body_kind: bodyKind,
          body:
            bodyKind === "json" || bodyKind === "html"
              ? String(this.responseText || "")
              : null,
        };
      } catch {
        entry.response = { status: this.status || 0, headers: [], redirect_url: null, body_kind: "none", body: null };
      }
    });
    return origSend.apply(this, arguments);
  };

  // ---- TCF API definition trap: wrap whatever the CMP installs
  let realTcfApi = null;
  const recordingTcfApi = function (command, version, callback, parameter) {
    apiAccesses.push({
      api: "tcfapi",
      command: String(command),
      accessor_script_url: callerUrl(),
      timestamp: now(),
    });
    return realTcfApi(command, version, callback, parameter);
  };
  Object.defineProperty(window, "__tcfapi", {
    configurable: true,
    get() {
      return realTcfApi ? recordingTcfApi : undefined;
    },
    set(fn) {
      realTcfApi = fn;
    },
  });

  // ---- OneTrust groups variable: log reads and writes
  let activeGroups;
  let activeGroupsDefined = false;
  Object.defineProperty(window, "OneTrustActiveGroups", {
    configurable: true,
    get() {
      apiAccesses.push({
        api: "onetrust_groups_get",
        command: null,
        accessor_script_url: callerUrl(),
        timestamp: now(),
      });
      return activeGroups;
    },
    set(value) {
      apiAccesses.push({
        api: "onetrust_groups_set",
        command: null,
        accessor_script_url: callerUrl(),
        timestamp: now(),
      });
      activeGroups = String(value);
      activeGroupsDefined = true;
    },
  });

  window.__harnessControl = {
    requests,
    apiAccesses,
    pendingXhr: () => pendingXhr,
    // snapshots bypass the recording proxy so they leave no access log
    tcData: () =>
      new Promise((resolve) => {
        if (!realTcfApi) return resolve(null);
        try {
          realTcfApi("getTCData", 2, (data, success) => resolve(success ? data : null));
        } catch {
          resolve(null);
        }
      }),
    activeGroups: () => (activeGroupsDefined ? activeGroups : null),
  };
})();
//# sourceURL=harness-wrappers.js`;

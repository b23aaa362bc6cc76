/**
 * Bundled CMP-stub site for end-to-end harness runs.
 *
 * Two origins: the publisher page (with a consent banner, a stub TCF CMP,
 * and a OneTrust-style groups variable) on `localhost`, and a "third party"
 * on `127.0.0.1` that serves a vendor script querying the TCF API and a
 * sync endpoint that receives consent strings. The consent strings are real
 * encoder-produced values baked in at fixture-generation time.
 */

import { createServer, type Server } from "node:http";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export interface StubStrings {
  initial: string;
  accepted: string;
  revoked: string;
  rejected: string;
}

export function loadStubStrings(): StubStrings {
  return JSON.parse(readFileSync(join(here, "consent-strings.json"), "utf-8"));
}

const PAGE = `<!doctype html>
<html>
<head><title>CMP stub</title><script src="/cmp.js"></script></head>
<body>
  <div id="banner">
    <p>We value your privacy.</p>
    <button id="accept">Accept all</button>
    <button id="reject">Reject all</button>
  </div>
  <main><p>content</p></main>
  <footer><a id="revoke" href="#">Cookie settings</a></footer>
  <script src="__VENDOR__"></script>
</body>
</html>
`;

const CMP_JS = `(function () {
  var STRINGS = __STRINGS__;
  var THIRD_PARTY = "__THIRD_PARTY__";
  var state = "initial";

  function current() { return STRINGS[state]; }
  function setCookie(name, value) { document.cookie = name + "=" + value + "; path=/"; }

  function sync() {
    var xhr = new XMLHttpRequest();
    xhr.open("GET", THIRD_PARTY + "/sync?gdpr_consent=" + current());
    xhr.send();
  }

  window.__tcfapi = function (command, version, callback) {
    if (command === "ping") return callback({ cmpLoaded: true, cmpStatus: "loaded" }, true);
    if (command === "getTCData")
      return callback({ tcString: current(), gdprApplies: true, eventStatus: "tcloaded" }, true);
    if (command === "addEventListener")
      return callback({ tcString: current(), gdprApplies: true, eventStatus: "tcloaded", listenerId: 1 }, true);
    callback(null, false);
  };

  window.OneTrustActiveGroups = ",C0001,";
  setCookie("euconsent-v2", current());
  setCookie("OptanonConsent", encodeURIComponent("groups=C0001:1,C0002:0"));

  function applyDecision(nextState, groups, optanonGroups) {
    state = nextState;
    setCookie("euconsent-v2", current());
    try { localStorage.setItem("euconsent-v2", current()); } catch (e) {}
    setCookie("OptanonConsent", encodeURIComponent("groups=" + optanonGroups));
    window.OneTrustActiveGroups = groups;
    sync();
    document.dispatchEvent(new window.Event("cmp-consent-changed"));
  }

  document.addEventListener("DOMContentLoaded", function () {
    document.getElementById("accept").addEventListener("click", function () {
      applyDecision("accepted", ",C0001,C0002,C0004,", "C0001:1,C0002:1,C0004:1");
    });
    document.getElementById("reject").addEventListener("click", function () {
      applyDecision("rejected", ",C0001,", "C0001:1,C0002:0");
    });
    document.getElementById("revoke").addEventListener("click", function () {
      applyDecision("revoked", ",C0001,", "C0001:1,C0002:0");
    });
  });
})();
`;

const VENDOR_JS = `(function () {
  function readConsent() {
    if (typeof window.__tcfapi !== "function") return;
    window.__tcfapi("getTCData", 2, function (data, success) { void data; void success; });
    void window.OneTrustActiveGroups;
  }
  readConsent();
  document.addEventListener("cmp-consent-changed", readConsent);
})();
`;

export interface StubSite {
  pageUrl: string;
  thirdPartyOrigin: string;
  strings: StubStrings;
  close(): Promise<void>;
}

function listen(server: Server, host: string): Promise<number> {
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(0, host, () => {
      const address = server.address();
      if (address && typeof address === "object") resolve(address.port);
      else reject(new Error("no address"));
    });
  });
}

export async function startStubSite(): Promise<StubSite> {
  const strings = loadStubStrings();

  const thirdParty = createServer((req, res) => {
    const url = new URL(req.url ?? "/", "http://127.0.0.1");
    const cors = {
      "Access-Control-Allow-Origin": "*",
      "Access-Control-Expose-Headers": "*",
    };
    if (url.pathname === "/vendor.js") {
      res.writeHead(200, { "Content-Type": "text/javascript", ...cors });
      res.end(VENDOR_JS);
    } else if (url.pathname === "/sync") {
      res.writeHead(200, { "Content-Type": "application/json", ...cors });
      res.end(JSON.stringify({ ok: true }));
    } else {
      res.writeHead(404, cors);
      res.end();
    }
  });
  const thirdPartyPort = await listen(thirdParty, "127.0.0.1");
  const thirdPartyOrigin = `http://127.0.0.1:${thirdPartyPort}`;

  const publisher = createServer((req, res) => {
    const url = new URL(req.url ?? "/", "http://localhost");
    if (url.pathname === "/") {
      res.writeHead(200, { "Content-Type": "text/html" });
      res.end(PAGE.replace("__VENDOR__", `${thirdPartyOrigin}/vendor.js`));
    } else if (url.pathname === "/cmp.js") {
      res.writeHead(200, { "Content-Type": "text/javascript" });
      res.end(
        CMP_JS.replace("__STRINGS__", JSON.stringify(strings)).replace(
          "__THIRD_PARTY__",
          thirdPartyOrigin,
        ),
      );
    } else {
      res.writeHead(404);
      res.end();
    }
  });
  const publisherPort = await listen(publisher, "127.0.0.1");

  const close = (server: Server) =>
    new Promise<void>((resolve) => server.close(() => resolve()));
  return {
    pageUrl: `http://localhost:${publisherPort}/`,
    thirdPartyOrigin,
    strings,
    close: async () => {
      await Promise.all([close(publisher), close(thirdParty)]);
    },
  };
}

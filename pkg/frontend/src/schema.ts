/** Capture-file document shape consumed by the auditor (schema_version 1). */

export const SCHEMA_VERSION = 1;

export type StageId = "initial" | "accepted" | "rejected" | "revoked";

export interface CookieJson {
  name: string;
  value: string;
  domain: string;
  path: string;
  expires: string | null;
  set_at: string | null;
}

export type HeaderPair = [string, string];

export interface ResponseJson {
  status: number;
  headers: HeaderPair[];
  redirect_url: string | null;
  body_kind: "json" | "html" | "other" | "none";
  body: string | null;
}

export interface RequestJson {
  id: string;
  url: string;
  method: string;
  timestamp: string;
  initiator_url: string | null;
  post_data: string | null;
  request_headers: HeaderPair[];
  response: ResponseJson | null;
}

export interface ApiAccessJson {
  api: "tcfapi" | "onetrust_groups_get" | "onetrust_groups_set";
  command: string | null;
  accessor_script_url: string;
  timestamp: string;
}

export interface ApiSnapshotsJson {
  tcfapi_tc_string: string | null;
  tcfapi_gdpr_applies: boolean | null;
  onetrust_active_groups: string | null;
}

export interface StageJson {
  stage: StageId;
  stage_event_time: string | null;
  cookies: CookieJson[];
  local_storage: [string, string, string][];
  api_snapshots: ApiSnapshotsJson;
  api_accesses: ApiAccessJson[];
  requests: RequestJson[];
}

export interface InterfaceLabelsJson {
  banner: string;
  revocation_channel: string;
  steps_to_revoke: number | null;
  steps_to_accept: number | null;
}

export interface CaptureJson {
  schema_version: number;
  site: string;
  crawl_time: string;
  interface_labels: InterfaceLabelsJson | null;
  stages: StageJson[];
}

/** Selectors for the user actions completing each stage. */
export interface ActionsScript {
  accept: string;
  revoke: string;
  reject: string;
  /** Optional labels copied into the capture. */
  interface_labels?: InterfaceLabelsJson;
}

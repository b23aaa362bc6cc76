"""Command-line interface: decode, validate, scan, report."""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import click

from revaudit.capture import CaptureError, load_session
from revaudit.cookies import load_class_map
from revaudit.onetrust import OneTrustError, parse_active_groups, parse_optanon_cookie
from revaudit.report import AuditConfig, CorpusSummary, SiteReport, aggregate_corpus, analyze_site
from revaudit.tcs import sniff_tcs
from revaudit.thirdparty import load_registry

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INPUT_ERROR = 2


def _stable_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@click.group()
def main() -> None:
    """Audit consent revocation compliance in recorded crawl sessions."""


@main.command()
@click.argument("value")
def decode(value: str) -> None:
    """Pretty-print a TCF consent string or a OneTrust consent value."""
    decoded = sniff_tcs(value)
    if decoded is not None:
        core = asdict(decoded.core)
        for key in ("special_feature_opt_ins", "purposes_consent",
                    "purposes_li_transparency", "vendor_consents", "vendor_li"):
            core[key] = sorted(core[key])
        core["publisher_restrictions"] = [
            {
                "purpose_id": r.purpose_id,
                "restriction_type": r.restriction_type,
                "vendor_ids": sorted(r.vendor_ids),
            }
            for r in decoded.core.publisher_restrictions
        ]
        click.echo(_stable_json({
            "format": "tcf_v2",
            "core": core,
            "extra_segments": [
                {"segment_type": t, "raw": raw} for t, raw in decoded.extra_segments
            ],
        }), nl=False)
        return
    try:
        parsed = parse_optanon_cookie(value)
    except OneTrustError:
        parsed = None
    if parsed is None and "," in value and "=" not in value:
        parsed = parse_active_groups(value)
    if parsed is not None:
        click.echo(_stable_json({
            "format": "onetrust",
            "source": parsed.source,
            "enabled_groups": sorted(parsed.enabled_groups),
            "disabled_groups": sorted(parsed.disabled_groups),
            "raw_pairs": [list(p) for p in parsed.raw_pairs],
        }), nl=False)
        return
    click.echo("not a recognized consent value", err=True)
    sys.exit(EXIT_INPUT_ERROR)


@main.command()
@click.argument("session_files", nargs=-1, required=True, type=click.Path(exists=True))
def validate(session_files: tuple[str, ...]) -> None:
    """Schema-check capture files."""
    failures = 0
    for path in session_files:
        try:
            load_session(path)
            click.echo(f"{path}: ok")
        except CaptureError as exc:
            failures += 1
            click.echo(f"{path}: {exc.__class__.__name__}: {exc}", err=True)
    if failures:
        sys.exit(EXIT_INPUT_ERROR)


@main.command()
@click.argument("session_file", type=click.Path(exists=True))
@click.option("--suffix-list", type=click.Path(exists=True), default=None)
def extract(session_file: str, suffix_list: str | None) -> None:
    """Dump every consent-string observation found in a capture's traffic."""
    from revaudit.netscan import scan_stage
    from revaudit.tcs import encode_tc_core

    try:
        session = load_session(session_file)
    except CaptureError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    registry = load_registry(suffix_list=suffix_list)
    payload = []
    for stage in session.stages:
        for obs in scan_stage(stage, registry.domain_of):
            payload.append(
                {
                    "stage": stage.stage,
                    "location": obs.location,
                    "direction": obs.direction,
                    "request_id": obs.request_id,
                    "request_url": obs.request_url,
                    "receiver_party": obs.receiver_party,
                    "tc_string": encode_tc_core(obs.value.core, obs.value.extra_segments),
                }
            )
    click.echo(_stable_json(payload), nl=False)


def _build_config(
    grace_window: float,
    cookie_classes: str | None,
    cmp_list: str | None,
    suffix_list: str | None,
    tracking_domains: str | None,
    first_party_aliases: str | None = None,
) -> AuditConfig:
    return AuditConfig(
        grace_window_seconds=grace_window,
        class_map=load_class_map(cookie_classes) if cookie_classes else None,
        registry=load_registry(
            suffix_list=suffix_list,
            cmp_list=cmp_list,
            tracking_domains=tracking_domains,
            first_party_aliases=first_party_aliases,
        ),
    )


def _scan_one(args: tuple[str, AuditConfig]) -> dict:
    path, config = args
    session = load_session(path)
    return analyze_site(session, config).to_dict()


@main.command()
@click.argument("session_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--grace-window", type=float, default=5.0, show_default=True,
              help="Seconds after the revocation action during which stale consent in traffic is informational.")
@click.option("--cookie-classes", type=click.Path(exists=True), default=None)
@click.option("--cmp-list", type=click.Path(exists=True), default=None)
@click.option("--suffix-list", type=click.Path(exists=True), default=None)
@click.option("--tracking-domains", type=click.Path(exists=True), default=None)
@click.option("--first-party-aliases", type=click.Path(exists=True), default=None,
              help="Per-site alias file declaring same-operator domains first party.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Write one <site>.report.json per session instead of stdout.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--fail-on-violation", is_flag=True, default=False)
def scan(
    session_files: tuple[str, ...],
    grace_window: float,
    cookie_classes: str | None,
    cmp_list: str | None,
    suffix_list: str | None,
    tracking_domains: str | None,
    first_party_aliases: str | None,
    out_dir: str | None,
    jobs: int,
    fail_on_violation: bool,
) -> None:
    """Analyze capture files and emit one site report per session."""
    try:
        config = _build_config(grace_window, cookie_classes, cmp_list, suffix_list,
                               tracking_domains, first_party_aliases)
    except (OSError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    tasks = [(path, config) for path in session_files]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_scan_one, tasks))
        else:
            results = [_scan_one(task) for task in tasks]
    except CaptureError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)

    if out_dir is not None:
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for path, result in zip(session_files, results):
            name = Path(path).stem + ".report.json"
            (directory / name).write_text(_stable_json(result), encoding="utf-8")
        click.echo(f"wrote {len(results)} reports to {directory}")
    else:
        click.echo(_stable_json(results), nl=False)

    if fail_on_violation and any(
        f["severity"] == "violation" for r in results for f in r["findings"]
    ):
        sys.exit(EXIT_VIOLATIONS)


def _summary_csv(summary_dict: dict) -> str:
    lines = ["row_id,label,count,denominator,percentage"]
    for row in summary_dict["rows"]:
        pct = "" if row["percentage"] is None else f"{row['percentage']:.2f}"
        label = row["label"].replace('"', '""')
        lines.append(f"{row['row_id']},\"{label}\",{row['count']},{row['denominator']},{pct}")
    lines.append("")
    lines.append("bucket,websites")
    for bucket, count in summary_dict["histogram"].items():
        lines.append(f"\"{bucket}\",{count}")
    return "\n".join(lines) + "\n"


def _report_from_dict(raw: dict) -> SiteReport:
    from revaudit.capture import CmpDetection
    from revaudit.findings import Finding
    from revaudit.thirdparty import PartyReport

    return SiteReport(
        site=raw["site"],
        cmp=CmpDetection(
            tcf=raw["cmp"]["tcf"],
            onetrust=raw["cmp"]["onetrust"],
            evidence=tuple(raw["cmp"]["evidence"]),
        ),
        category=raw["category"],
        interface_labels=raw["interface_labels"],
        stages_present=tuple(raw["stages_present"]),
        revocation_possible=raw["revocation_possible"],
        rejection_possible=raw["rejection_possible"],
        aa_counts=raw["aa_counts"],
        findings=[
            Finding(
                kind=f["kind"],
                rules=frozenset(f["rules"]),
                stage=f["stage"],
                site=f["site"],
                evidence=tuple(f["evidence"]),
                responsible_party=f["responsible_party"],
                severity=f["severity"],
                locator=f["locator"],
                source=f["source"],
                subkind=f["subkind"],
            )
            for f in raw["findings"]
        ],
        party_reports=[
            PartyReport(
                party=p["party"],
                informed_at_accept=p["informed_at_accept"],
                informed_at_revoke=p["informed_at_revoke"],
                channels=frozenset(p["channels"]),
                set_cookie_after_revocation=p["set_cookie_after_revocation"],
                is_tracking_domain=p["is_tracking_domain"],
            )
            for p in raw["party_reports"]
        ],
        percentage_not_informed=raw["percentage_not_informed"],
        source_summary=raw["source_summary"],
        checks=raw["checks"],
    )


@main.command()
@click.argument("report_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the summary to a file instead of stdout.")
def report(report_files: tuple[str, ...], fmt: str, out: str | None) -> None:
    """Aggregate site reports into the corpus prevalence summary."""
    reports: list[SiteReport] = []
    for path in report_files:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"{path}: {exc}", err=True)
            sys.exit(EXIT_INPUT_ERROR)
        items = raw if isinstance(raw, list) else [raw]
        try:
            reports.extend(_report_from_dict(item) for item in items)
        except (KeyError, TypeError) as exc:
            click.echo(f"{path}: malformed report: {exc}", err=True)
            sys.exit(EXIT_INPUT_ERROR)
    summary: CorpusSummary = aggregate_corpus(reports)
    payload = summary.to_dict()
    text = _stable_json(payload) if fmt == "json" else _summary_csv(payload)
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()

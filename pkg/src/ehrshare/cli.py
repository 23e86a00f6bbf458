"""Command-line harness over a persisted simulation world.

Exit status: 0 success, 1 domain error (ledger revert strings are printed
verbatim), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import parse_size, run_bench
from .client import GrantPackage, Role
from .deid import DeidPolicy, deidentify, k_anonymity, parse_bundle, quasi_identifiers
from .encoding import from_hex, to_hex
from .errors import EhrError
from .ledger import EventKind, dump_jsonl
from .ledger.gas import OPERATIONS
from .world import World

DEFAULT_WORLD = "ehr-world"
PROFILES = ("l1", "arbitrum", "zksync")


class UsageError(Exception):
    """Bad command-line input detected after argparse accepted it."""


def _emit(args, data: dict, text: str | None = None) -> None:
    if args.json:
        print(json.dumps(data, sort_keys=True))
    else:
        print(text if text is not None else "\n".join(f"{k}: {v}" for k, v in data.items()))


def _read_bytes(path: str) -> bytes:
    try:
        return sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


# -- world ---------------------------------------------------------------------


def cmd_world_init(args) -> World:
    world = World.create(args.world, seed=args.seed, profile=args.gas_profile, chain_id=args.chain_id)
    _emit(args, {"world": str(world.root), "profile": world.profile, "clock": world.clock.now})
    return world


def cmd_world_show(args, world: World) -> None:
    data = {
        "profile": world.profile,
        "clock": world.clock.now,
        "actors": {n: {"role": a.role.value, "address": to_hex(a.address)} for n, a in world.actors.items()},
        "ledgers": {
            world.name_of(p): {"address": to_hex(l.address), "records": l.record_count, "events": len(l.events), "gas": l.gas_used}
            for p, l in world.ledgers.items()
        },
        "guardians": {n: {"staff": [world.name_of(s) for s in sorted(g.staff)]} for n, g in world.guardians.items()},
        "blobs": len(world.store),
    }
    _emit(args, data, json.dumps(data, indent=2, sort_keys=True))


def cmd_world_save(args, world: World) -> None:
    world.save(args.to)
    _emit(args, {"saved": str(args.to)})


def cmd_world_load(args) -> World:
    World.load(args.source).save(args.world)
    loaded = World.load(args.world)
    _emit(args, {"loaded": str(args.source), "world": str(args.world)})
    return loaded


# -- actors --------------------------------------------------------------------


def cmd_actor_create(args, world: World) -> None:
    actor = world.create_actor(args.name, args.role, register=not args.no_register)
    data = {"name": actor.name, "role": actor.role.value, "address": to_hex(actor.address)}
    if actor.role == Role.patient:
        data["ledger"] = to_hex(world.ledgers[actor.address].address)
    _emit(args, data)


def cmd_actor_register(args, world: World) -> None:
    actor = world.actor(args.name)
    version = actor.register(world.registry)
    _emit(args, {"name": actor.name, "version": version})


def cmd_actor_rotate(args, world: World) -> None:
    actor = world.actor(args.name)
    version = actor.rotate_encryption_key(world.registry, world.rng, discard_old=args.discard_old)
    _emit(args, {"name": actor.name, "version": version})


def cmd_actor_list(args, world: World) -> None:
    rows = []
    for a in world.actors.values():
        try:
            _, version = world.registry.get_key(a.address)
        except EhrError:
            version = None
        rows.append({"name": a.name, "role": a.role.value, "address": to_hex(a.address), "keyVersion": version})
    text = "\n".join(f"{r['name']:<16}{r['role']:<11}{r['address']}  v{r['keyVersion']}" for r in rows)
    _emit(args, {"actors": rows}, text)


# -- records -------------------------------------------------------------------


def cmd_record_add(args, world: World) -> None:
    patient = world.actor(args.patient)
    ledger = world.ledger(args.patient)
    guardian = world.guardian(args.guardian) if args.guardian else None
    rec = world.client.create_record(patient, ledger, _read_bytes(args.file), guardian=guardian)
    _emit(args, {"rid": rec.rid, "ptr": str(rec.ptr), "digest": to_hex(rec.digest)})


def cmd_record_get(args, world: World) -> None:
    actor = world.actor(args.as_)
    ledger = world.ledger(args.patient)
    plaintext = world.client.access_record(actor, ledger, args.rid, log_receipt=args.log, via_events=args.via_events)
    if args.out:
        Path(args.out).write_bytes(plaintext)
        _emit(args, {"rid": args.rid, "bytes": len(plaintext), "out": args.out})
    elif args.json:
        _emit(args, {"rid": args.rid, "bytes": len(plaintext), "plaintextHex": plaintext.hex()})
    else:
        sys.stdout.buffer.write(plaintext)
        sys.stdout.flush()


def _write_packages(args, packages: dict[bytes, GrantPackage], world: World) -> dict:
    out = {}
    for grantee, pkg in packages.items():
        name = world.name_of(grantee)
        if args.packages_dir:
            path = Path(args.packages_dir) / f"grant-{pkg.rid}-{name}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(pkg.to_json())
            out[name] = str(path)
        else:
            out[name] = pkg.to_dict()
    return out


def cmd_record_rotate(args, world: World) -> None:
    patient = world.actor(args.patient)
    ledger = world.ledger(args.patient)
    keep = [world.address(k) for k in args.keep]
    expiration = _expiration(args, world) if (args.expiration or args.expires_in) else None
    res = world.client.rotate_record(patient, ledger, args.rid, _read_bytes(args.file), keep, expiration)
    _emit(args, {"rid": args.rid, "ptr": str(res.ptr), "digest": to_hex(res.digest), "packages": _write_packages(args, res.packages, world)})


# -- grants --------------------------------------------------------------------


def _expiration(args, world: World) -> int:
    if args.expiration is not None:
        return args.expiration
    if args.expires_in is not None:
        return world.clock.now + args.expires_in
    raise UsageError("one of --expiration or --expires-in is required")


def cmd_grant_create(args, world: World) -> None:
    patient = world.actor(args.patient)
    ledger = world.ledger(args.patient)
    pkg = world.client.grant_access(patient, ledger, args.rid, world.address(args.grantee), _expiration(args, world))
    if args.out:
        Path(args.out).write_text(pkg.to_json())
    _emit(args, {"package": pkg.to_dict(), "out": args.out}, args.out and f"package written to {args.out}" or pkg.to_json())


def cmd_grant_submit(args, world: World) -> None:
    grantee = world.actor(args.as_)
    ledger = world.ledger(args.patient)
    pkg = GrantPackage.from_json(_read_bytes(args.package).decode("utf-8"))
    world.client.submit_grant(grantee, ledger, pkg)
    patient = world.actors.get(world.name_of(ledger.patient))
    if patient is not None:
        patient.journal.reconcile(ledger)
    _emit(args, {"rid": pkg.rid, "grantee": to_hex(pkg.grantee), "expiration": pkg.expiration})


def cmd_revoke(args, world: World) -> None:
    patient = world.actor(args.patient)
    ledger = world.ledger(args.patient)
    world.client.revoke_access(patient, ledger, args.rid, world.address(args.grantee))
    _emit(args, {"rid": args.rid, "revoked": to_hex(world.address(args.grantee))})


# -- emergency -----------------------------------------------------------------


def cmd_emergency_roster(args, world: World) -> None:
    ledger = world.ledger(args.patient)
    physician = world.address(args.physician)
    ledger.set_emergency_physician(ledger.patient, physician, not args.disable)
    _emit(args, {"physician": to_hex(physician), "enabled": not args.disable})


def cmd_emergency_grant(args, world: World) -> None:
    ledger = world.ledger(args.patient)
    grant_id = world.client.emergency_grant(
        world.actor(args.physician1),
        world.actor(args.physician2),
        world.guardian(args.guardian),
        ledger,
        args.rid,
        args.code,
        request_time=args.request_time,
        max_skew=args.max_skew,
    )
    grant = ledger.emergency_grants(grant_id)
    _emit(args, {"grantId": to_hex(grant_id), "rid": args.rid, "expiration": grant.expiration})


def cmd_emergency_confirm(args, world: World) -> None:
    ledger = world.ledger(args.patient)
    world.client.confirm_emergency(world.actor(args.as_), ledger, from_hex(args.grant_id), args.justification)
    _emit(args, {"grantId": args.grant_id, "confirmed": True})


def cmd_guardian_staff(args, world: World) -> None:
    g = world.guardian(args.guardian)
    for ref in args.add:
        g.add_staff(world.address(ref))
    for ref in args.remove:
        g.remove_staff(world.address(ref))
    _emit(args, {"guardian": args.guardian, "staff": sorted(world.name_of(s) for s in g.staff)})


# -- events --------------------------------------------------------------------


def cmd_events_query(args, world: World) -> None:
    ledger = world.ledger(args.patient)
    events = ledger.query_events(
        kind=args.kind or None,
        rid=args.rid,
        address=world.address(args.address) if args.address else None,
        start=args.start,
        end=args.end,
    )
    rows = [ev.to_json() for ev in events]
    text = "\n".join(json.dumps(r, sort_keys=True) for r in rows)
    _emit(args, {"events": rows}, text)


def cmd_events_export(args, world: World) -> None:
    ledger = world.ledger(args.patient)
    Path(args.out).write_text(dump_jsonl(ledger.events))
    _emit(args, {"events": len(ledger.events), "out": args.out})


# -- deid ----------------------------------------------------------------------


def _policy(args) -> DeidPolicy:
    seed = from_hex(args.shift_seed) if args.shift_seed else None
    return DeidPolicy.load(args.policy, shift_seed=seed)


def cmd_deid_run(args) -> None:
    policy = _policy(args)
    out = deidentify(_read_bytes(args.input), policy)
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        _emit(args, {"out": args.out, "quasiIdentifiers": list(quasi_identifiers(out, policy))})
    else:
        print(text)


def cmd_deid_kanon(args) -> None:
    policy = _policy(args)
    rows = []
    for path in args.inputs:
        data = json.loads(_read_bytes(path))
        if isinstance(data, list):
            # a JSON list is either quasi-identifier rows or bundles
            for item in data:
                if isinstance(item, list):
                    rows.append(tuple(item))
                else:
                    rows.append(quasi_identifiers(deidentify(item, policy), policy))
        else:
            rows.append(quasi_identifiers(deidentify(parse_bundle(data), policy), policy))
    report = k_anonymity(rows, args.k)
    _emit(args, report.to_dict(), json.dumps(report.to_dict(), indent=2, sort_keys=True))


# -- clock, gas, bench ----------------------------------------------------------


def cmd_clock_advance(args, world: World) -> None:
    world.clock.advance(args.seconds)
    _emit(args, {"now": world.clock.now})


def cmd_clock_show(args, world: World) -> None:
    _emit(args, {"now": world.clock.now})


def cmd_gas_report(args, world: World) -> None:
    ledgers = [world.ledger(args.patient)] if args.patient else list(world.ledgers.values())
    per_op: dict[str, dict] = {}
    receipts = []
    for ledger in ledgers:
        for r in ledger.receipts:
            row = per_op.setdefault(r.operation, {"count": 0, "gas": 0})
            row["count"] += 1
            row["gas"] += r.gas
            receipts.append({"ledger": to_hex(ledger.address), "op": r.operation, "gas": r.gas, "caller": to_hex(r.caller), "time": r.time})
    total = sum(r["gas"] for r in per_op.values())
    lines = [f"{op:<24}{row['count']:>6}{row['gas']:>14,}" for op, row in sorted(per_op.items())]
    lines.append(f"{'total':<24}{'':>6}{total:>14,}")
    _emit(args, {"profile": world.profile, "operations": per_op, "total": total, "receipts": receipts}, "\n".join(lines))


def cmd_gas_table(args) -> None:
    from .ledger import GasModel

    gas = GasModel.load()
    data = {p: {op: gas.gas_of(op, p) for op in OPERATIONS} for p in PROFILES}
    est = {p: sorted(gas.estimated.get(p, ())) for p in PROFILES}
    lines = [f"{'operation':<24}" + "".join(f"{p:>12}" for p in PROFILES)]
    for op in OPERATIONS:
        cells = "".join(f"{data[p][op]:>11,}{'*' if op in est[p] else ' '}" for p in PROFILES)
        lines.append(f"{op:<24}{cells}")
    lines.append("* estimated")
    _emit(args, {"profiles": data, "estimated": est}, "\n".join(lines))


def cmd_bench(args) -> None:
    sizes = [parse_size(s) for s in args.sizes.split(",") if s.strip()]
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    report = run_bench(sizes, args.trials, args.warmup)
    _emit(args, report.to_dict(), report.table())


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehrshare", description="Encrypted health record sharing simulator")
    p.add_argument("--world", default=DEFAULT_WORLD, help="world directory (default: %(default)s)")
    p.add_argument("--json", action="store_true", help="structured JSON output")
    sub = p.add_subparsers(dest="command", required=True)

    def group(name: str, help_: str):
        g = sub.add_parser(name, help=help_).add_subparsers(dest="action", required=True)
        return g

    w = group("world", "create, inspect and copy worlds")
    c = w.add_parser("init")
    c.add_argument("--seed", type=int, help="fixed seed for a reproducible world (default: live entropy)")
    c.add_argument("--gas-profile", choices=PROFILES, default="l1")
    c.add_argument("--chain-id", type=int, default=1)
    c.set_defaults(fn=cmd_world_init, needs_world=False, creates=True)
    w.add_parser("show").set_defaults(fn=cmd_world_show, mutates=False)
    c = w.add_parser("save")
    c.add_argument("--to", required=True)
    c.set_defaults(fn=cmd_world_save, mutates=False)
    c = w.add_parser("load")
    c.add_argument("--from", dest="source", required=True)
    c.set_defaults(fn=cmd_world_load, needs_world=False, creates=True)

    a = group("actor", "participants and their registry keys")
    c = a.add_parser("create")
    c.add_argument("name")
    c.add_argument("--role", choices=[r.value for r in Role], required=True)
    c.add_argument("--no-register", action="store_true")
    c.set_defaults(fn=cmd_actor_create)
    c = a.add_parser("register-key")
    c.add_argument("name")
    c.set_defaults(fn=cmd_actor_register)
    c = a.add_parser("rotate-key")
    c.add_argument("name")
    c.add_argument("--discard-old", action="store_true", help="forget the previous private key")
    c.set_defaults(fn=cmd_actor_rotate)
    a.add_parser("list").set_defaults(fn=cmd_actor_list, mutates=False)

    r = group("record", "create, read and rotate records")
    c = r.add_parser("add")
    c.add_argument("--patient", required=True)
    c.add_argument("--file", required=True)
    c.add_argument("--guardian")
    c.set_defaults(fn=cmd_record_add)
    c = r.add_parser("get")
    c.add_argument("--as", dest="as_", required=True)
    c.add_argument("--patient", required=True)
    c.add_argument("--rid", type=int, required=True)
    c.add_argument("--out")
    c.add_argument("--log", action="store_true", help="record an access receipt on the ledger")
    c.add_argument("--via-events", action="store_true", help="read pointer and digest from the event log")
    c.set_defaults(fn=cmd_record_get)
    for name in ("update", "rotate"):
        c = r.add_parser(name, help="re-encrypt under a fresh key")
        c.add_argument("--patient", required=True)
        c.add_argument("--rid", type=int, required=True)
        c.add_argument("--file", required=True)
        c.add_argument("--keep", action="append", default=[], help="grantee to re-issue a package for")
        c.add_argument("--expiration", type=int)
        c.add_argument("--expires-in", type=int)
        c.add_argument("--packages-dir")
        c.set_defaults(fn=cmd_record_rotate)

    g = group("grant", "signed permission packages")
    c = g.add_parser("create")
    c.add_argument("--patient", required=True)
    c.add_argument("--rid", type=int, required=True)
    c.add_argument("--grantee", required=True)
    c.add_argument("--expiration", type=int)
    c.add_argument("--expires-in", type=int)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_grant_create)
    c = g.add_parser("submit")
    c.add_argument("--as", dest="as_", required=True)
    c.add_argument("--patient", required=True)
    c.add_argument("--package", required=True)
    c.set_defaults(fn=cmd_grant_submit)

    c = sub.add_parser("revoke", help="revoke a grantee's permission")
    c.add_argument("--patient", required=True)
    c.add_argument("--rid", type=int, required=True)
    c.add_argument("--grantee", required=True)
    c.set_defaults(fn=cmd_revoke)

    e = group("emergency", "two-physician emergency access")
    c = e.add_parser("roster")
    c.add_argument("--patient", required=True)
    c.add_argument("--physician", required=True)
    c.add_argument("--disable", action="store_true")
    c.set_defaults(fn=cmd_emergency_roster)
    c = e.add_parser("grant")
    c.add_argument("--patient", required=True)
    c.add_argument("--rid", type=int, required=True)
    c.add_argument("--physician1", required=True)
    c.add_argument("--physician2", required=True)
    c.add_argument("--guardian", required=True)
    c.add_argument("--code", type=int, default=1)
    c.add_argument("--request-time", type=int)
    c.add_argument("--max-skew", type=int, default=300)
    c.set_defaults(fn=cmd_emergency_grant)
    c = e.add_parser("confirm")
    c.add_argument("--as", dest="as_", required=True)
    c.add_argument("--patient", required=True)
    c.add_argument("--grant-id", required=True)
    c.add_argument("--justification", required=True)
    c.set_defaults(fn=cmd_emergency_confirm)

    gd = group("guardian", "institutional guardian staff roster")
    c = gd.add_parser("staff")
    c.add_argument("--guardian", required=True)
    c.add_argument("--add", action="append", default=[])
    c.add_argument("--remove", action="append", default=[])
    c.set_defaults(fn=cmd_guardian_staff)

    ev = group("events", "ledger event log")
    c = ev.add_parser("query")
    c.add_argument("--patient", required=True)
    c.add_argument("--kind", action="append", choices=[k.value for k in EventKind])
    c.add_argument("--rid", type=int)
    c.add_argument("--address")
    c.add_argument("--start", type=int)
    c.add_argument("--end", type=int)
    c.set_defaults(fn=cmd_events_query, mutates=False)
    c = ev.add_parser("export")
    c.add_argument("--patient", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_events_export, mutates=False)

    d = group("deid", "de-identification")
    for name, fn in (("run", cmd_deid_run), ("k-anon", cmd_deid_kanon)):
        c = d.add_parser(name)
        if name == "run":
            c.add_argument("--in", dest="input", required=True)
            c.add_argument("--out")
        else:
            c.add_argument("inputs", nargs="+", help="bundle files, JSON lists of bundles, or JSON lists of rows")
            c.add_argument("--k", type=int, default=5)
        c.add_argument("--policy")
        c.add_argument("--shift-seed", help="hex key for the per-patient date shift")
        c.set_defaults(fn=fn, needs_world=False)

    cl = group("clock", "simulated block time")
    c = cl.add_parser("advance")
    c.add_argument("--seconds", type=int, required=True)
    c.set_defaults(fn=cmd_clock_advance)
    cl.add_parser("show").set_defaults(fn=cmd_clock_show, mutates=False)

    gs = group("gas", "gas accounting")
    c = gs.add_parser("report")
    c.add_argument("--patient")
    c.set_defaults(fn=cmd_gas_report, mutates=False)
    gs.add_parser("table").set_defaults(fn=cmd_gas_table, needs_world=False)

    c = sub.add_parser("bench", help="crypto latency and overhead")
    c.add_argument("--sizes", default="1KB,100KB,1MB,10MB")
    c.add_argument("--trials", type=int, default=50)
    c.add_argument("--warmup", type=int, default=2)
    c.set_defaults(fn=cmd_bench, needs_world=False)
    return p


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "creates", False):
            world = args.fn(args)
            world.save()
        elif not getattr(args, "needs_world", True):
            args.fn(args)
        else:
            world = World.load(args.world)
            args.fn(args, world)
            if getattr(args, "mutates", True):
                world.save()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except EhrError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())

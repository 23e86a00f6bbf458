"""The persisted simulation universe driven by the CLI.

A world directory holds ``world.json`` (public state: registry, ledgers with
their events, actor public keys, guardian rosters and envelopes, blob index),
``keystore.json`` (private keys, nonce journals, RNG state) and ``blobs/``.
Private key material is never written to ``world.json``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .blobstore import FileBlobStore
from .client import Actor, EhrClient, GuardianService, Role
from .crypto.rng import DeterministicRng, system_rng
from .encoding import from_hex, to_hex
from .errors import EhrError
from .ledger import GasModel, PatientLedger, SimClock
from .registry import KeyRegistry

SCHEMA_VERSION = 1
WORLD_FILE = "world.json"
KEYSTORE_FILE = "keystore.json"


class WorldError(EhrError):
    """The world directory is missing, malformed, or lacks a named entity."""


def _write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


@dataclass
class World:
    root: Path
    rng: DeterministicRng
    profile: str = "l1"
    chain_id: int = 1
    clock: SimClock = field(default_factory=SimClock)
    registry: KeyRegistry = field(default_factory=KeyRegistry)
    gas: GasModel = field(default_factory=GasModel.load)
    actors: dict[str, Actor] = field(default_factory=dict)
    ledgers: dict[bytes, PatientLedger] = field(default_factory=dict)
    guardians: dict[str, GuardianService] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        self.store = FileBlobStore(self.root / "blobs")
        self.client = EhrClient(self.registry, self.store, self.rng)

    # -- construction ---------------------------------------------------------

    @classmethod
    def create(cls, root: str | Path, seed: int | None = None, profile: str = "l1", chain_id: int = 1) -> "World":
        root = Path(root)
        if (root / WORLD_FILE).exists():
            raise WorldError(f"world already exists at {root}")
        seed_bytes = system_rng(32) if seed is None else seed.to_bytes(32, "big")
        gas = GasModel.load()
        gas.gas_of("deploy", profile)  # reject unknown profiles up front
        return cls(root, DeterministicRng(seed_bytes), profile, chain_id, gas=gas)

    @classmethod
    def load(cls, root: str | Path) -> "World":
        root = Path(root)
        try:
            pub = json.loads((root / WORLD_FILE).read_text())
            keys = json.loads((root / KEYSTORE_FILE).read_text())
        except FileNotFoundError:
            raise WorldError(f"no world at {root}; run 'world init' first") from None
        except json.JSONDecodeError as exc:
            raise WorldError(f"corrupt world file: {exc}") from exc
        if pub.get("schema") != SCHEMA_VERSION or keys.get("schema") != SCHEMA_VERSION:
            raise WorldError(f"unsupported world schema {pub.get('schema')!r}")
        clock = SimClock(pub["clock"])
        registry = KeyRegistry.from_dict(pub["registry"])
        gas = GasModel.load()
        world = cls(
            root,
            DeterministicRng.from_state(keys["rng"]),
            pub["profile"],
            pub["chainId"],
            clock,
            registry,
            gas,
        )
        for name, ks in keys["actors"].items():
            world.actors[name] = Actor.from_keystore(ks)
        for d in pub["ledgers"]:
            ledger = PatientLedger.from_dict(d, registry, clock, gas)
            world.ledgers[ledger.patient] = ledger
        for g in pub["guardians"]:
            world.guardians[g["name"]] = GuardianService.from_dict(g, world.actors[g["name"]], registry, world.rng)
        for ledger_hex, name in pub.get("ledgerGuardians", {}).items():
            world.client.guardians[from_hex(ledger_hex)] = world.guardians[name]
        return world

    def save(self, root: str | Path | None = None) -> Path:
        root = Path(root) if root is not None else self.root
        guardian_names = {id(g): n for n, g in self.guardians.items()}
        pub = {
            "schema": SCHEMA_VERSION,
            "profile": self.profile,
            "chainId": self.chain_id,
            "clock": self.clock.now,
            "registry": self.registry.to_dict(),
            "actors": [a.public_dict() for a in self.actors.values()],
            "ledgers": [l.to_dict() for l in self.ledgers.values()],
            "guardians": [{"name": n, **g.to_dict()} for n, g in self.guardians.items()],
            "ledgerGuardians": {to_hex(a): guardian_names[id(g)] for a, g in self.client.guardians.items()},
            "blobs": sorted(f"{self.store.scheme}://{p.name}" for p in self.store.root.glob("??/??/*")),
        }
        keys = {
            "schema": SCHEMA_VERSION,
            "rng": self.rng.state(),
            "actors": {n: a.keystore_dict() for n, a in self.actors.items()},
        }
        if root != self.root:
            # copy blobs so the saved world is self-contained
            target = FileBlobStore(root / "blobs")
            for path in self.store.root.glob("??/??/*"):
                dest = target.path_for(path.name)
                dest.parent.mkdir(parents=True, exist_ok=True)
                dest.write_bytes(path.read_bytes())
        _write_json(root / WORLD_FILE, pub)
        _write_json(root / KEYSTORE_FILE, keys)
        return root

    # -- entities -------------------------------------------------------------

    def create_actor(self, name: str, role: Role | str, register: bool = True) -> Actor:
        if name in self.actors:
            raise WorldError(f"actor {name!r} already exists")
        if name.startswith("0x"):
            raise WorldError("actor names must not start with 0x")
        actor = Actor.create(name, role, self.rng)
        self.actors[name] = actor
        if register:
            actor.register(self.registry)
        if actor.role == Role.patient:
            self.ledgers[actor.address] = PatientLedger(
                actor.address, self.registry, self.clock, self.gas, self.profile, chain_id=self.chain_id
            )
        if actor.role == Role.guardian:
            self.guardians[name] = GuardianService(actor, self.registry, self.rng)
        return actor

    def actor(self, ref: str) -> Actor:
        if ref in self.actors:
            return self.actors[ref]
        if ref.startswith("0x"):
            addr = from_hex(ref)
            for a in self.actors.values():
                if a.address == addr:
                    return a
        raise WorldError(f"unknown actor {ref!r}")

    def address(self, ref: str) -> bytes:
        """Actor name or raw 0x address (which need not belong to a known actor)."""
        if ref in self.actors:
            return self.actors[ref].address
        if ref.startswith("0x") and len(from_hex(ref)) == 20:
            return from_hex(ref)
        raise WorldError(f"unknown actor or address {ref!r}")

    def ledger(self, patient_ref: str) -> PatientLedger:
        addr = self.address(patient_ref)
        if addr not in self.ledgers:
            raise WorldError(f"no ledger deployed for {patient_ref!r}")
        return self.ledgers[addr]

    def guardian(self, name: str) -> GuardianService:
        if name not in self.guardians:
            raise WorldError(f"unknown guardian {name!r}")
        return self.guardians[name]

    def name_of(self, address: bytes) -> str:
        for n, a in self.actors.items():
            if a.address == address:
                return n
        return to_hex(address)

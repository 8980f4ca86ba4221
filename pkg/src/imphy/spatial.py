"""Bit-to-transmit-vector mappers for SM, GSM, MA-SM, ESM, QSM, SIMO and V-BLAST.

Input bits are laid out spatial bits first, constellation bits after.
Antenna indices are 0-based here; user-facing output adds one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import combinatorics as cmb
from .combinatorics import ActivationPattern
from .constellation import (Constellation, bits_to_int, bits_str, default_constellation,
                            int_to_bits, make_psk, make_qam, make_star_qam8, parse_bits)
from .errors import CapacityError, NotACodewordError, UsageError

KINDS = ("SM", "GSM", "MA-SM", "ESM", "QSM", "SIMO", "V-BLAST")
ENUM_GUARD = 24


@dataclass(frozen=True)
class EsmCombination:
    """One spatial combination: a constellation id (or None) per antenna plus a rotation."""
    spatial_bits: str
    constellations: tuple[str | None, ...]
    rotation: float = 0.0

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.constellations) if c is not None)


@dataclass(frozen=True, eq=False)
class EsmTable:
    n_t: int
    constellations: dict
    combinations: tuple[EsmCombination, ...]
    name: str = "custom"
    normative: bool = False

    def __post_init__(self):
        combos = tuple(self.combinations)
        object.__setattr__(self, "combinations", combos)
        if not combos:
            raise UsageError("ESM table has no combinations")
        nb = len(combos[0].spatial_bits)
        if len(combos) != 1 << nb:
            raise UsageError(f"ESM table needs {1 << nb} combinations for {nb} spatial bits")
        if sorted(int(c.spatial_bits, 2) for c in combos) != list(range(len(combos))):
            raise UsageError("ESM spatial bit labels must cover every pattern exactly once")
        widths = set()
        for c in combos:
            if len(c.constellations) != self.n_t:
                raise UsageError(f"combination {c.spatial_bits} does not list {self.n_t} antennas")
            if not c.active:
                raise UsageError(f"combination {c.spatial_bits} activates no antenna")
            for cid in c.constellations:
                if cid is not None and cid not in self.constellations:
                    raise UsageError(f"unknown constellation id {cid!r}")
            widths.add(sum(self.constellations[cid].bits_per_symbol
                           for cid in c.constellations if cid is not None))
        if len(widths) != 1:
            raise UsageError(f"ESM combinations carry unequal symbol bits {sorted(widths)}")
        object.__setattr__(self, "combinations",
                           tuple(sorted(combos, key=lambda c: int(c.spatial_bits, 2))))

    @property
    def spatial_bits(self) -> int:
        return len(self.combinations[0].spatial_bits)

    @property
    def symbol_bits(self) -> int:
        c = self.combinations[0]
        return sum(self.constellations[cid].bits_per_symbol
                   for cid in c.constellations if cid is not None)


@dataclass(frozen=True, eq=False)
class SpatialScheme:
    kind: str
    n_t: int
    constellation: Constellation
    n_a: int = 1
    esm: EsmTable | None = None
    label: str = field(default="")

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise UsageError(f"unknown spatial scheme {self.kind!r}")
        pow2 = self.n_t >= 1 and self.n_t & (self.n_t - 1) == 0
        if kind in ("SM", "QSM") and not (pow2 and self.n_t >= 2):
            raise UsageError(f"{kind} needs n_T a power of 2 >= 2, got {self.n_t}")
        if kind == "SIMO" and self.n_t != 1:
            raise UsageError("SIMO has a single transmit antenna")
        if kind in ("GSM", "MA-SM"):
            if not 1 <= self.n_a <= self.n_t:
                raise UsageError(f"n_A={self.n_a} must lie in [1, n_T={self.n_t}]")
            if kind == "GSM" and cmb.index_bits(self.n_t, self.n_a) < 1:
                raise UsageError(f"GSM({self.n_t},{self.n_a}) carries no spatial bits")
        if kind == "ESM":
            if self.esm is None:
                raise UsageError("ESM scheme needs a combination table")
            if self.esm.n_t != self.n_t:
                raise UsageError("ESM table antenna count disagrees with n_T")
        if kind == "V-BLAST":
            object.__setattr__(self, "n_a", self.n_t)
        if not self.label:
            object.__setattr__(self, "label", kind.lower())

    @property
    def spatial_bits(self) -> int:
        k = self.kind
        if k == "SM":
            return self.n_t.bit_length() - 1
        if k == "QSM":
            return 2 * (self.n_t.bit_length() - 1)
        if k in ("GSM", "MA-SM"):
            return cmb.index_bits(self.n_t, self.n_a)
        if k == "ESM":
            return self.esm.spatial_bits
        return 0

    @property
    def symbol_bits(self) -> int:
        q = self.constellation.bits_per_symbol
        if self.kind in ("MA-SM", "V-BLAST"):
            return self.n_a * q
        if self.kind == "ESM":
            return self.esm.symbol_bits
        return q

    @property
    def bits_per_use(self) -> int:
        return self.spatial_bits + self.symbol_bits


def bits_per_use(scheme: SpatialScheme) -> int:
    return scheme.bits_per_use


@dataclass(frozen=True, eq=False)
class SpatialCodeword:
    vector: np.ndarray
    bits: str
    active_set: ActivationPattern

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.vector) ** 2))


def _pattern(n_t: int, vec: np.ndarray) -> ActivationPattern:
    return ActivationPattern.from_positions(n_t, np.flatnonzero(np.abs(vec) > 0))


def encode(scheme: SpatialScheme, bits) -> SpatialCodeword:
    bits = parse_bits(bits)
    if bits.size != scheme.bits_per_use:
        raise UsageError(f"{scheme.kind} carries {scheme.bits_per_use} bits per use, got {bits.size}")
    ns = scheme.spatial_bits
    sb, db = bits[:ns], bits[ns:]
    x = np.zeros(scheme.n_t, dtype=complex)
    const = scheme.constellation
    kind = scheme.kind
    if kind in ("SM", "SIMO"):
        x[bits_to_int(sb)] = const.modulate(db)[0]
    elif kind == "GSM":
        pat = cmb.unrank(bits_to_int(sb), scheme.n_t, scheme.n_a)
        x[list(pat.active)] = const.modulate(db)[0] / np.sqrt(scheme.n_a)
    elif kind in ("MA-SM", "V-BLAST"):
        pat = cmb.unrank(bits_to_int(sb), scheme.n_t, scheme.n_a)
        x[list(pat.active)] = const.modulate(db) / np.sqrt(scheme.n_a)
    elif kind == "QSM":
        half = ns // 2
        s = const.modulate(db)[0]
        x[bits_to_int(sb[:half])] += s.real
        x[bits_to_int(sb[half:])] += 1j * s.imag
    elif kind == "ESM":
        combo = scheme.esm.combinations[bits_to_int(sb)]
        active = combo.active
        pos = 0
        for ant in active:
            c = scheme.esm.constellations[combo.constellations[ant]]
            q = c.bits_per_symbol
            x[ant] = c.modulate(db[pos:pos + q])[0]
            pos += q
        x *= np.exp(1j * combo.rotation) / np.sqrt(len(active))
    return SpatialCodeword(x, bits_str(bits), _pattern(scheme.n_t, x))


def enumerate_codebook(scheme: SpatialScheme) -> list[SpatialCodeword]:
    b = scheme.bits_per_use
    if b > ENUM_GUARD:
        raise CapacityError(f"{scheme.kind} codebook has 2**{b} entries; limit is 2**{ENUM_GUARD}")
    return [encode(scheme, int_to_bits(v, b)) for v in range(1 << b)]


def codebook_matrix(scheme: SpatialScheme) -> np.ndarray:
    """(2**bpcu, n_T) complex array, row v is the codeword for bit value v."""
    return _codebook_matrix(scheme)


@lru_cache(maxsize=64)
def _codebook_matrix(scheme: SpatialScheme) -> np.ndarray:
    m = np.array([cw.vector for cw in enumerate_codebook(scheme)])
    m.setflags(write=False)
    return m


def decode(scheme: SpatialScheme, vector, atol: float = 1e-9) -> str:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    if v.size != scheme.n_t:
        raise UsageError(f"vector has {v.size} entries, scheme has n_T={scheme.n_t}")
    cb = codebook_matrix(scheme)
    d = np.max(np.abs(cb - v[None, :]), axis=1)
    i = int(np.argmin(d))
    if d[i] > atol:
        raise NotACodewordError(f"vector is {d[i]:.3g} away from the nearest codeword")
    return bits_str(int_to_bits(i, scheme.bits_per_use))


# ---------------------------------------------------------------- ESM tables

def _esm_table_n2(primary: Constellation, secondary: Constellation, theta: float,
                  name: str, normative: bool) -> EsmTable:
    consts = {"P": primary, "S": secondary}
    combos = [
        EsmCombination("00", ("P", None)),
        EsmCombination("01", (None, "P")),
        EsmCombination("10", ("S", "S")),
        EsmCombination("11", ("S", "S"), theta),
    ]
    return EsmTable(2, consts, tuple(combos), name, normative)


def _esm_table_n4(primary: Constellation, secondary: Constellation, theta: float,
                  name: str) -> EsmTable:
    # 4 single-antenna entries, then the 6 antenna pairs unrotated, then rotated
    consts = {"P": primary, "S": secondary}
    combos = []
    for a in range(4):
        ids = [None] * 4
        ids[a] = "P"
        combos.append(tuple(ids))
    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    rows = [(c, 0.0) for c in combos]
    for rot in (0.0, theta):
        for a, b in pairs:
            ids = [None] * 4
            ids[a] = ids[b] = "S"
            rows.append((tuple(ids), rot))
    entries = tuple(EsmCombination(format(i, "04b"), ids, rot) for i, (ids, rot) in enumerate(rows))
    return EsmTable(4, consts, entries, name, False)


# shipped defaults for the four d_min comparison configurations; only (a) has a published table
ESM_PRESETS = {
    "a": lambda: _esm_table_n2(make_psk(4, np.pi / 4), make_psk(2), np.pi / 2,
                               "esm-a-qpsk/bpsk", True),
    "b": lambda: _esm_table_n4(make_psk(4, np.pi / 4), make_psk(2), np.pi / 2,
                               "esm-b-qpsk/bpsk"),
    "c": lambda: _esm_table_n4(make_qam(16), make_psk(4, np.pi / 4), np.pi / 4,
                               "esm-c-16qam/qpsk"),
    "d": lambda: _esm_table_n4(make_qam(64), make_star_qam8(), np.pi / 4,
                               "esm-d-64qam/8qam"),
}


@lru_cache(maxsize=None)
def esm_table_for(n_t: int, M: int) -> EsmTable:
    key = {(2, 4): "a", (4, 4): "b", (4, 16): "c", (4, 64): "d"}.get((n_t, M))
    if key is None:
        raise UsageError(f"no shipped ESM table for n_T={n_t}, M={M}; supply one with esm_table_from_dict")
    return ESM_PRESETS[key]()


def _const_to_dict(c: Constellation) -> dict:
    return {"kind": c.kind, "order": c.order, "phase_offset": c.phase_offset,
            "points": [[float(p.real), float(p.imag)] for p in c.points]}


def _const_from_dict(d: dict) -> Constellation:
    if "points" in d:
        pts = np.array([complex(re, im) for re, im in d["points"]])
        return Constellation(pts, d.get("kind", "QAM"), len(pts), float(d.get("phase_offset", 0.0)))
    kind = d["kind"].upper()
    order = int(d["order"])
    if kind == "PSK":
        return make_psk(order, float(d.get("phase_offset", 0.0)))
    if kind == "QAM":
        return default_constellation(order, "qam")
    raise UsageError(f"unsupported constellation kind {kind!r}")


def esm_table_to_dict(table: EsmTable) -> dict:
    return {
        "n_t": table.n_t,
        "name": table.name,
        "constellations": {k: _const_to_dict(c) for k, c in table.constellations.items()},
        "combinations": [
            {"spatial_bits": c.spatial_bits, "constellations": list(c.constellations),
             "rotation": c.rotation}
            for c in table.combinations
        ],
    }


def esm_table_from_dict(doc: dict) -> EsmTable:
    """Build and validate an ESM table; energy and injectivity are checked here."""
    try:
        consts = {k: _const_from_dict(v) for k, v in doc["constellations"].items()}
        combos = tuple(
            EsmCombination(str(c["spatial_bits"]), tuple(c["constellations"]),
                           float(c.get("rotation", 0.0)))
            for c in doc["combinations"]
        )
        table = EsmTable(int(doc["n_t"]), consts, combos, doc.get("name", "custom"))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed ESM table: {exc}") from None
    scheme = SpatialScheme("ESM", table.n_t, next(iter(consts.values())), esm=table)
    cb = codebook_matrix(scheme)
    energy = np.mean(np.sum(np.abs(cb) ** 2, axis=1))
    if abs(energy - 1) > 1e-9:
        raise UsageError(f"ESM table average codeword energy is {energy:.6g}, not 1")
    d = np.sum(np.abs(cb[:, None, :] - cb[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d, np.inf)
    if d.min() < 1e-12:
        raise UsageError("ESM table maps two bit strings to the same vector")
    return table


def load_esm_table(path) -> EsmTable:
    return esm_table_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- factories

def make_scheme(kind: str, n_t: int = 1, M: int = 2, n_a: int = 1,
                modulation: str | None = None, esm: EsmTable | None = None) -> SpatialScheme:
    kind = kind.upper().replace("_", "-")
    aliases = {"MASM": "MA-SM", "VBLAST": "V-BLAST", "V-BLAST-REF": "V-BLAST"}
    kind = aliases.get(kind, kind)
    if kind == "ESM":
        table = esm if esm is not None else esm_table_for(n_t, M)
        return SpatialScheme("ESM", n_t, table.constellations["P"] if "P" in table.constellations
                             else next(iter(table.constellations.values())), esm=table)
    const = default_constellation(M, modulation)
    if kind == "SIMO":
        n_t = 1
    return SpatialScheme(kind, n_t, const, n_a=n_a)

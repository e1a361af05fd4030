"""Binary containers for states and cMPS grids, with JSON metadata sidecars.

Layout of both formats: 8-byte magic, 4-byte little-endian header length,
UTF-8 JSON header, then raw complex128 blocks in the order the header
lists them.  A human-readable sidecar <path>.meta.json records the
construction recipe, field parameters, and seed when provided.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .cmps import CMPS
from .domain import Domain
from .errors import ConfigError
from .fock import FockSpace, StateVector

_STATE_MAGIC = b"SFSTATE1"
_CMPS_MAGIC = b"SFCMPS01"


def _write_container(path, magic: bytes, header: dict,
                     blocks: list[np.ndarray]) -> None:
    head = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype=np.complex128).tobytes())


def _read_container(path, magic: bytes):
    with open(path, "rb") as fh:
        if fh.read(8) != magic:
            raise ConfigError(f"{path}: wrong magic, not a {magic.decode()} file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    return header, payload


def _write_sidecar(path, metadata: dict | None) -> None:
    if metadata is None:
        metadata = {}
    Path(str(path) + ".meta.json").write_text(json.dumps(metadata, indent=2))


def save_state(state: StateVector, path, metadata: dict | None = None) -> None:
    dom = state.space.domain
    header = {
        "sites": list(dom.sites),
        "lengths": list(dom.lengths),
        "dim": dom.dim,
        "boundary": dom.boundary,
        "n_particles": state.space.n_particles,
        "fock_dim": len(state.amplitudes),
        "blocks": ["amplitudes"],
    }
    _write_container(path, _STATE_MAGIC, header, [state.amplitudes])
    _write_sidecar(path, metadata)


def load_state(path) -> StateVector:
    header, payload = _read_container(path, _STATE_MAGIC)
    dom = Domain(tuple(header["lengths"]), tuple(header["sites"]),
                 header["boundary"])
    space = FockSpace(dom, header["n_particles"])
    amps = np.frombuffer(payload, dtype=np.complex128).copy()
    if len(amps) != header["fock_dim"] or len(amps) != space.dim:
        raise ConfigError(f"{path}: amplitude block has wrong length")
    return StateVector(space, amps)


def save_cmps(s: CMPS, path, n_grid: int = 256,
              metadata: dict | None = None) -> None:
    """Sample Q, R on a uniform grid and store them with the boundary matrix."""
    xs = np.linspace(s.x_left, s.x_right, n_grid, endpoint=False)
    d = s.bond_dim
    q = np.stack([s.q(x) for x in xs])
    r = np.stack([s.r(x) for x in xs])
    header = {
        "L": s.length,
        "D": d,
        "gauge": s.gauge,
        "grid": n_grid,
        "origin": s.x_left,
        "blocks": ["Q", "R", "boundary"],
    }
    _write_container(path, _CMPS_MAGIC, header, [q, r, s.boundary])
    _write_sidecar(path, metadata)


def load_cmps(path) -> CMPS:
    """Rebuild a cMPS from stored grid samples with periodic linear interpolation."""
    header, payload = _read_container(path, _CMPS_MAGIC)
    d = header["D"]
    n = header["grid"]
    length = header["L"]
    origin = header["origin"]
    arr = np.frombuffer(payload, dtype=np.complex128)
    expect = 2 * n * d * d + d * d
    if arr.size != expect:
        raise ConfigError(f"{path}: matrix blocks have wrong total size")
    q = arr[: n * d * d].reshape(n, d, d)
    r = arr[n * d * d: 2 * n * d * d].reshape(n, d, d)
    boundary = arr[2 * n * d * d:].reshape(d, d)
    dx = length / n

    def interp(grid):
        def fn(x, grid=grid):
            u = (x - origin) / dx
            i0 = int(np.floor(u)) % n
            i1 = (i0 + 1) % n
            w = u - np.floor(u)
            return (1.0 - w) * grid[i0] + w * grid[i1]
        return fn

    return CMPS(length, d, interp(q), interp(r), boundary,
                header["gauge"], origin)

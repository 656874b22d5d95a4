"""Binary array checkpoint format.

Layout: magic ``b"MIPL"``, u32 version (1), u32 array count, then per array
u16 name length, UTF-8 name, u8 rank, ``rank`` x u32 dims and the payload as
little-endian float32.  All integers are little-endian.
"""
import struct

import numpy as np

MAGIC = b"MIPL"
VERSION = 1


class CheckpointError(ValueError):
    pass


def write_arrays(path, arrays):
    """Write an ordered mapping name -> array."""
    with open(path, "wb") as f:
        f.write(encode_arrays(arrays))


def encode_arrays(arrays):
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(chunks)


def read_arrays(path):
    with open(path, "rb") as f:
        return decode_arrays(f.read())


def decode_arrays(buf):
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise CheckpointError("bad magic: not a MIPL checkpoint")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    out = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + nlen].decode("utf-8")
            if len(name.encode("utf-8")) != nlen:
                raise CheckpointError("truncated checkpoint")
            pos += nlen
            (rank,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            if pos + 4 * n > len(buf):
                raise CheckpointError("truncated checkpoint")
            out[name] = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(dims).astype(np.float32)
            pos += 4 * n
    except struct.error:
        raise CheckpointError("truncated checkpoint") from None
    return out


def save_params(params, path):
    """Parameters plus Adam moments (``<name>.m`` / ``<name>.v``) and step."""
    arrays = {}
    for name in params.names():
        arrays[name] = params[name].data
    for name in params.names():
        arrays[name + ".m"] = params.m[name]
        arrays[name + ".v"] = params.v[name]
    arrays["adam.t"] = np.array(params.t, dtype=np.float32)
    write_arrays(path, arrays)


def load_params(path):
    from .params import ParamStore

    arrays = read_arrays(path)
    store = ParamStore()
    for name, arr in arrays.items():
        if name == "adam.t" or name.endswith(".m") or name.endswith(".v"):
            continue
        store.add(name, arr)
    for name in store.names():
        if name + ".m" in arrays:
            store.m[name] = arrays[name + ".m"]
            store.v[name] = arrays[name + ".v"]
    store.t = int(arrays.get("adam.t", 0))
    return store

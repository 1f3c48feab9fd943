"""Stream filter decoders for the subset of filters that carry structure.

Image-only filters (DCT, CCITT, JBIG2, JPX) are never decoded here; callers
that hit them receive the raw bytes back untouched.
"""

from __future__ import annotations

import zlib
from typing import Any

from .objects import Name, Stream


class FilterError(Exception):
    pass


_PASSTHROUGH = {"DCTDecode", "DCT", "CCITTFaxDecode", "CCF", "JBIG2Decode", "JPXDecode"}


def decode_stream(stream: Stream, resolve) -> bytes:
    """Decode a stream's data through its /Filter chain.

    `resolve` dereferences indirect objects (filter specs and parms may be
    indirect). Results are cached on the stream.
    """
    if stream._decoded is not None:
        return stream._decoded
    data = stream.raw
    filters = resolve(stream.dict.get("Filter"))
    if filters is None:
        stream._decoded = data
        return data
    if isinstance(filters, Name):
        filters = [filters]
    parms = resolve(stream.dict.get("DecodeParms", stream.dict.get("DP")))
    if not isinstance(parms, list):
        parms = [parms] * len(filters)
    for filt, parm in zip(filters, parms):
        filt = resolve(filt)
        parm = resolve(parm)
        name = str(filt) if filt is not None else ""
        if name in ("FlateDecode", "Fl"):
            try:
                data = zlib.decompress(data)
            except zlib.error:
                # Tolerate trailing garbage by decompressing what is there.
                try:
                    d = zlib.decompressobj()
                    data = d.decompress(data)
                except zlib.error as exc:
                    raise FilterError(f"bad flate stream: {exc}") from exc
            data = _apply_predictor(data, parm, resolve)
        elif name in ("LZWDecode", "LZW"):
            data = _lzw_decode(data)
            data = _apply_predictor(data, parm, resolve)
        elif name in ("ASCIIHexDecode", "AHx"):
            data = _ascii_hex_decode(data)
        elif name in ("ASCII85Decode", "A85"):
            data = _ascii85_decode(data)
        elif name in ("RunLengthDecode", "RL"):
            data = _run_length_decode(data)
        elif name in _PASSTHROUGH:
            break
        elif name == "Crypt":
            break
        else:
            raise FilterError(f"unsupported filter {name!r}")
    stream._decoded = data
    return data


def _apply_predictor(data: bytes, parm: Any, resolve) -> bytes:
    if not isinstance(parm, dict):
        return data
    predictor = resolve(parm.get("Predictor", 1)) or 1
    if predictor <= 1:
        return data
    colors = int(resolve(parm.get("Colors", 1)) or 1)
    bpc = int(resolve(parm.get("BitsPerComponent", 8)) or 8)
    columns = int(resolve(parm.get("Columns", 1)) or 1)
    sample_bytes = max(1, (colors * bpc + 7) // 8)
    row_len = (columns * colors * bpc + 7) // 8
    if predictor == 2:
        return _tiff_predictor(data, row_len, sample_bytes)
    return _png_predictor(data, row_len, sample_bytes)


def _png_predictor(data: bytes, row_len: int, sample_bytes: int) -> bytes:
    out = bytearray()
    prev = bytearray(row_len)
    pos = 0
    n = len(data)
    while pos < n:
        tag = data[pos]
        pos += 1
        row = bytearray(data[pos : pos + row_len])
        if len(row) < row_len:
            row.extend(b"\x00" * (row_len - len(row)))
        pos += row_len
        if tag == 1:  # Sub
            for i in range(sample_bytes, row_len):
                row[i] = (row[i] + row[i - sample_bytes]) & 0xFF
        elif tag == 2:  # Up
            for i in range(row_len):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif tag == 3:  # Average
            for i in range(row_len):
                left = row[i - sample_bytes] if i >= sample_bytes else 0
                row[i] = (row[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif tag == 4:  # Paeth
            for i in range(row_len):
                left = row[i - sample_bytes] if i >= sample_bytes else 0
                up = prev[i]
                ul = prev[i - sample_bytes] if i >= sample_bytes else 0
                p = left + up - ul
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                if pa <= pb and pa <= pc:
                    pred = left
                elif pb <= pc:
                    pred = up
                else:
                    pred = ul
                row[i] = (row[i] + pred) & 0xFF
        elif tag != 0:
            raise FilterError(f"bad PNG predictor tag {tag}")
        out.extend(row)
        prev = row
    return bytes(out)


def _tiff_predictor(data: bytes, row_len: int, sample_bytes: int) -> bytes:
    out = bytearray(data)
    for start in range(0, len(out), row_len):
        for i in range(start + sample_bytes, min(start + row_len, len(out))):
            out[i] = (out[i] + out[i - sample_bytes]) & 0xFF
    return bytes(out)


def _ascii_hex_decode(data: bytes) -> bytes:
    hexdigits = []
    for b in data:
        c = chr(b)
        if c == ">":
            break
        if c in "0123456789abcdefABCDEF":
            hexdigits.append(c)
    if len(hexdigits) % 2:
        hexdigits.append("0")
    return bytes.fromhex("".join(hexdigits))


def _ascii85_decode(data: bytes) -> bytes:
    body = data.split(b"~>")[0]
    body = bytes(b for b in body if b not in b" \t\r\n\x0c\x00")
    if body.startswith(b"<~"):
        body = body[2:]
    import base64

    return base64.a85decode(body)


def _run_length_decode(data: bytes) -> bytes:
    out = bytearray()
    pos = 0
    n = len(data)
    while pos < n:
        length = data[pos]
        pos += 1
        if length == 128:
            break
        if length < 128:
            out.extend(data[pos : pos + length + 1])
            pos += length + 1
        else:
            if pos < n:
                out.extend(bytes([data[pos]]) * (257 - length))
                pos += 1
    return bytes(out)


def _lzw_decode(data: bytes) -> bytes:
    # PDF LZW: 8-bit codes growing 9..12 bits, clear=256, eod=257.
    out = bytearray()
    table: list[bytes] = [bytes([i]) for i in range(256)] + [b"", b""]
    bits = 9
    buffer = 0
    nbits = 0
    prev: bytes | None = None
    for byte in data:
        buffer = (buffer << 8) | byte
        nbits += 8
        while nbits >= bits:
            code = (buffer >> (nbits - bits)) & ((1 << bits) - 1)
            nbits -= bits
            if code == 256:
                table = [bytes([i]) for i in range(256)] + [b"", b""]
                bits = 9
                prev = None
                continue
            if code == 257:
                return bytes(out)
            if prev is None:
                entry = table[code]
            elif code < len(table):
                entry = table[code]
                table.append(prev + entry[:1])
            else:
                entry = prev + prev[:1]
                table.append(entry)
            out.extend(entry)
            prev = entry
            if len(table) + 1 >= (1 << bits) and bits < 12:
                bits += 1
    return bytes(out)

"""Plain-text operator and symbol files, and fixed-precision CSV output.

Particle files start with ``rep: P|Q|W|op`` followed by ``m n re im`` lines, the
powers of a^dagger (zbar) and a (z) and a complex coefficient. Spin files start
with ``spin two_j: <int>`` followed by ``p q r re im`` lines for J+^p Jz^q J-^r.
Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import ConfigError
from .spin import SpinOperator, SpinQuantum, spin_operator_from_terms
from .symbols import NormalOrderedOperator, Rep, SymbolPolynomial


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (float, int)) and not isinstance(x, bool):
        return "%.17g" % x
    return str(x)


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _header(line: str, lineno: int) -> tuple[str, str]:
    key, sep, value = line.partition(":")
    if not sep:
        raise ConfigError(f"line {lineno}: expected a header 'key: value', got {line!r}")
    return key.strip().lower(), value.strip()


def _row(line, lineno, nint):
    parts = line.split()
    if len(parts) != nint + 2:
        raise ConfigError(f"line {lineno}: expected {nint} integers and two reals, got {line!r}")
    try:
        ints = tuple(int(p) for p in parts[:nint])
        c = complex(float(parts[nint]), float(parts[nint + 1]))
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}") from None
    if min(ints) < 0:
        raise ConfigError(f"line {lineno}: negative power")
    return ints, c


def _accumulate(terms: dict, key, c):
    terms[key] = terms.get(key, 0j) + c


def parse_particle(text: str) -> NormalOrderedOperator | SymbolPolynomial:
    it = _lines(text)
    try:
        lineno, first = next(it)
    except StopIteration:
        raise ConfigError("empty operator file") from None
    key, value = _header(first, lineno)
    if key != "rep":
        raise ConfigError(f"line {lineno}: missing 'rep:' header")
    terms: dict = {}
    for lineno, line in it:
        ints, c = _row(line, lineno, 2)
        _accumulate(terms, ints, c)
    if value == "op":
        return NormalOrderedOperator(terms)
    try:
        return SymbolPolynomial(terms, Rep(value))
    except ValueError:
        raise ConfigError(f"unknown representation {value!r}") from None


def parse_spin(text: str) -> SpinOperator:
    it = _lines(text)
    try:
        lineno, first = next(it)
    except StopIteration:
        raise ConfigError("empty operator file") from None
    key, value = _header(first, lineno)
    if key != "spin two_j":
        raise ConfigError(f"line {lineno}: missing 'spin two_j:' header")
    try:
        j = SpinQuantum(int(value))
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}") from None
    terms: dict = {}
    for lineno, line in it:
        ints, c = _row(line, lineno, 3)
        _accumulate(terms, ints, c)
    return spin_operator_from_terms(j, terms)


def read_operator(path) -> NormalOrderedOperator | SymbolPolynomial | SpinOperator:
    """Dispatch on the header line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    for _, line in _lines(text):
        return parse_spin(text) if line.lower().startswith("spin") else parse_particle(text)
    raise ConfigError(f"{path} is empty")


def format_particle(obj: NormalOrderedOperator | SymbolPolynomial) -> str:
    tag = obj.rep.value if isinstance(obj, SymbolPolynomial) else "op"
    out = [f"rep: {tag}"]
    for (m, n), c in sorted(obj.terms.items()):
        out.append(f"{m} {n} {fmt(c.real)} {fmt(c.imag)}")
    return "\n".join(out) + "\n"


def format_spin(terms: dict, two_j: int) -> str:
    out = [f"spin two_j: {two_j}"]
    for (p, q, r), c in sorted(terms.items()):
        c = complex(c)
        out.append(f"{p} {q} {r} {fmt(c.real)} {fmt(c.imag)}")
    return "\n".join(out) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def trajectory_csv(traj) -> str:
    return csv_text(("t", "re_z", "im_z", "re_zbar", "im_zbar", "re_v", "im_v"), traj.csv_rows())

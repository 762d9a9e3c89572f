"""Black-box operators and their textual specs.

An operator is anything callable image -> image that we are only allowed to
evaluate.  :class:`BlackBoxOperator` wraps such a callable with a label and a
thread-safe activation counter.  :class:`OperatorSpec` describes one of the
shipped filter families and has a canonical one-line string form::

    gauss:size=5,sigma=1
    bilat:ss=2,sr=1.5
    unsharp:base=[bilat:ss=2,sr=1.5],alpha=1
    compose:[unsharp:base=[bilat:ss=10,sr=3],alpha=1;gamma:g=0.65]
    repeat:n=4,op=[bilat:ss=8,sr=4]

Nested specs are written in brackets; ``compose`` children are separated by
``;``.  The parser also accepts an unbracketed nested spec, which extends up
to the first key its own family does not know.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import filters


class BlackBoxOperator:
    """Evaluation-only image operator with an activation counter."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], label: str = "", spec: "OperatorSpec | None" = None):
        self._fn = fn
        self.label = label or getattr(fn, "__name__", "operator")
        self.spec = spec
        self._count = 0
        self._lock = threading.Lock()

    def __call__(self, img) -> np.ndarray:
        x = np.asarray(img, dtype=np.float64)
        out = np.asarray(self._fn(x), dtype=np.float64)
        if out.shape != x.shape:
            raise ValueError(f"{self.label}: output shape {out.shape} != input shape {x.shape}")
        with self._lock:
            self._count += 1
        return out

    evaluate = __call__

    @property
    def activations(self) -> int:
        return self._count

    def reset_activations(self) -> None:
        with self._lock:
            self._count = 0

    def __repr__(self):
        return f"BlackBoxOperator({self.label!r})"


class CompositeOperator(BlackBoxOperator):
    """Applies its children left to right.

    ``activations`` reports the sum of the children's counters.
    """

    def __init__(self, children: Sequence[BlackBoxOperator], label: str = "", spec=None):
        if not children:
            raise ValueError("compose needs at least one operator")
        self.children = tuple(children)

        def run(x):
            for child in self.children:
                x = child(x)
            return x

        super().__init__(run, label or " . ".join(c.label for c in self.children), spec)

    @property
    def activations(self) -> int:
        return sum(c.activations for c in self.children)

    def reset_activations(self) -> None:
        super().reset_activations()
        for c in self.children:
            c.reset_activations()


def as_operator(f) -> BlackBoxOperator:
    if isinstance(f, BlackBoxOperator):
        return f
    if isinstance(f, (OperatorSpec, str)):
        return build_operator(f)
    if callable(f):
        return BlackBoxOperator(f)
    raise TypeError(f"cannot use {f!r} as an operator")


def identity() -> BlackBoxOperator:
    return build_operator(OperatorSpec("identity"))


# --------------------------------------------------------------------------
# specs

SPEC = "spec"  # parameter type marker for nested operator specs


@dataclass(frozen=True)
class _Family:
    params: dict  # name -> (type, default or None)
    check: Callable[[dict], str | None]
    build: Callable[[dict], Callable]


def _positive(*names):
    def check(p):
        for n in names:
            if not p[n] > 0:
                return f"{n} must be > 0"
        return None

    return check


def _at_least(name, lo):
    def check(p):
        if p[name] < lo:
            return f"{name} must be >= {lo}"
        return None

    return check


def _both(*checks):
    def check(p):
        for c in checks:
            msg = c(p)
            if msg:
                return msg
        return None

    return check


def _resample_check(p):
    if p["q"] < 2:
        return "q must be >= 2"
    if p["method"] not in ("bilinear", "bicubic"):
        return "method must be bilinear or bicubic"
    return None


def _build_unsharp(p):
    base = build_operator(p["base"])
    return lambda x: filters.unsharp(x, base, p["alpha"])


def _build_repeat(p):
    inner = build_operator(p["op"])

    def run(x):
        for _ in range(p["n"]):
            x = inner(x)
        return x

    return run


FAMILIES: dict[str, _Family] = {
    "identity": _Family({}, lambda p: None, lambda p: (lambda x: x.copy())),
    "scale": _Family({"c": (float, None)}, lambda p: None, lambda p: (lambda x: p["c"] * x)),
    "gauss": _Family(
        {"size": (int, None), "sigma": (float, None)},
        _both(_at_least("size", 1), _positive("sigma")),
        lambda p: (lambda x: filters.gaussian_blur(x, p["size"], p["sigma"])),
    ),
    "disk": _Family({"d": (int, None)}, _at_least("d", 1), lambda p: (lambda x: filters.disk_blur(x, p["d"]))),
    "bilat": _Family(
        {"ss": (float, None), "sr": (float, None)},
        _positive("ss", "sr"),
        lambda p: (lambda x: filters.bilateral(x, p["ss"], p["sr"])),
    ),
    "median": _Family(
        {"h": (int, None), "w": (int, None)},
        _both(_at_least("h", 1), _at_least("w", 1)),
        lambda p: (lambda x: filters.median_filter(x, p["h"], p["w"])),
    ),
    "unsharp": _Family({"base": (SPEC, None), "alpha": (float, 1.0)}, lambda p: None, _build_unsharp),
    "gamma": _Family({"g": (float, None)}, _positive("g"), lambda p: (lambda x: filters.gamma_map(x, p["g"]))),
    "sigmoid": _Family({"a": (float, None)}, _positive("a"), lambda p: (lambda x: filters.sigmoid_tone(x, p["a"]))),
    "poster": _Family(
        {"levels": (int, None)}, _at_least("levels", 1), lambda p: (lambda x: filters.posterize(x, p["levels"]))
    ),
    "resample": _Family(
        {"q": (int, None), "method": (str, "bicubic")},
        _resample_check,
        lambda p: (lambda x: filters.resample_cycle(x, p["q"], p["method"])),
    ),
    "dct": _Family({"q": (float, None)}, _positive("q"), lambda p: (lambda x: filters.dct_quantize(x, p["q"]))),
    "repeat": _Family({"n": (int, None), "op": (SPEC, None)}, _at_least("n", 1), _build_repeat),
    "compose": _Family({}, lambda p: None, None),
}


class SpecParseError(ValueError):
    """Malformed operator spec; ``column`` is 1-based within ``text``."""

    def __init__(self, message, text, pos):
        self.text = text
        self.pos = pos
        self.column = pos + 1
        super().__init__(f"column {self.column}: {message}\n  {text}\n  {' ' * pos}^")


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    children: tuple = ()

    def __post_init__(self):
        fam = FAMILIES.get(self.kind)
        if fam is None:
            raise ValueError(f"unknown operator family {self.kind!r}")
        if self.kind == "compose":
            if not self.children:
                raise ValueError("compose needs a nonempty list of operators")
            if self.params:
                raise ValueError("compose takes no parameters")
            object.__setattr__(self, "children", tuple(self.children))
            return
        if self.children:
            raise ValueError(f"{self.kind} takes no child list")
        params = {}
        for name, (typ, default) in fam.params.items():
            if name in self.params:
                value = self.params[name]
            elif default is not None:
                value = default
            else:
                raise ValueError(f"{self.kind}: missing parameter {name!r}")
            params[name] = _coerce(self.kind, name, typ, value)
        extra = set(self.params) - set(fam.params)
        if extra:
            raise ValueError(f"{self.kind}: unknown parameter(s) {sorted(extra)}")
        msg = fam.check(params)
        if msg:
            raise ValueError(f"{self.kind}: {msg}")
        object.__setattr__(self, "params", params)

    def __str__(self):
        return self.canonical()

    def canonical(self) -> str:
        if self.kind == "compose":
            return "compose:[" + ";".join(c.canonical() for c in self.children) + "]"
        if not self.params:
            return self.kind
        parts = []
        for name, (typ, _) in FAMILIES[self.kind].params.items():
            v = self.params[name]
            parts.append(f"{name}=[{v.canonical()}]" if typ is SPEC else f"{name}={_fmt(v)}")
        return f"{self.kind}:" + ",".join(parts)

    @classmethod
    def parse(cls, text: str) -> "OperatorSpec":
        return parse_spec(text)

    def build(self) -> BlackBoxOperator:
        return build_operator(self)


def _coerce(kind, name, typ, value):
    if typ is SPEC:
        return value if isinstance(value, OperatorSpec) else parse_spec(str(value))
    if typ is int:
        if isinstance(value, str):
            value = float(value)
        if float(value) != int(value):
            raise ValueError(f"{kind}: {name} must be an integer, got {value}")
        return int(value)
    if typ is float:
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"{kind}: {name} must be finite")
        return value
    return str(value)


def _fmt(v):
    if isinstance(v, float):
        s = repr(v)
        return s[:-2] if s.endswith(".0") else s
    return str(v)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.bare = 0  # depth of unbracketed nested specs

    def error(self, msg, pos=None):
        raise SpecParseError(msg, self.text, self.pos if pos is None else pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def word(self, what):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            self.error(f"expected {what}")
        return self.text[start:self.pos], start

    def scalar(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in ",;[]" and not self.text[self.pos].isspace():
            self.pos += 1
        if start == self.pos:
            self.error("expected a value")
        return self.text[start:self.pos], start

    def spec(self) -> OperatorSpec:
        self.skip_ws()
        kind, kind_pos = self.word("operator family")
        fam = FAMILIES.get(kind)
        if fam is None:
            self.error(f"unknown operator family {kind!r}", kind_pos)
        if kind == "compose":
            self.expect(":")
            self.expect("[")
            children = [self.spec()]
            while self.peek() == ";":
                self.pos += 1
                children.append(self.spec())
            self.expect("]")
            return self._make(kind, {}, children, kind_pos)
        params: dict = {}
        if self.peek() != ":":
            return self._make(kind, params, (), kind_pos)
        self.pos += 1
        while True:
            key, key_pos = self.word("parameter name")
            if key not in fam.params:
                self.error(f"{kind} has no parameter {key!r}", key_pos)
            if key in params:
                self.error(f"duplicate parameter {key!r}", key_pos)
            self.expect("=")
            typ = fam.params[key][0]
            if typ is SPEC:
                if self.peek() == "[":
                    self.pos += 1
                    params[key] = self.spec()
                    self.expect("]")
                else:
                    self.bare += 1
                    params[key] = self.spec()
                    self.bare -= 1
            else:
                params[key], _ = self.scalar()
            if self.peek() != ",":
                break
            # a nested unbracketed spec stops at a key it does not own
            save = self.pos
            self.pos += 1
            try:
                nxt, nxt_pos = self.word("parameter name")
            except SpecParseError:
                self.pos = save + 1
                self.error("expected parameter name")
            self.pos = save
            if nxt not in fam.params or nxt in params:
                if self.bare:
                    break
                problem = "duplicate parameter" if nxt in params else f"{kind} has no parameter"
                self.error(f"{problem} {nxt!r}", nxt_pos)
            self.pos += 1
        return self._make(kind, params, (), kind_pos)

    def _make(self, kind, params, children, pos):
        try:
            return OperatorSpec(kind, params, tuple(children))
        except ValueError as exc:
            self.error(str(exc), pos)


def parse_spec(text: str) -> OperatorSpec:
    """Parse an operator spec string, raising :class:`SpecParseError` on bad input."""
    parser = _Parser(text)
    spec = parser.spec()
    parser.skip_ws()
    if parser.pos != len(text):
        parser.error(f"unexpected {text[parser.pos]!r}")
    return spec


def build_operator(spec) -> BlackBoxOperator:
    """Turn an :class:`OperatorSpec` (or its string form) into an operator."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    if spec.kind == "compose":
        return CompositeOperator([build_operator(c) for c in spec.children], spec.canonical(), spec)
    fn = FAMILIES[spec.kind].build(spec.params)
    return BlackBoxOperator(fn, spec.canonical(), spec)


def compose(specs) -> BlackBoxOperator:
    """Chain specs or operators, applied left to right."""
    specs = list(specs)
    if not specs:
        raise ValueError("compose needs at least one operator")
    if all(isinstance(s, (OperatorSpec, str)) for s in specs):
        parsed = [parse_spec(s) if isinstance(s, str) else s for s in specs]
        return build_operator(OperatorSpec("compose", children=tuple(parsed)))
    return CompositeOperator([as_operator(s) for s in specs])

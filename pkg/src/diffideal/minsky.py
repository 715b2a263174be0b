"""Two-counter Minsky machines: commands, configurations, interpreter, machine files.

A command ``q_i eps sigma -> q_j T_alpha T_beta`` fires when the machine is in
state ``i`` and observes ``eps`` on the first tape and ``sigma`` on the second.
The observed symbol is 1 exactly on cell 0, so ``eps = 1`` iff the first
counter is 0.  Firing moves the counters by ``alpha`` and ``beta``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

from .errors import ValidationError

CommandKey = Tuple[int, int, int]


@dataclass(frozen=True, order=True)
class Command:
    i: int
    eps: int
    sigma: int
    j: int
    alpha: int = 0
    beta: int = 0

    def __post_init__(self):
        for name in ("eps", "sigma"):
            if getattr(self, name) not in (0, 1):
                raise ValidationError(f"{name} must be 0 or 1 in {self}")
        for name in ("alpha", "beta"):
            if getattr(self, name) not in (-1, 0, 1):
                raise ValidationError(f"{name} must be -1, 0 or 1 in {self}")
        if self.i < 1:
            raise ValidationError(f"source state must be >= 1 (q0 is terminal) in {self}")
        if self.j < 0:
            raise ValidationError(f"target state must be >= 0 in {self}")
        if self.eps == 1 and self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0 when eps = 1 in {self}")
        if self.sigma == 1 and self.beta < 0:
            raise ValidationError(f"beta must be >= 0 when sigma = 1 in {self}")

    @property
    def key(self) -> CommandKey:
        return (self.i, self.eps, self.sigma)

    def to_dict(self) -> dict:
        return {"i": self.i, "eps": self.eps, "sigma": self.sigma,
                "j": self.j, "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "Command":
        missing = {"i", "eps", "sigma", "j", "alpha", "beta"} - set(d)
        if missing:
            raise ValidationError(f"command is missing fields {sorted(missing)}")
        return cls(*(int(d[k]) for k in ("i", "eps", "sigma", "j", "alpha", "beta")))

    def __str__(self):
        return f"q{self.i} {self.eps} {self.sigma} -> q{self.j} T{self.alpha} T{self.beta}"


class Config(NamedTuple):
    state: int
    c1: int
    c2: int

    @property
    def observed(self) -> Tuple[int, int]:
        return (1 if self.c1 == 0 else 0, 1 if self.c2 == 0 else 0)

    def __str__(self):
        return f"[{self.state},{self.c1},{self.c2}]"


def parse_config(text: str) -> Config:
    """Parse ``"1,3,0"`` or ``"[1,3,0]"``."""
    parts = text.strip().strip("[]").split(",")
    try:
        state, c1, c2 = (int(p) for p in parts)
    except ValueError:
        raise ValidationError(f"malformed configuration {text!r}; expected i,c1,c2") from None
    if min(state, c1, c2) < 0:
        raise ValidationError(f"configuration {text!r} has a negative entry")
    return Config(state, c1, c2)


@dataclass(frozen=True)
class Machine:
    n: int
    commands: Tuple[Command, ...] = ()
    table: Dict[CommandKey, Command] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "commands", tuple(sorted(self.commands)))
        table = {}
        for c in self.commands:
            if c.i > self.n or c.j > self.n:
                raise ValidationError(f"command {c} mentions a state beyond q{self.n}")
            if c.key in table:
                raise ValidationError(f"two commands for (q{c.i}, {c.eps}, {c.sigma}); machine must be deterministic")
            table[c.key] = c
        object.__setattr__(self, "table", table)

    def command_for(self, config: Config) -> Optional[Command]:
        return self.table.get((config.state,) + config.observed)

    def to_dict(self) -> dict:
        return {"n": self.n, "commands": [c.to_dict() for c in self.commands]}


class Outcome(enum.Enum):
    HALTED = "halted"
    STUCK = "stuck"
    BUDGET = "budget"
    CYCLE = "cycle"


def step(m: Machine, c: Config) -> Union[Config, Outcome]:
    """One step: a new configuration, or ``HALTED`` / ``STUCK``."""
    if c.state == 0:
        return Outcome.HALTED
    cmd = m.command_for(c)
    if cmd is None:
        return Outcome.STUCK
    nxt = Config(cmd.j, c.c1 + cmd.alpha, c.c2 + cmd.beta)
    assert nxt.c1 >= 0 and nxt.c2 >= 0, f"{cmd} drove a counter negative from {c}"
    return nxt


@dataclass
class Trace:
    status: Outcome
    configs: List[Config]
    commands: List[Command]
    cycle_start: Optional[int] = None

    @property
    def steps(self) -> int:
        return len(self.configs) - 1

    @property
    def final(self) -> Config:
        return self.configs[-1]

    @property
    def halted(self) -> bool:
        return self.status is Outcome.HALTED

    def max_counters(self) -> Tuple[int, int]:
        return max(c.c1 for c in self.configs), max(c.c2 for c in self.configs)

    def to_dict(self) -> dict:
        d = {
            "status": self.status.value,
            "steps": self.steps,
            "trace": [list(c) for c in self.configs],
        }
        if self.cycle_start is not None:
            d["cycle_start"] = self.cycle_start
        return d


def run(m: Machine, c0: Config, max_steps: int) -> Trace:
    """Run from ``c0`` for at most ``max_steps`` steps, watching for repeated configurations."""
    if max_steps < 0:
        raise ValidationError("max_steps must be non-negative")
    configs = [c0]
    commands: List[Command] = []
    seen = {c0: 0}
    cur = c0
    while True:
        if cur.state == 0:
            return Trace(Outcome.HALTED, configs, commands)
        if len(commands) >= max_steps:
            return Trace(Outcome.BUDGET, configs, commands)
        cmd = m.command_for(cur)
        nxt = step(m, cur)
        if nxt is Outcome.STUCK:
            return Trace(Outcome.STUCK, configs, commands)
        commands.append(cmd)
        configs.append(nxt)
        if nxt in seen:
            return Trace(Outcome.CYCLE, configs, commands, cycle_start=seen[nxt])
        seen[nxt] = len(configs) - 1
        cur = nxt


@dataclass
class AcyclicityReport:
    start: Config
    cycle_found: bool
    status: Outcome
    steps: int


def check_acyclic_bounded(m: Machine, starts: Iterable[Config], max_steps: int) -> List[AcyclicityReport]:
    """Look for a repeated configuration along each run.  Finding none proves nothing globally."""
    reports = []
    for s in starts:
        tr = run(m, s, max_steps)
        reports.append(AcyclicityReport(s, tr.status is Outcome.CYCLE, tr.status, tr.steps))
    return reports


# --- machine files ------------------------------------------------------------

def _command_lines(text: str) -> List[int]:
    """Best-effort 1-based line number of each entry of the ``commands`` array."""
    dec = json.JSONDecoder()
    at = text.find('"commands"')
    if at < 0:
        return []
    idx = text.find("[", at)
    lines = []
    while idx >= 0:
        idx += 1
        while idx < len(text) and text[idx] in " \t\r\n,":
            idx += 1
        if idx >= len(text) or text[idx] == "]":
            break
        lines.append(text.count("\n", 0, idx) + 1)
        try:
            _, idx = dec.raw_decode(text, idx)
        except json.JSONDecodeError:
            break
        idx -= 1
    return lines


def machine_from_json(text: str, source: str = "<machine>") -> Machine:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{source}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(data, dict) or "n" not in data or "commands" not in data:
        raise ValidationError(f"{source}:1: expected an object with keys 'n' and 'commands'")
    lines = _command_lines(text)
    n = data["n"]
    if not isinstance(n, int) or n < 0:
        raise ValidationError(f"{source}:1: 'n' must be a non-negative integer")
    commands = []
    seen: Dict[CommandKey, int] = {}
    for k, entry in enumerate(data["commands"]):
        line = lines[k] if k < len(lines) else 1
        where = f"{source}:{line}: command {k}"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: expected an object")
        try:
            cmd = Command.from_dict(entry)
        except (ValidationError, ValueError, TypeError) as e:
            raise ValidationError(f"{where}: {e}") from None
        if cmd.i > n or cmd.j > n:
            raise ValidationError(f"{where}: state out of range 0..{n}")
        if cmd.key in seen:
            raise ValidationError(f"{where}: duplicate key (q{cmd.i}, {cmd.eps}, {cmd.sigma}), "
                                  f"first defined by command {seen[cmd.key]}")
        seen[cmd.key] = k
        commands.append(cmd)
    return Machine(n, tuple(commands))


def machine_to_json(m: Machine) -> str:
    lines = ["{", f'  "n": {m.n},', '  "commands": [']
    for k, c in enumerate(m.commands):
        sep = "," if k < len(m.commands) - 1 else ""
        lines.append("    " + json.dumps(c.to_dict()) + sep)
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def load_machine(path: Union[str, Path]) -> Machine:
    """Load a machine file, or a bundled machine given as ``bundled:<name>``."""
    ref = str(path)
    if ref.startswith("bundled:"):
        name = ref.split(":", 1)[1]
        if name not in BUNDLED:
            raise ValidationError(f"no bundled machine {name!r}; have {sorted(BUNDLED)}")
        return BUNDLED[name]
    p = Path(ref)
    try:
        text = p.read_text()
    except OSError as e:
        raise ValidationError(f"{ref}: cannot read machine file: {e.strerror}") from None
    return machine_from_json(text, ref)


# --- bundled machines ---------------------------------------------------------

def _m(n: int, *cmds: Tuple[int, int, int, int, int, int]) -> Machine:
    return Machine(n, tuple(Command(*c) for c in cmds))


# counts the first counter down to 0, then halts at [0,0,0]
DEC1 = _m(1, (1, 0, 1, 1, -1, 0), (1, 1, 1, 0, 0, 0))

# from [1,k,0]: reaches [0,1,0] iff k is even; odd k runs forever in q3
EVEN = _m(
    3,
    (1, 0, 1, 2, -1, 0),
    (2, 0, 1, 1, -1, 0),
    (1, 1, 1, 0, 1, 0),
    (2, 1, 1, 3, 1, 0),
    (3, 0, 1, 3, 1, 0),
)

# moves the first counter onto the second, then empties the second; halts at [0,1,0]
TRANSFER = _m(
    2,
    (1, 0, 1, 1, -1, 1),
    (1, 0, 0, 1, -1, 1),
    (1, 1, 0, 2, 0, 0),
    (1, 1, 1, 0, 1, 0),
    (2, 1, 0, 2, 0, -1),
    (2, 1, 1, 0, 1, 0),
)

# never halts; the counter sum grows by at least one each step
INC_FOREVER = _m(
    1,
    (1, 1, 1, 1, 1, 1),
    (1, 0, 0, 1, 1, 1),
    (1, 0, 1, 1, 1, 0),
    (1, 1, 0, 1, 0, 1),
)

SELF_LOOP = _m(1, (1, 1, 1, 1, 0, 0))

# [1,0,0] -> [2,1,0] -> [1,0,0]
LOOP2 = _m(2, (1, 1, 1, 2, 1, 0), (2, 0, 1, 1, -1, 0))

BUNDLED: Dict[str, Machine] = {
    "dec1": DEC1,
    "even": EVEN,
    "transfer": TRANSFER,
    "inc_forever": INC_FOREVER,
    "self_loop": SELF_LOOP,
    "loop2": LOOP2,
}

ACYCLIC = ("dec1", "even", "transfer", "inc_forever")
CYCLIC = ("self_loop", "loop2")

"""Batch front-end: one JSON job in, a run report and optional DOT/CSV artifact out.

    finapprox approx-tournament job.json --format dot --out t.dot
    finapprox run job.json            # command taken from the job's "command" field
    finapprox run jobs/               # batch: every *.json in the directory, sorted by name

Exit codes: 0 ok, 2 not found within the bound, 3 precondition, 4 usage.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .actions import GRAPH, SET, TOURNAMENT, CosetActionSpec, FiniteActionWindow, validate_clique_free, validate_tournament
from .approx import (
    Z2_MARKED,
    FoundApproximation,
    InternalInvariantError,
    approximate_tournament,
    approximate_triangle_free,
    refute_approximation,
    z2_counterexample,
)
from .fraisse import audit_requests, build_generic, build_generic_permutation, cycle_text, extension_property_check, validate_action
from .groups import (
    FREE,
    FREE_ABELIAN,
    Group,
    NotFound,
    PreconditionError,
    Subgroup,
    UnsupportedError,
    UsageError,
)
from .profinite import is_good, rz_witness, tournament_2rz_witness
from .pseudonorm import (
    AboveCap,
    MetricWindow,
    PartialGPN,
    Tail,
    avoid_pseudonorm,
    check_chain,
    extend_max,
    fmt_q,
    q,
    realize_metric,
    turbulence_path,
    validate_partial_gpn,
)

EXIT = {"ok": 0, "not-found": 2, "precondition": 3, "usage": 4}
FORMATS = ("dot", "csv", "report")


class JobError(UsageError):
    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


# ---------------------------------------------------------------------------
# Literals
# ---------------------------------------------------------------------------


def _need(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise JobError(where, "expected an object")
    if key not in obj:
        raise JobError(f"{where}.{key}" if where else key, "missing field")
    return obj[key]


def parse_group(lit: Any, where: str = "group") -> Group:
    if not isinstance(lit, dict) or len(lit) != 1 and "labels" not in lit:
        raise JobError(where, "expected one of {free_abelian: d}, {free: k}, {trivial: true}, {permutations: [...]}")
    try:
        if "free_abelian" in lit:
            return Group.free_abelian(int(lit["free_abelian"]))
        if "free" in lit:
            g = Group.free(int(lit["free"]))
            if "labels" in lit:
                g = Group(FREE, int(lit["free"]), lit["labels"])
            return g
        if "trivial" in lit:
            return Group.free_abelian(0)
        if "permutations" in lit:
            return Group.from_permutations(lit["permutations"])
    except (TypeError, ValueError) as exc:
        raise JobError(where, str(exc)) from None
    raise JobError(where, f"unknown group literal {sorted(lit)}")


def dump_group(grp: Group) -> dict:
    if grp.backend == FREE_ABELIAN:
        return {"trivial": True} if grp.rank == 0 else {"free_abelian": grp.rank}
    if grp.backend == FREE:
        return {"free": grp.rank}
    try:
        return {"permutations": [list(grp.perm(g)) for g in grp.generators()]}
    except UnsupportedError:
        raise UsageError("only permutation groups serialize") from None


def parse_element(grp: Group, lit: Any, where: str) -> Any:
    try:
        if grp.backend == FREE_ABELIAN:
            if isinstance(lit, int) and not isinstance(lit, bool):
                lit = [lit]
            if not isinstance(lit, list):
                raise UsageError(f"expected an integer vector of length {grp.rank}")
            return grp.check(tuple(lit))
        if grp.backend == FREE:
            if not isinstance(lit, str):
                raise UsageError("expected a word string such as 'aB'")
            return grp.parse(lit)
        return grp.check(lit)
    except (UsageError, TypeError, ValueError) as exc:
        raise JobError(where, str(exc)) from None


def dump_element(grp: Group, g: Any) -> Any:
    if grp.backend == FREE_ABELIAN:
        return g[0] if grp.rank == 1 else list(g)
    if grp.backend == FREE:
        return grp.fmt(g)
    return g


def parse_subgroup(grp: Group, lit: Any, where: str) -> Subgroup:
    if not isinstance(lit, dict):
        raise JobError(where, "expected {lattice: rows}, {words: [...]}, {generators: [...]}, {whole: true} or {trivial: true}")
    if lit.get("whole"):
        return Subgroup.whole(grp)
    if lit.get("trivial"):
        return Subgroup.trivial(grp)
    for key in ("lattice", "words", "generators"):
        if key in lit:
            items = lit[key]
            if not isinstance(items, list):
                raise JobError(f"{where}.{key}", "expected a list")
            if key == "lattice" and grp.backend != FREE_ABELIAN:
                raise JobError(where, "lattice literal needs a free abelian group")
            if key == "words" and grp.backend != FREE:
                raise JobError(where, "word literal needs a free group")
            return Subgroup.generated(grp, [parse_element(grp, x, f"{where}.{key}[{n}]") for n, x in enumerate(items)])
    raise JobError(where, f"unknown subgroup literal {sorted(lit)}")


def dump_subgroup(h: Subgroup) -> dict:
    grp = h.group
    if grp.backend == FREE_ABELIAN:
        return {"lattice": [list(r) for r in h.basis]}
    if grp.backend == FREE:
        return {"words": [grp.fmt(g) for g in h.gens()]}
    return {"generators": [dump_element(grp, g) for g in h.gens()]}


def parse_spec(job: dict, kind: str) -> CosetActionSpec:
    grp = parse_group(_need(job, "group", ""))
    orbits_lit = _need(job, "orbits", "")
    if not isinstance(orbits_lit, list):
        raise JobError("orbits", "expected a list of subgroup literals")
    orbits = [parse_subgroup(grp, o, f"orbits[{n}]") for n, o in enumerate(orbits_lit)]
    arrows_lit = job.get("in_arrows", [[] for _ in orbits])
    if not isinstance(arrows_lit, list) or len(arrows_lit) != len(orbits):
        raise JobError("in_arrows", "expected one list per orbit")
    in_arrows = [[parse_element(grp, x, f"in_arrows[{j}][{n}]") for n, x in enumerate(fs)]
                 for j, fs in enumerate(arrows_lit)]
    cross = {}
    for key, fs in job.get("cross", {}).items():
        try:
            i, j = (int(t) for t in key.split(","))
        except ValueError:
            raise JobError(f"cross.{key}", "keys look like \"0,1\"") from None
        cross[(i, j)] = [parse_element(grp, x, f"cross.{key}[{n}]") for n, x in enumerate(fs)]
    window = [parse_element(grp, x, f"window[{n}]") for n, x in enumerate(job.get("window", []))]
    return CosetActionSpec(grp, orbits, in_arrows, cross, kind=kind, clique=int(job.get("clique", 3)),
                           complete=bool(job.get("complete", False)), window=window)


def dump_spec(spec: CosetActionSpec) -> dict:
    if spec.rule is not None:
        raise UsageError("specs given by a rule do not serialize")
    grp = spec.group
    out = {
        "group": dump_group(grp),
        "orbits": [dump_subgroup(m) for m in spec.orbits],
        "in_arrows": [[dump_element(grp, f) for f in fs] for fs in spec.in_arrows],
    }
    if spec.cross:
        out["cross"] = {f"{i},{j}": [dump_element(grp, f) for f in fs] for (i, j), fs in sorted(spec.cross.items())}
    if spec.window:
        out["window"] = [dump_element(grp, f) for f in spec.window]
    if spec.kind == GRAPH:
        out["clique"] = spec.clique
    if spec.complete:
        out["complete"] = True
    return out


def parse_table(grp: Group, job: dict, where: str = "") -> PartialGPN:
    labels = job.get("labels", [1])
    if not isinstance(labels, list):
        raise JobError(f"{where}labels", "expected a list")
    entries = _need(job, "table", where.rstrip("."))
    if not isinstance(entries, list):
        raise JobError(f"{where}table", "expected a list of [g, i, j, value]")
    parsed = {}
    for n, ent in enumerate(entries):
        if not isinstance(ent, list) or len(ent) != 4:
            raise JobError(f"{where}table[{n}]", "expected [g, i, j, value]")
        g = parse_element(grp, ent[0], f"{where}table[{n}][0]")
        try:
            parsed[(g, ent[1], ent[2])] = q(ent[3])
        except UsageError as exc:
            raise JobError(f"{where}table[{n}][3]", str(exc)) from None
    cap = job.get("cap")
    if job.get("symmetric", True):
        return PartialGPN.symmetric(grp, labels, parsed, cap)
    return PartialGPN(grp, labels, parsed, cap)


def _label(x: Any) -> Any:
    if isinstance(x, tuple):
        return "@".join(str(t) for t in x)
    return x


def dump_table(p: PartialGPN) -> dict:
    grp = p.group
    out = {"labels": [_label(x) for x in p.labels],
           "table": [[dump_element(grp, g), _label(i), _label(j), fmt_q(p.table[(g, i, j)])] for g, i, j in p.domain()],
           "symmetric": False}
    if p.cap is not None:
        out["cap"] = fmt_q(p.cap)
    return out


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(w: FiniteActionWindow, path: str | None = None) -> str:
    directed = w.kind == TOURNAMENT
    lines = ["digraph window {" if directed else "graph window {"]
    for v in range(w.size):
        lines.append(f"  {_quote(w.label(v))} [orbit={w.vertices[v][0]}];")
    op = "->" if directed else "--"
    for a, b in sorted(w.arrows()):
        lines.append(f"  {_quote(w.label(a))} {op} {_quote(w.label(b))};")
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _csv(rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def export_csv(obj: FiniteActionWindow | MetricWindow | PartialGPN | list, path: str | None = None) -> str:
    """Adjacency matrix, distance matrix, pseudonorm table, or embedding pairs."""
    if isinstance(obj, FiniteActionWindow):
        labels = [obj.label(v) for v in range(obj.size)]
        rows = [[""] + labels]
        rows += [[labels[a]] + [int(x) for x in obj.adj[a]] for a in range(obj.size)]
    elif isinstance(obj, MetricWindow):
        labels = obj.labels()
        rows = [[""] + labels]
        rows += [[labels[a]] + [fmt_q(x) for x in obj.dist[a]] for a in range(len(labels))]
    elif isinstance(obj, PartialGPN):
        rows = [["g", "i", "j", "value"]]
        rows += [[obj.group.fmt(g), _label(i), _label(j), fmt_q(obj.table[(g, i, j)])] for g, i, j in obj.domain()]
    else:
        rows = [["point", "vertex"]] + [list(r) for r in obj]
    text = _csv(rows)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# Jobs
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    status: str = "ok"
    message: str = ""
    result: dict = field(default_factory=dict)
    verification: list[tuple[str, bool]] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)
    written: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT[self.status]

    def check(self, name: str, ok: bool) -> None:
        self.verification.append((name, bool(ok)))

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "status": self.status,
            "message": self.message,
            "result": self.result,
            "verification": [{"check": n, "pass": ok} for n, ok in self.verification],
            "artifacts": sorted(self.artifacts),
            "written": self.written,
            "seconds": round(self.seconds, 3),
        }


def _bound(job: dict, default: int) -> int:
    b = job.get("bound", default)
    if not isinstance(b, int) or isinstance(b, bool) or b <= 0:
        raise JobError("bound", "expected a positive integer")
    return b


def _embedding_rows(grp: Group, res) -> list[list[Any]]:
    return [[f"{j}:{grp.fmt(g)}", res.window.label(v)] for j, g, v in res.embedding]


def _job_approx(job: dict, rep: RunReport, kind: str) -> None:
    spec = parse_spec(job, kind)
    grp = spec.group
    if kind == TOURNAMENT:
        res = approximate_tournament(spec, _bound(job, 4))
    else:
        res = approximate_triangle_free(spec, _bound(job, 30))
    if isinstance(res, NotFound):
        rep.status, rep.message = "not-found", f"bound {res.bound}: {res.detail}"
        return
    w = res.window
    rep.result = {"vertices": w.size, "arrows": len(w.arrows()), "audit": res.audit,
                  "certificate": res.certificate.describe() if res.certificate else None}
    if kind == TOURNAMENT:
        rep.check("tournament: one arrow per pair, generator invariant", validate_tournament(w).ok)
    else:
        rep.check(f"no {spec.clique}-clique", validate_clique_free(w, spec.clique).ok)
    rep.check("embedding audit", bool(res.audit))
    if res.certificate is not None:
        rep.check("certificate re-verifies", res.certificate.reverify())
    rep.artifacts["dot"] = export_dot(w)
    rep.artifacts["csv"] = export_csv(w)
    rep.artifacts["embedding"] = export_csv(_embedding_rows(grp, res))


def _job_refute(job: dict, rep: RunReport) -> None:
    name = job.get("spec", "z2-counterexample")
    if name != "z2-counterexample":
        raise JobError("spec", "only the built-in \"z2-counterexample\" is available")
    spec = z2_counterexample()
    bound = _bound(job, 40)
    res = refute_approximation(spec, Z2_MARKED, bound, audit_element=(1, 0))
    if isinstance(res, FoundApproximation):
        rep.result = {"found": True, "candidate": [[list(r) for r in b] for b in res.candidate]}
        rep.check("found window is a tournament", res.report.ok)
        rep.artifacts["dot"] = export_dot(res.window)
        rep.artifacts["csv"] = export_csv(res.window)
        return
    rep.result = {"found": False, "candidates": res.candidates, "reasons": res.reasons(),
                  "exhaustive": res.exhaustive, "good_pairs_audited": len(res.parity_audit)}
    rep.check("every candidate fails", res.exhaustive and len(res.entries) == res.candidates)
    rep.check("parity: a lies in K_x + K_y for every good pair", all(ok for _, ok in res.parity_audit))
    lines = [f"refutation up to index {bound}: {res.candidates} candidate pairs"]
    for combo, reason in res.entries:
        lines.append(f"{[list(r) for r in combo[0]]} {[list(r) for r in combo[1]]}: {reason}")
    rep.artifacts["report"] = "\n".join(lines) + "\n"
    rep.artifacts["csv"] = _csv([["K_x", "K_y", "reason"]] +
                                [[json.dumps([list(r) for r in c[0]]), json.dumps([list(r) for r in c[1]]), r]
                                 for c, r in res.entries])


def _job_build(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    kind = job.get("kind", TOURNAMENT)
    if kind not in (TOURNAMENT, GRAPH, SET):
        raise JobError("kind", "expected tournament, graph or set")
    steps = int(job.get("steps", 200))
    if steps <= 0:
        raise JobError("steps", "expected a positive integer")
    res = build_generic(grp, kind, steps, orbit_cap=int(job.get("orbit_cap", 3)),
                        base_orbits=int(job.get("base_orbits", 1)), clique=int(job.get("clique", 3)))
    last = res.last
    audit_by = int(job.get("audit_by", min(50, steps)))
    audit = audit_requests(res, audit_by)
    rep.result = {"steps": res.steps, "size": last.size if last is not None else 0, "requests": len(res.ledger),
                  "pending": len(res.pending), "catalog": len(res.catalog), "note": res.header}
    if "extension_k" in job and last is not None:
        ext = extension_property_check(last, res.catalog, int(job["extension_k"]))
        rep.result["extension_property"] = {"pass": ext.ok, "checked": ext.checked, "failures": len(ext.violations)}
    if last is not None:
        rep.check("final window is an action of the right kind", validate_action(last).ok)
        rep.artifacts["dot"] = export_dot(last)
        rep.artifacts["csv"] = export_csv(last)
    rep.check(f"ledger: requests enqueued by step {audit_by} satisfied", audit.ok)


def _job_permutation(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    subs = [parse_subgroup(grp, s, f"subgroups[{n}]") for n, s in enumerate(_need(job, "subgroups", ""))]
    a = build_generic_permutation(grp, subs, int(job.get("multiplicity", 1)))
    rep.result = {"points": a.size, "cycles": cycle_text(a).splitlines()}
    rep.check("generators act as permutations", validate_action(a).ok)
    rep.artifacts["report"] = cycle_text(a) + "\n"
    rep.artifacts["csv"] = _csv([["point"] + [f"{s}" for s in grp.labels[:a.moves.shape[0]]]] +
                                [[a.label(v)] + [a.label(int(a.moves[s, v])) for s in range(a.moves.shape[0])]
                                 for v in range(a.size)])


def _job_good(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    h = parse_subgroup(grp, _need(job, "subgroup", ""), "subgroup")
    v = is_good(h, int(job.get("radius", 4)))
    rep.result = {"status": v.status, "method": v.method,
                  "witness": None if v.witness is None else [dump_element(grp, x) for x in v.witness]}
    if v.status == "unknown":
        rep.status, rep.message = "not-found", f"undecided within radius {v.radius}"


def _job_rz(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    g = parse_element(grp, _need(job, "element", ""), "element")
    factors = [parse_subgroup(grp, s, f"factors[{n}]") for n, s in enumerate(_need(job, "factors", ""))]
    cert = rz_witness(g, factors, _bound(job, 4), assume_outside=bool(job.get("assume_outside", False)))
    _certificate(rep, cert)


def _job_t2rz(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    triples = []
    for n, t in enumerate(_need(job, "triples", "")):
        if not isinstance(t, list) or len(t) != 3:
            raise JobError(f"triples[{n}]", "expected [element, subgroup, subgroup]")
        triples.append((parse_element(grp, t[0], f"triples[{n}][0]"), parse_subgroup(grp, t[1], f"triples[{n}][1]"),
                        parse_subgroup(grp, t[2], f"triples[{n}][2]")))
    goods = [parse_subgroup(grp, s, f"goods[{n}]") for n, s in enumerate(job.get("goods", []))]
    if not triples and not goods:
        raise JobError("triples", "give at least one triple or good subgroup")
    _certificate(rep, tournament_2rz_witness(triples, goods, _bound(job, 4)))


def _certificate(rep: RunReport, cert) -> None:
    if isinstance(cert, NotFound):
        rep.status, rep.message = "not-found", f"bound {cert.bound}: {cert.detail}"
        return
    rep.result = cert.describe()
    rep.check("certificate re-verifies", cert.reverify())
    rep.artifacts["report"] = json.dumps(cert.describe(), indent=2, sort_keys=True) + "\n"


def _job_gpn_validate(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    p = parse_table(grp, job)
    r = validate_partial_gpn(p)
    rep.result = {"valid": r.ok, "entries": r.checked, "violations": r.lines()}
    rep.artifacts["csv"] = export_csv(p)


def _job_gpn_extend(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    p = parse_table(grp, job)
    queries = []
    for n, t in enumerate(_need(job, "queries", "")):
        if not isinstance(t, list) or len(t) != 3:
            raise JobError(f"queries[{n}]", "expected [g, i, j]")
        queries.append((parse_element(grp, t[0], f"queries[{n}][0]"), t[1], t[2]))
    r = validate_partial_gpn(p)
    if not r.ok:
        raise PreconditionError("table is not a partial pseudonorm: " + "; ".join(r.lines()[:3]))
    vals = extend_max(p, queries, cap=job.get("cap"), fill=job.get("fill"))
    out = []
    for v in vals:
        g, i, j = v.query
        val = "above-cap" if isinstance(v.value, AboveCap) else fmt_q(v.value)
        out.append({"query": [dump_element(grp, g), i, j], "value": val, "fill": v.fill,
                    "chain": [[dump_element(grp, s.g), s.i, s.j, fmt_q(s.value)] for s in v.chain]})
        if v.found and not v.fill:
            rep.check(f"chain for ({grp.fmt(g)},{i},{j}) recomposes and costs the value",
                      check_chain(p, v.query, v.value, v.chain))
    rep.result = {"values": out}
    rep.artifacts["csv"] = _csv([["g", "i", "j", "value"]] + [o["query"] + [o["value"]] for o in out])


def _job_gpn_turbulence(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    labels = job.get("labels", [1])
    pa = parse_table(grp, {"labels": labels, **_need(job, "alpha", "")}, "alpha.")
    pb = parse_table(grp, {"labels": labels, **_need(job, "beta", "")}, "beta.")
    for name, p in (("alpha", pa), ("beta", pb)):
        r = validate_partial_gpn(p)
        if not r.ok:
            raise PreconditionError(f"{name} is not a partial pseudonorm: " + "; ".join(r.lines()[:3]))
    tp = turbulence_path(pa, pb, _need(job, "epsilon", ""))
    rep.result = {"distance": fmt_q(tp.distance), "k": tp.k,
                  "delta": None if tp.delta is None else fmt_q(tp.delta),
                  "consecutive": [fmt_q(d) for d in tp.consecutive]}
    rep.check("combined table is a partial pseudonorm", tp.report.ok)
    rep.check("consecutive distances equal M/k and k = M/delta + 1", tp.audit)
    rep.artifacts["csv"] = export_csv(tp.combined)
    for j, lv in enumerate(tp.levels):
        rep.artifacts[f"level{j}"] = export_csv(lv)


def _job_gpn_avoid(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    window = parse_table(grp, _need(job, "window", ""), "window.")
    lam = {}
    for n, ent in enumerate(_need(job, "lambda", "")):
        if not isinstance(ent, list) or len(ent) != 2:
            raise JobError(f"lambda[{n}]", "expected [g, value]")
        lam[parse_element(grp, ent[0], f"lambda[{n}][0]")] = q(ent[1])
    tail_lit = _need(job, "tail", "")
    tail = Tail(_need(tail_lit, "kind", "tail"), tail_lit.get("bound"))
    a = avoid_pseudonorm(lam, tail, window, job.get("mode", "space"), search_radius=int(job.get("radius", 12)))
    rep.result = {"mode": a.mode, "branch": a.branch, "fill": fmt_q(a.fill), "witness": dump_element(grp, a.witness),
                  "N(g,1,1)": fmt_q(a.witness_value), "lambda(g)": fmt_q(a.lam_value), "lambda_exact": a.lam_exact,
                  "margin": fmt_q(a.margin), "notes": a.notes}
    if a.far_witness is not None:
        rep.result["far_witness"] = dump_element(grp, a.far_witness)
        rep.result["far_margin"] = fmt_q(a.far_margin)
    rep.check("margin exceeds 1/4", a.margin > Fraction(1, 4))
    if a.restriction_ok is not None:
        rep.check("window entries unchanged by the extension", a.restriction_ok)
    rep.artifacts["csv"] = export_csv(a.table)


def _job_realize(job: dict, rep: RunReport) -> None:
    grp = parse_group(_need(job, "group", ""))
    p = parse_table(grp, job)
    radius = int(job.get("radius", 2))
    mw = realize_metric(p, radius, fill=job.get("fill"))
    rep.result = {"points": len(mw.points), "base": {str(k): v for k, v in mw.base.items()}, "notes": mw.notes}
    rep.check("metric axioms, equivariance and kernel audit", mw.ok)
    rep.artifacts["csv"] = export_csv(mw)


COMMANDS: dict[str, Callable[[dict, RunReport], None]] = {
    "approx-tournament": lambda j, r: _job_approx(j, r, TOURNAMENT),
    "approx-graph": lambda j, r: _job_approx(j, r, GRAPH),
    "refute": _job_refute,
    "build-generic": _job_build,
    "generic-permutation": _job_permutation,
    "good": _job_good,
    "rz-witness": _job_rz,
    "t2rz-witness": _job_t2rz,
    "gpn-validate": _job_gpn_validate,
    "gpn-extend": _job_gpn_extend,
    "gpn-turbulence": _job_gpn_turbulence,
    "gpn-avoid": _job_gpn_avoid,
    "realize-metric": _job_realize,
}


def load_job(source: str | dict) -> dict:
    if isinstance(source, dict):
        return source
    try:
        if source == "-":
            return json.load(sys.stdin)
        with open(source, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise JobError("job", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None


def run_job(source: str | dict, command: str | None = None, overrides: dict | None = None) -> RunReport:
    """Dispatch one job; errors become statuses, never exceptions (except internal invariant failures)."""
    t0 = time.perf_counter()
    rep = RunReport(command or "")
    try:
        job = load_job(source)
        if not isinstance(job, dict):
            raise JobError("job", "expected a JSON object")
        job = {**job, **(overrides or {})}
        cmd = command or job.get("command")
        if cmd is None:
            raise JobError("command", "missing field")
        rep.command = cmd
        if cmd not in COMMANDS:
            raise JobError("command", f"unknown command {cmd!r}")
        COMMANDS[cmd](job, rep)
    except (UsageError, UnsupportedError) as exc:
        rep.status, rep.message = "usage", str(exc)
    except PreconditionError as exc:
        rep.status, rep.message = "precondition", str(exc)
    except OSError as exc:
        rep.status, rep.message = "usage", f"cannot read job: {exc}"
    if rep.status == "ok" and not all(ok for _, ok in rep.verification):
        raise InternalInvariantError("verification failed: " +
                                     ", ".join(n for n, ok in rep.verification if not ok))
    rep.seconds = time.perf_counter() - t0
    return rep


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="finapprox", description="Run one finite-approximation job.")
    ap.add_argument("command", choices=["run", *COMMANDS], help="command, or 'run' to use the job's own field")
    ap.add_argument("job", nargs="?", default=None, help="job file (JSON), '-' for stdin")
    ap.add_argument("--json", dest="inline", help="inline job JSON instead of a file")
    ap.add_argument("--bound", type=int)
    ap.add_argument("--radius", type=int)
    ap.add_argument("--out", help="write the artifact here (DOT or CSV)")
    ap.add_argument("--format", choices=FORMATS, default="report")
    args = ap.parse_args(argv)

    if args.inline is not None:
        try:
            source: str | dict = json.loads(args.inline)
        except json.JSONDecodeError as exc:
            print(json.dumps({"status": "usage", "message": f"--json: {exc.msg}"}))
            return EXIT["usage"]
    elif args.job is not None:
        source = args.job
    else:
        ap.error("give a job file or --json")
    if isinstance(source, str) and os.path.isdir(source):
        return _run_batch(source, args)
    overrides = {k: v for k, v in (("bound", args.bound), ("radius", args.radius)) if v is not None}
    rep = run_job(source, None if args.command == "run" else args.command, overrides)

    artifact = None
    if rep.status == "ok" and args.format != "report":
        artifact = rep.artifacts.get(args.format)
        if artifact is None:
            rep.status, rep.message = "usage", f"command {rep.command} has no {args.format} output"
    if artifact is not None:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(artifact)
            rep.written.append(args.out)
        else:
            sys.stdout.write(artifact)
    elif args.out and rep.status == "ok":
        text = rep.artifacts.get("report") or json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n"
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        rep.written.append(args.out)
    stream = sys.stderr if artifact is not None and not args.out else sys.stdout
    print(json.dumps(rep.to_json(), indent=2, sort_keys=True), file=stream)
    return rep.exit_code


def _run_batch(folder: str, args: argparse.Namespace) -> int:
    """Run each job file in the folder; print the list of reports; exit with the worst code."""
    if args.format != "report":
        print(json.dumps({"status": "usage", "message": "batch runs only produce reports"}))
        return EXIT["usage"]
    overrides = {k: v for k, v in (("bound", args.bound), ("radius", args.radius)) if v is not None}
    names = sorted(n for n in os.listdir(folder) if n.endswith(".json"))
    reports = []
    for name in names:
        rep = run_job(os.path.join(folder, name), None if args.command == "run" else args.command, overrides)
        reports.append({"job": name, **rep.to_json()})
    text = json.dumps(reports, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return max((EXIT[r["status"]] for r in reports), default=0)


if __name__ == "__main__":
    sys.exit(main())

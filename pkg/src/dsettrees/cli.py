"""Command-line surface: serialization, corpus management, DOT rendering.

The JSON interchange format is deterministic (sorted keys and arrays) so
serialized trees and reports are diff- and golden-file-friendly.  Every
subcommand is a thin shell over one library operation; exit codes are 0 on
success, 1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
from typing import Optional

from .amalgam import (amalgamate, enumerate_extensions, hull, joint_embed,
                      _member_cached)
from .dstructures import (DSetGraph, TreeOfDSets, dset_graph, structure_tree,
                          tree_of_dsets, validate)
from .errors import ArgumentError, DataError, InconsistencyError, ParseError
from .fraisse import ChainConfig, build_chain, orbit_signature, richness_audit
from .reconstruct import (ReconstructedTree, canonical_key, is_member_of_D,
                          iso, reconstruct, tree_iso)
from .relations import realize

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def serialize(t: TreeOfDSets) -> bytes:
    """Deterministic JSON bytes for a tree of D-sets."""
    em = t.element_map
    pm = t.tree.parent_map
    vertices = []
    for v in sorted(t.tree.vertices):
        lab = t.label_map[v]
        leaves = [{"node": leaf, "element": em.get(leaf)} for leaf in lab.leaves()]
        vertices.append({
            "id": v,
            "parent": pm.get(v),
            "dset": {
                "nodes": sorted(lab.nodes),
                "edges": [list(e) for e in sorted(lab.edges)],
                "leaves": leaves,
                "special": [{"ram": r, "neighbor": nb}
                            for r, nb in sorted(lab.special_map.items())],
            },
        })
    doc = {
        "version": SCHEMA_VERSION,
        "vertices": vertices,
        "f": [{"vertex": v, "successor": s, "ram": r} for v, s, r in sorted(t.f)],
        "g": [{"parent": p, "child": c, "leaf": leaf, "branchNeighbor": nb}
              for p, c, leaf, nb in sorted(t.g)],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def _require_keys(obj, allowed, required, loc):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", loc)
    for key in obj:
        if key not in allowed:
            raise ParseError(f"unknown key {key!r}", loc)
    for key in required:
        if key not in obj:
            raise ParseError(f"missing key {key!r}", loc)


def parse(data: bytes) -> TreeOfDSets:
    """Parse and fully validate a serialized tree of D-sets."""
    try:
        doc = json.loads(data.decode() if isinstance(data, (bytes, bytearray)) else data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}", "")
    _require_keys(doc, {"version", "vertices", "f", "g"},
                  {"version", "vertices", "f", "g"}, "")
    if doc["version"] != SCHEMA_VERSION:
        raise ParseError(f"unsupported version {doc['version']!r}", "/version")

    labels, parent, element = {}, {}, {}
    roots = []
    if not isinstance(doc["vertices"], list):
        raise ParseError("expected an array", "/vertices")
    for i, vent in enumerate(doc["vertices"]):
        loc = f"/vertices/{i}"
        _require_keys(vent, {"id", "parent", "dset"}, {"id", "parent", "dset"}, loc)
        vid = vent["id"]
        if not isinstance(vid, str):
            raise ParseError("vertex id must be a string", loc + "/id")
        if vid in labels:
            raise ParseError(f"duplicate vertex {vid!r}", loc + "/id")
        ds = vent["dset"]
        _require_keys(ds, {"nodes", "edges", "leaves", "special"},
                      {"nodes", "edges", "leaves", "special"}, loc + "/dset")
        nodes = ds["nodes"]
        if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
            raise ParseError("nodes must be an array of strings", loc + "/dset/nodes")
        edges = []
        for j, e in enumerate(ds["edges"]):
            if not (isinstance(e, list) and len(e) == 2):
                raise ParseError("edge must be a pair", f"{loc}/dset/edges/{j}")
            edges.append(tuple(e))
        special = {}
        for j, srow in enumerate(ds["special"]):
            _require_keys(srow, {"ram", "neighbor"}, {"ram", "neighbor"},
                          f"{loc}/dset/special/{j}")
            special[srow["ram"]] = srow["neighbor"]
        lab = dset_graph(nodes, edges, special)
        labels[vid] = lab
        declared = set()
        for j, lrow in enumerate(ds["leaves"]):
            _require_keys(lrow, {"node", "element"}, {"node", "element"},
                          f"{loc}/dset/leaves/{j}")
            declared.add(lrow["node"])
            if lrow["element"] is not None:
                element.setdefault(vid, {})[lrow["node"]] = lrow["element"]
        if declared != set(lab.leaves()):
            raise ParseError("declared leaves do not match the graph's leaves",
                             loc + "/dset/leaves")
        if vent["parent"] is None:
            roots.append(vid)
        else:
            parent[vid] = vent["parent"]
    if len(roots) != 1:
        raise ParseError(f"expected exactly one root, found {len(roots)}", "/vertices")

    f = {v: {} for v in labels}
    for i, frow in enumerate(doc["f"]):
        _require_keys(frow, {"vertex", "successor", "ram"},
                      {"vertex", "successor", "ram"}, f"/f/{i}")
        if frow["vertex"] not in labels:
            raise ParseError(f"unknown vertex {frow['vertex']!r}", f"/f/{i}/vertex")
        f[frow["vertex"]][frow["successor"]] = frow["ram"]
    g = {}
    for i, grow in enumerate(doc["g"]):
        _require_keys(grow, {"parent", "child", "leaf", "branchNeighbor"},
                      {"parent", "child", "leaf", "branchNeighbor"}, f"/g/{i}")
        g.setdefault((grow["parent"], grow["child"]), {})[grow["leaf"]] = \
            grow["branchNeighbor"]

    em = element.get(roots[0], {})
    for v in element:
        if v != roots[0]:
            raise ParseError("element names are only allowed on the root label",
                             f"/vertices/{v}")
    st = structure_tree(set(labels), roots[0], parent)
    t = tree_of_dsets(st, labels, f, g, em)
    rep = validate(t)
    if not rep.ok:
        raise ParseError(rep.violations[0], "")
    return t


# --------------------------------------------------------------------------
# DOT rendering
# --------------------------------------------------------------------------

def _dot_dset(lab: DSetGraph, prefix: str, naming: dict, lines: list):
    sp = {(nb, r) for r, nb in lab.special_map.items()}
    for n in sorted(lab.nodes):
        label = naming.get(n, n if lab.degree(n) <= 1 else "")
        shape = "circle" if lab.degree(n) <= 1 else "point"
        lines.append(f'  "{prefix}{n}" [label="{label}", shape={shape}];')
    for a, b in sorted(lab.edges):
        if (a, b) in sp:
            lines.append(f'  "{prefix}{a}" -> "{prefix}{b}" [dir=forward];')
        elif (b, a) in sp:
            lines.append(f'  "{prefix}{b}" -> "{prefix}{a}" [dir=forward];')
        else:
            lines.append(f'  "{prefix}{a}" -> "{prefix}{b}" [dir=none];')


def render_dot(obj, view: str = "combined") -> str:
    """Deterministic DOT text; special branches point at their ramification point."""
    if view not in ("dsets", "structureTree", "combined"):
        raise ArgumentError(f"unknown view {view!r}")
    lines = ["digraph tree_of_dsets {"]
    if isinstance(obj, TreeOfDSets):
        em = obj.element_map
        if view in ("structureTree", "combined"):
            for v in sorted(obj.tree.vertices):
                lines.append(f'  "st_{v}" [label="{v}", shape=box];')
            for c, p in sorted(obj.tree.parent_map.items()):
                lines.append(f'  "st_{p}" -> "st_{c}";')
        if view in ("dsets", "combined"):
            for v in sorted(obj.tree.vertices):
                lab = obj.label_map[v]
                naming = em if v == obj.tree.root else {}
                lines.append(f'  subgraph "cluster_{v}" {{')
                lines.append(f'    label="{v}";')
                sub = []
                _dot_dset(lab, f"{v}_", naming, sub)
                lines.extend("  " + s for s in sub)
                lines.append("  }")
    elif isinstance(obj, ReconstructedTree):
        if view in ("structureTree", "combined"):
            for rep in obj.vertices:
                name = ";".join(rep)
                lines.append(f'  "st_{name}" [label="{name}", shape=box];')
            for c, p in sorted(obj.parent_map.items()):
                lines.append(f'  "st_{";".join(p)}" -> "st_{";".join(c)}";')
        if view in ("dsets", "combined"):
            for rep in obj.vertices:
                name = ";".join(rep)
                lab = obj.dtree_map[rep]
                ep = obj.epartition_map[rep]
                naming = {f"d{i}": ",".join(sorted(c)) for i, c in enumerate(ep)}
                lines.append(f'  subgraph "cluster_{name}" {{')
                lines.append(f'    label="{name}";')
                sub = []
                _dot_dset(lab, f"{name}_", naming, sub)
                lines.extend("  " + s for s in sub)
                lines.append("  }")
    else:
        raise ArgumentError("render_dot expects a tree of D-sets or a reconstruction")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Corpus
# --------------------------------------------------------------------------

def seed_structure() -> TreeOfDSets:
    st = structure_tree({"u0"}, "u0", {})
    return tree_of_dsets(st, {"u0": dset_graph({"a"}, set())}, {"u0": {}}, {},
                         {"a": "a"})


def enumerate_corpus(max_size: int) -> dict:
    """All realizable structures up to each size, up to isomorphism.

    Closes the one-element seed under one-point extensions, deduplicating by
    the canonical form of the realized relations.
    """
    if max_size < 1:
        raise ArgumentError("max_size must be positive")
    levels = {1: {canonical_key(realize(seed_structure())[0]): seed_structure()}}
    for n in range(2, max_size + 1):
        nxt = {}
        for t in levels[n - 1].values():
            for _, ext in enumerate_extensions(t):
                key = canonical_key(realize(ext)[0])
                if key not in nxt:
                    nxt[key] = ext
        levels[n] = nxt
    return {n: [levels[n][k] for k in sorted(levels[n])] for n in levels}


def corpus_report(max_size: int) -> dict:
    corpus = enumerate_corpus(max_size)
    digests = {}
    for n, members in corpus.items():
        keys = sorted(
            hashlib.sha256(repr(canonical_key(realize(t)[0])).encode()).hexdigest()
            for t in members)
        digests[str(n)] = keys
    return {
        "maxSize": max_size,
        "counts": {str(n): len(members) for n, members in corpus.items()},
        "typeDigests": digests,
    }


# --------------------------------------------------------------------------
# Command implementations
# --------------------------------------------------------------------------

def _read_tree(path: str) -> TreeOfDSets:
    with open(path, "rb") as fh:
        return parse(fh.read())


def _emit(payload, out: Optional[str], raw: bool = False):
    if raw:
        text = payload
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _relation_dump(ls) -> dict:
    return {
        "domain": list(ls.domain),
        "L": [list(t) for t in sorted(ls.L)],
        "S": [list(t) for t in sorted(ls.S)],
        "Lp": [list(t) for t in sorted(ls.Lp)],
        "Sp": [list(t) for t in sorted(ls.Sp)],
        "Q": [list(t) for t in sorted(ls.Q)],
        "R": [list(t) for t in sorted(ls.R)],
    }


def _cmd_validate(args):
    _read_tree(args.input)
    _emit({"ok": True}, args.out)
    return 0


def _cmd_realize(args):
    ls, _ = realize(_read_tree(args.input))
    _emit(_relation_dump(ls), args.out)
    return 0


def _cmd_reconstruct(args):
    ls, _ = realize(_read_tree(args.input))
    rec = reconstruct(ls)
    payload = {
        "vertices": [list(v) for v in rec.vertices],
        "parent": {";".join(c): list(p) for c, p in rec.parent_map.items()},
        "jsets": {";".join(v): sorted(j) for v, j in rec.jset},
        "epartitions": {";".join(v): [sorted(c) for c in ep]
                        for v, ep in rec.epartition},
    }
    _emit(payload, args.out)
    return 0


def _cmd_member(args):
    ls, _ = realize(_read_tree(args.input))
    m = is_member_of_D(ls)
    _emit({"member": m.member, "refutation": m.refutation}, args.out)
    return 0


def _cmd_iso(args):
    a = _read_tree(args.inputs[0])
    b = _read_tree(args.inputs[1])
    result = tree_iso(a, b)
    payload = {"isomorphic": result is not None}
    if result is not None:
        payload["vertexMap"] = {x: y for x, y in result.vertex_map}
    _emit(payload, args.out)
    return 0


def _cmd_extend(args):
    t = _read_tree(args.input)
    rows = []
    for desc, ext in enumerate_extensions(t):
        rows.append({
            "kind": desc.kind,
            "newElement": desc.new_element,
            "ram": desc.ram,
            "edge": list(desc.edge) if desc.edge else None,
            "specialSide": desc.special_side,
            "size": len(ext.domain),
        })
    _emit({"count": len(rows), "extensions": rows}, args.out)
    return 0


def _cmd_amalgamate(args):
    a = _read_tree(args.inputs[0])
    e1 = _read_tree(args.inputs[1])
    e2 = _read_tree(args.inputs[2])
    result, g1, g2 = amalgamate(a, e1, e2)
    _emit({
        "domain": sorted(result.domain),
        "embedding1": dict(g1.mapping),
        "embedding2": dict(g2.mapping),
        "tree": json.loads(serialize(result).decode()),
    }, args.out)
    return 0


def _cmd_jep(args):
    a = _read_tree(args.inputs[0])
    b = _read_tree(args.inputs[1])
    result, ga, gb = joint_embed(a, b)
    _emit({
        "domain": sorted(result.domain),
        "embeddingA": dict(ga.mapping),
        "embeddingB": dict(gb.mapping),
        "tree": json.loads(serialize(result).decode()),
    }, args.out)
    return 0


def _cmd_hull(args):
    t = _read_tree(args.input)
    subset = args.elements.split(",") if args.elements else []
    result = hull(t, subset)
    _emit({"hull": sorted(result), "size": len(result)}, args.out)
    return 0


def _cmd_chain(args):
    seed = _read_tree(args.input)
    cfg = ChainConfig(seed=seed, rounds=args.rounds, max_size=args.max_size,
                      task_bound=args.task_bound, rng_seed=args.seed)
    stages = build_chain(cfg)
    audit = richness_audit(stages[-1], min(args.k, args.task_bound))
    orbits = {}
    for k in range(2, args.k + 1):
        orbits[str(k)] = [orbit_signature(s, k) for s in stages[-3:]]
    payload = {
        "stageSizes": [len(s.structure.domain) for s in stages],
        "added": [len(s.provenance) for s in stages],
        "deferred": [sum(c for _, c in s.deferred) for s in stages],
        "audit": {
            "embeddedTypeCounts": {str(k): v
                                   for k, v in audit["embedded_type_counts"].items()},
            "fullCoverage": audit["full_coverage"],
        },
        "orbitSignatures": orbits,
    }
    _emit(payload, args.out)
    return 0


def _cmd_corpus(args):
    _emit(corpus_report(args.max_size), args.out)
    return 0


def _cmd_dot(args):
    t = _read_tree(args.input)
    _emit(render_dot(t, args.view), args.out, raw=True)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="dsettrees",
        description="Build, validate and analyse finite trees of D-sets.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        p.add_argument("--out", default=None)
        return p

    p = add("validate", _cmd_validate); p.add_argument("--input", required=True)
    p = add("realize", _cmd_realize); p.add_argument("--input", required=True)
    p = add("reconstruct", _cmd_reconstruct); p.add_argument("--input", required=True)
    p = add("member", _cmd_member); p.add_argument("--input", required=True)
    p = add("iso", _cmd_iso); p.add_argument("--inputs", nargs=2, required=True)
    p = add("extend", _cmd_extend); p.add_argument("--input", required=True)
    p = add("amalgamate", _cmd_amalgamate); p.add_argument("--inputs", nargs=3, required=True)
    p = add("jep", _cmd_jep); p.add_argument("--inputs", nargs=2, required=True)
    p = add("hull", _cmd_hull)
    p.add_argument("--input", required=True)
    p.add_argument("--elements", required=True,
                   help="comma-separated element names")
    p = add("chain", _cmd_chain)
    p.add_argument("--input", required=True)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--max-size", type=int, default=32)
    p.add_argument("--task-bound", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=4)
    p = add("corpus", _cmd_corpus)
    p.add_argument("--max-size", type=int, default=5)
    p = add("dot", _cmd_dot)
    p.add_argument("--input", required=True)
    p.add_argument("--view", default="combined",
                   choices=["dsets", "structureTree", "combined"])

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ArgumentError, DataError, InconsistencyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Per-loop dependence analysis and parallelization-plan enumeration.

For each loop the dependence graph restricted to the loop body is
partitioned into strongly connected components; a component is sequential
when a loop-carried dependence survives inside it after the graph's
features have been applied.  DOALL applies to loops with no sequential
component and a known trip count and is then the only technique
considered; otherwise HELIX segment counts and DSWP stage counts are
enumerated against the core budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import ANY_PRODUCER, LAST_PRODUCER, ORDER, PsPdg
from .ir import ClauseKind, Program, Region, RegionKind, UNKNOWN_TRIP
from .pdg import DATA_KINDS, DepEdge, Pdg

SEQUENTIAL = "sequential"
PARALLEL = "parallel"

DOALL = "doall"
HELIX = "helix"
DSWP = "dswp"


@dataclass(frozen=True)
class EnumerationConfig:
    cores: int = 56
    chunk_sizes: int = 8
    coverage_threshold: float = 0.01

    def chunks(self) -> tuple[int, ...]:
        return tuple(2**k for k in range(self.chunk_sizes))


@dataclass(frozen=True)
class ParallelPlan:
    loop: str
    technique: str  # doall | helix | dswp
    cores: int
    chunk: int | None = None
    segments: int | None = None
    stages: int | None = None
    requirements: tuple[str, ...] = ()

    def check(self, nseq: int, nscc: int, cores: int) -> None:
        if self.technique == DOALL:
            assert nseq == 0, "DOALL requires zero sequential SCCs"
            assert self.chunk and self.chunk > 0
        elif self.technique == HELIX:
            assert self.segments is not None and 1 <= self.segments <= nseq
        else:
            assert self.stages is not None and 2 <= self.stages <= min(nscc, cores)
            assert self.cores >= self.stages


@dataclass
class LoopSubgraph:
    loop: str
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]  # (src vertex, dst vertex, kind)
    carried: tuple[tuple[str, str, str], ...]  # carried data records inside SCC scope
    requirements: tuple[str, ...] = ()


@dataclass
class SccPartition:
    loop: str
    sccs: list[frozenset[str]]
    kinds: list[str]  # sequential | parallel, aligned with sccs
    requirements: tuple[str, ...] = ()

    @property
    def n_sequential(self) -> int:
        return sum(1 for k in self.kinds if k == SEQUENTIAL)

    @property
    def n_total(self) -> int:
        return len(self.sccs)

    def members(self, kind: str) -> set[str]:
        out: set[str] = set()
        for scc, k in zip(self.sccs, self.kinds):
            if k == kind:
                out |= scc
        return out


# ---------------------------------------------------------------------------
# loop subgraph extraction


def _sync_atom_region(program: Program, loop: Region, instr_id: str) -> Region | None:
    """Outermost critical/atomic/ordered region inside the loop holding instr."""
    chain = program.enclosing_regions(instr_id)
    inside = False
    atom: Region | None = None
    for region in chain:  # outermost first
        if region.rid == loop.rid:
            inside = True
            continue
        if inside and region.kind in (
            RegionKind.CRITICAL,
            RegionKind.ATOMIC,
            RegionKind.ORDERED,
        ):
            atom = region
            break
    return atom


def apply_features(g: PsPdg, loop_id: str) -> LoopSubgraph:
    """The loop's dependence subgraph after the graph's features apply.

    Carried records over privatizable/reducible variables were already
    removed when the graph was built; here undirected self-edges become
    mutual-exclusion requirements, node-level iteration-order self-edges
    become serialization requirements, carried records qualified for other
    loops are dropped, and live-out selectors surface as plan requirements.
    """
    program = g.program
    assert program is not None, "graph was built without a program"
    loop = program.region_by_id()[loop_id]
    loop_node = g.region_node.get(loop_id)

    body = [ins.id for ins in loop.instructions()]
    atom_of: dict[str, str] = {}
    atom_regions: dict[str, Region] = {}
    for instr_id in body:
        sync = _sync_atom_region(program, loop, instr_id)
        if sync is None:
            atom_of[instr_id] = f"instr:{instr_id}"
        else:
            atom_of[instr_id] = f"region:{sync.rid}"
            atom_regions[sync.rid] = sync

    node_vertex: dict[int, str] = {}
    for instr_id in body:
        node = g.instr_node.get(instr_id)
        if node is not None:
            node_vertex[node] = atom_of[instr_id]
    for rid, region in atom_regions.items():
        node = g.region_node.get(rid)
        if node is not None:
            node_vertex[node] = f"region:{rid}"

    vertices = tuple(sorted(set(atom_of.values())))
    edges: set[tuple[str, str, str]] = set()
    carried: set[tuple[str, str, str]] = set()
    requirements: list[str] = []

    for record in g.directed:
        src = node_vertex.get(record.src)
        dst = node_vertex.get(record.dst)
        if src is None or dst is None:
            continue
        is_carried_here = loop_node is not None and loop_node in record.carried
        if record.kind == ORDER and record.src == record.dst:
            # iteration-order serialization of a section: a plan requirement,
            # not a sequential-SCC marker
            if is_carried_here:
                requirements.append(f"ordered:{src}")
            continue
        if src != dst or is_carried_here:
            edges.add((src, dst, record.kind))
        if is_carried_here and record.kind in DATA_KINDS:
            carried.add((src, dst, record.kind))

    for uedge in g.undirected:
        a = node_vertex.get(uedge.a)
        b = node_vertex.get(uedge.b)
        if a is None or b is None:
            continue
        if a == b:
            requirements.append(f"mutex:{a}")
        else:
            edges.add((a, b, "mutex"))
            edges.add((b, a, "mutex"))

    for record in g.directed:
        if record.psel is None:
            continue
        src = node_vertex.get(record.src)
        if src is None:
            continue
        if record.psel.kind == LAST_PRODUCER:
            requirements.append(f"liveout-last:{record.var}")
        elif record.psel.kind == ANY_PRODUCER:
            requirements.append(f"liveout-any:{record.var}")

    return LoopSubgraph(
        loop=loop_id,
        vertices=vertices,
        edges=tuple(sorted(edges)),
        carried=tuple(sorted(carried)),
        requirements=tuple(sorted(set(requirements))),
    )


def _pdg_subgraph(program: Program, g: Pdg, loop_id: str) -> LoopSubgraph:
    loop = program.region_by_id()[loop_id]
    body = {ins.id for ins in loop.instructions()}
    vertices = tuple(sorted(f"instr:{i}" for i in body))
    edges: set[tuple[str, str, str]] = set()
    carried: set[tuple[str, str, str]] = set()
    for edge in g.edges:
        if edge.src in body and edge.dst in body:
            src, dst = f"instr:{edge.src}", f"instr:{edge.dst}"
            if src != dst or edge.carried_by == loop_id:
                edges.add((src, dst, edge.kind))
            if edge.carried_by == loop_id and edge.kind in DATA_KINDS:
                carried.add((src, dst, edge.kind))
    return LoopSubgraph(loop=loop_id, vertices=vertices, edges=tuple(sorted(edges)), carried=tuple(sorted(carried)))


def loop_subgraph(program: Program, g: PsPdg | Pdg, loop_id: str) -> LoopSubgraph:
    if isinstance(g, Pdg):
        return _pdg_subgraph(program, g, loop_id)
    return apply_features(g, loop_id)


# ---------------------------------------------------------------------------
# strongly connected components


def _tarjan(vertices: tuple[str, ...], succ: dict[str, list[str]]) -> list[frozenset[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[frozenset[str]] = []
    counter = 0

    for start in vertices:
        if start in index:
            continue
        work: list[tuple[str, int]] = [(start, 0)]
        while work:
            v, child_i = work[-1]
            if child_i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            advanced = False
            children = succ.get(v, [])
            for j in range(child_i, len(children)):
                w = children[j]
                if w not in index:
                    work[-1] = (v, j + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                members = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    members.add(w)
                    if w == v:
                        break
                sccs.append(frozenset(members))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return sccs


def loop_sccs(program: Program, g: PsPdg | Pdg, loop_id: str) -> SccPartition:
    """SCC partition of the loop subgraph, undirected edges bidirectional."""
    if loop_id not in program.region_by_id():
        raise KeyError(f"unknown loop {loop_id!r}")
    sub = loop_subgraph(program, g, loop_id)
    succ: dict[str, list[str]] = {v: [] for v in sub.vertices}
    for src, dst, _ in sub.edges:
        if dst not in succ.get(src, []):
            succ[src].append(dst)
    for v in succ:
        succ[v].sort()
    sccs = _tarjan(sub.vertices, succ)
    sccs.sort(key=lambda members: min(members))

    kinds = []
    for members in sccs:
        sequential = any(
            src in members and dst in members for src, dst, _ in sub.carried
        )
        kinds.append(SEQUENTIAL if sequential else PARALLEL)
    return SccPartition(
        loop=loop_id, sccs=sccs, kinds=kinds, requirements=sub.requirements
    )


# ---------------------------------------------------------------------------
# plan enumeration


def _trip_known(region: Region) -> bool:
    if region.trip is None or region.trip == UNKNOWN_TRIP:
        return False
    return True


def enumerate_plans(
    program: Program,
    g: PsPdg | Pdg,
    loop_id: str,
    cfg: EnumerationConfig = EnumerationConfig(),
) -> tuple[list[ParallelPlan], list[str]]:
    """All (technique, parameters) plans the graph licenses for one loop.

    Returns (plans, notes).  A DOALL-eligible loop is considered only as
    DOALL; otherwise HELIX and DSWP parameter spaces are enumerated.
    """
    region = program.region_by_id().get(loop_id)
    if region is None:
        raise KeyError(f"unknown loop {loop_id!r}")
    partition = loop_sccs(program, g, loop_id)
    if partition.n_total == 0:
        return [], ["EmptyLoop"]

    notes: list[str] = []
    plans: list[ParallelPlan] = []
    requirements = partition.requirements
    nseq, nscc = partition.n_sequential, partition.n_total

    if nseq == 0 and _trip_known(region):
        for cores in range(1, cfg.cores + 1):
            for chunk in cfg.chunks():
                plans.append(
                    ParallelPlan(
                        loop=loop_id,
                        technique=DOALL,
                        cores=cores,
                        chunk=chunk,
                        requirements=requirements,
                    )
                )
        return plans, notes

    if nseq == 0:
        notes.append("UnknownTripCount")
    for segments in range(1, nseq + 1):
        for cores in range(1, cfg.cores + 1):
            plans.append(
                ParallelPlan(
                    loop=loop_id,
                    technique=HELIX,
                    cores=cores,
                    segments=segments,
                    requirements=requirements,
                )
            )
    for stages in range(2, min(nscc, cfg.cores) + 1):
        for cores in range(stages, cfg.cores + 1):
            plans.append(
                ParallelPlan(
                    loop=loop_id,
                    technique=DSWP,
                    cores=cores,
                    stages=stages,
                    requirements=requirements,
                )
            )
    return plans, notes


# ---------------------------------------------------------------------------
# option report


def build_jk(program: Program, base: Pdg) -> Pdg:
    """Worksharing-only baseline: parallel_for removes carried records, but
    data clauses, mutex sections and selectors are not understood."""
    protected = (RegionKind.CRITICAL, RegionKind.ATOMIC, RegionKind.ORDERED)
    instr_region = program.instr_region()
    parents = program.region_parents()
    regions = program.region_by_id()

    def chain(instr_id: str) -> list[Region]:
        out = []
        region = instr_region.get(instr_id)
        while region is not None:
            out.append(region)
            parent = parents.get(region.rid)
            region = regions.get(parent) if parent else None
        return out

    removed: set[DepEdge] = set()
    for _, region in program.regions():
        if region.kind is not RegionKind.PARALLEL_FOR:
            continue
        clause_vars = {
            c.var
            for c in region.clauses
            if c.kind in (ClauseKind.PRIVATE, ClauseKind.THREADPRIVATE, ClauseKind.REDUCTION)
        }
        for edge in base.edges:
            if edge.carried_by != region.rid or edge.kind not in DATA_KINDS:
                continue
            if edge.var in clause_vars:
                continue  # privatization is data knowledge J&K does not model
            if any(
                any(r.kind in protected for r in chain(end))
                for end in (edge.src, edge.dst)
            ):
                continue
            removed.add(edge)
    return Pdg(nodes=base.nodes, edges=frozenset(base.edges - removed))


@dataclass
class LoopOptions:
    loop: str
    coverage: float | None
    pdg: int
    jk: int
    pspdg: int
    source: int
    notes: tuple[str, ...] = ()


@dataclass
class OptionReport:
    loops: list[LoopOptions]
    cfg: EnumerationConfig

    def totals(self) -> dict[str, int]:
        return {
            "pdg": sum(row.pdg for row in self.loops),
            "jk": sum(row.jk for row in self.loops),
            "pspdg": sum(row.pspdg for row in self.loops),
            "source": sum(row.source for row in self.loops),
        }

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "cores": self.cfg.cores,
            "chunk_sizes": list(self.cfg.chunks()),
            "coverage_threshold": self.cfg.coverage_threshold,
            "loops": [
                {
                    "loop": row.loop,
                    "coverage": row.coverage,
                    "pdg": row.pdg,
                    "jk": row.jk,
                    "pspdg": row.pspdg,
                    "source": row.source,
                    "notes": list(row.notes),
                }
                for row in self.loops
            ],
            "totals": self.totals(),
        }

    def to_table(self) -> str:
        headers = ("loop", "pdg", "j&k", "pspdg", "source")
        rows = [
            (row.loop, str(row.pdg), str(row.jk), str(row.pspdg), str(row.source))
            for row in self.loops
        ]
        totals = self.totals()
        rows.append(
            ("total", str(totals["pdg"]), str(totals["jk"]), str(totals["pspdg"]), str(totals["source"]))
        )
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        for r in rows:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
        return "\n".join(lines) + "\n"


def count_options(
    program: Program,
    cfg: EnumerationConfig = EnumerationConfig(),
    model: str = "openmp",
    loop_counts: dict[str, int] | None = None,
    total_events: int | None = None,
) -> OptionReport:
    """Per-loop plan counts for the baseline, J&K-style, full-graph and
    source-encoded views.  With trace statistics, loops below the coverage
    threshold are skipped."""
    from .pdg import build_pdg

    base = build_pdg(program)
    jk = build_jk(program, base)
    if model == "cilk":
        from .frontend_cilk import build_pspdg_cilk

        full = build_pspdg_cilk(program, base)
    else:
        from .frontend_openmp import build_pspdg_omp

        full = build_pspdg_omp(program, base)

    rows: list[LoopOptions] = []
    for fn, region in program.regions():
        if not region.is_loop():
            continue
        coverage = None
        if loop_counts is not None and total_events:
            coverage = loop_counts.get(region.rid, 0) / total_events
            if coverage < cfg.coverage_threshold:
                continue
        pdg_plans, pdg_notes = enumerate_plans(program, base, region.rid, cfg)
        jk_plans, _ = enumerate_plans(program, jk, region.rid, cfg)
        ps_plans, ps_notes = enumerate_plans(program, full, region.rid, cfg)
        source = cfg.cores * cfg.chunk_sizes if region.kind is RegionKind.PARALLEL_FOR else 0
        rows.append(
            LoopOptions(
                loop=region.rid,
                coverage=coverage,
                pdg=len(pdg_plans),
                jk=len(jk_plans),
                pspdg=len(ps_plans),
                source=source,
                notes=tuple(sorted(set(pdg_notes) | set(ps_notes))),
            )
        )
    return OptionReport(loops=rows, cfg=cfg)

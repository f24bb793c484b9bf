"""Staged attack model with variants, per-victim matching, completeness
scoring, adversary identification and attack reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import NoNetworkElementMatched, SchemaError, UnknownSequenceType
from .graph import Node, PropertyGraph, SequenceRule

DEFAULT_ALERT_THRESHOLD = 0.4

STATUS_NONE = "none"
STATUS_PARTIAL = "partial"
STATUS_FULL = "full"

EXIT_NO_ALERT = 0
EXIT_PARTIAL = 3
EXIT_FULL = 4


@dataclass
class Variant:
    id: str
    accepts: list[str]


@dataclass
class Element:
    id: str
    name: str
    required: bool
    variants: list[Variant]


@dataclass
class KillChainModel:
    elements: list[Element]
    alert_threshold: float = DEFAULT_ALERT_THRESHOLD

    def required_ids(self) -> list[str]:
        return [e.id for e in self.elements if e.required]

    def validate(self, rules: list[SequenceRule] | None = None) -> None:
        if not self.elements:
            raise SchemaError("model has no elements")
        if not any(e.required for e in self.elements):
            raise SchemaError("model needs at least one required element")
        if not (0 < self.alert_threshold <= 1):
            raise SchemaError("alert_threshold must be in (0, 1]")
        ids = [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate element ids")
        for e in self.elements:
            if not e.variants:
                raise SchemaError(f"element {e.id} has no variants")
        if rules is not None:
            known = {r.emit for r in rules}
            for e in self.elements:
                for v in e.variants:
                    missing = set(v.accepts) - known
                    if missing:
                        raise UnknownSequenceType(
                            f"element {e.id} variant {v.id} accepts unknown "
                            f"sequence types {sorted(missing)}"
                        )


def model_from_dict(data: dict) -> KillChainModel:
    try:
        elements = [
            Element(
                id=el["id"],
                name=el["name"],
                required=bool(el["required"]),
                variants=[
                    Variant(id=v["id"], accepts=list(v["accepts"]))
                    for v in el["variants"]
                ],
            )
            for el in data["elements"]
        ]
        threshold = float(data.get("alert_threshold", DEFAULT_ALERT_THRESHOLD))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed kill-chain document: {exc}") from exc
    return KillChainModel(elements=elements, alert_threshold=threshold)


def load_killchain(path: str, rules: list[SequenceRule] | None = None) -> KillChainModel:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    model = model_from_dict(data)
    model.validate(rules)
    return model


@dataclass
class Binding:
    sequence_id: str
    variant_id: str
    ts: int  # t_start of the bound sequence


@dataclass
class ChainMatch:
    victim_host: str
    matched: dict[str, Binding] = field(default_factory=dict)
    completeness: float = 0.0
    status: str = STATUS_NONE
    adversary: str | None = None

    def to_report(self, model: KillChainModel) -> dict:
        return {
            "victim": self.victim_host,
            "status": self.status,
            "completeness": round(self.completeness, 6),
            "adversary": self.adversary,
            "elements": {
                eid: {
                    "sequence": b.sequence_id,
                    "variant": b.variant_id,
                    "ts": b.ts,
                }
                for eid, b in self.matched.items()
            },
        }


def match_killchain(graph: PropertyGraph, model: KillChainModel) -> list[ChainMatch]:
    """Bind event sequences to kill-chain elements, one match per victim.

    Greedy earliest binding: elements are visited in attack order; per
    element the first variant owning an eligible sequence wins, and among
    its candidates the earliest t_start is chosen. A sequence binds at
    most once across all matches.
    """
    seqs = graph.sequences()
    by_host: dict[str, list[Node]] = {}
    for s in seqs:
        host = s.attributes["group"].get("source_host")
        if host:
            by_host.setdefault(host, []).append(s)

    consumed: set[str] = set()
    matches: list[ChainMatch] = []
    required = model.required_ids()

    def bind(element: Element, host_seqs: list[Node],
             lo: int, hi: int) -> tuple[Node, str] | None:
        for variant in element.variants:
            candidates = [
                s for s in host_seqs
                if s.attributes["type"] in variant.accepts
                and s.id not in consumed
                and lo <= s.attributes["t_start"] <= hi
            ]
            if candidates:
                best = min(candidates,
                           key=lambda s: (s.attributes["t_start"], s.id))
                return best, variant.id
        return None

    for host in sorted(by_host):
        host_seqs = by_host[host]
        match = ChainMatch(victim_host=host)
        # pass 1: required elements in attack order; pass 2 slots the
        # optional elements between their bound neighbours so they can
        # never displace a required binding.
        last_ts = -1
        for element in model.elements:
            if not element.required:
                continue
            chosen = bind(element, host_seqs, last_ts, 1 << 62)
            if chosen is None:
                continue
            seq, variant_id = chosen
            consumed.add(seq.id)
            match.matched[element.id] = Binding(
                sequence_id=seq.id, variant_id=variant_id,
                ts=seq.attributes["t_start"],
            )
            last_ts = seq.attributes["t_start"]
        for idx, element in enumerate(model.elements):
            if element.required or element.id in match.matched:
                continue
            lo = max(
                (match.matched[e.id].ts for e in model.elements[:idx]
                 if e.id in match.matched), default=-1,
            )
            hi = min(
                (match.matched[e.id].ts for e in model.elements[idx + 1:]
                 if e.id in match.matched), default=1 << 62,
            )
            chosen = bind(element, host_seqs, lo, hi)
            if chosen is None:
                continue
            seq, variant_id = chosen
            consumed.add(seq.id)
            match.matched[element.id] = Binding(
                sequence_id=seq.id, variant_id=variant_id,
                ts=seq.attributes["t_start"],
            )
        if not match.matched:
            continue
        hit_required = sum(1 for eid in required if eid in match.matched)
        match.completeness = hit_required / len(required)
        if match.completeness >= 1.0:
            match.status = STATUS_FULL
        elif match.completeness >= model.alert_threshold:
            match.status = STATUS_PARTIAL
        else:
            match.status = STATUS_NONE
        _annotate(graph, model, match)
        matches.append(match)
    return matches


def _annotate(graph: PropertyGraph, model: KillChainModel, match: ChainMatch) -> None:
    names = {e.id: e.name for e in model.elements}
    for eid, binding in match.matched.items():
        kc_id = f"kc:{eid}"
        graph.add_node(Node(kc_id, "kc_element", names[eid]))
        graph.add_edge(binding.sequence_id, kc_id, "matches")


def identify_adversary(match: ChainMatch, graph: PropertyGraph,
                       model: KillChainModel) -> str:
    """Back-trace the external host behind the matched network elements.

    Among matched elements whose sequence groups by dst_ip, the one
    latest in chain order wins (exfiltration over command-and-control).
    """
    if match.status not in (STATUS_PARTIAL, STATUS_FULL):
        raise NoNetworkElementMatched(f"match status {match.status}")
    chosen_ip: str | None = None
    for element in model.elements:  # later elements overwrite earlier ones
        binding = match.matched.get(element.id)
        if binding is None:
            continue
        seq = graph.nodes[binding.sequence_id]
        dst = seq.attributes["group"].get("dst_ip")
        if dst:
            chosen_ip = dst
    if chosen_ip is None:
        raise NoNetworkElementMatched(
            f"no matched element of {match.victim_host} carries a dst_ip group"
        )
    node_id = f"host:{chosen_ip}"
    node = graph.add_node(Node(node_id, "host", chosen_ip))
    node.kind = "adversary"
    match.adversary = chosen_ip
    return node_id


def reconstruct_attack(match: ChainMatch, graph: PropertyGraph,
                       model: KillChainModel) -> list[dict]:
    """Per matched element: its sequence node and member event ids in ts order."""
    report: list[dict] = []

    def event_ids(seq_node: Node) -> list[int]:
        out: list[int] = []
        for ref in seq_node.attributes["members"]:
            if isinstance(ref, int):
                out.append(ref)
            else:
                out.extend(event_ids(graph.nodes[ref]))
        return sorted(out)

    for element in model.elements:
        binding = match.matched.get(element.id)
        if binding is None:
            continue
        seq = graph.nodes[binding.sequence_id]
        report.append({
            "element": element.id,
            "sequence": binding.sequence_id,
            "variant": binding.variant_id,
            "event_ids": event_ids(seq),
        })
    return report


def exit_code_for(matches: list[ChainMatch]) -> int:
    if any(m.status == STATUS_FULL for m in matches):
        return EXIT_FULL
    if any(m.status == STATUS_PARTIAL for m in matches):
        return EXIT_PARTIAL
    return EXIT_NO_ALERT

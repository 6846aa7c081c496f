"""Bidirectional word trees over corpus sentences.

A tree is rooted at a normalized phrase. The forward side groups the token
sequences that follow each match, the backward side the (reversed)
sequences that precede it. Sentence ends appear as an explicit "." node on
the forward side; on the backward side a start-of-sentence marker node is
materialized only when a node mixes terminating and continuing sentences,
so simple chains end in a plain leaf.

Trees are immutable; drilling returns a new tree with the previous state
pushed onto its history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

from .corpus import Corpus, normalize_phrase
from .errors import AtInitialState, EmptyQuery, NodeNotInTree
from .learner import PredictedClass, Prediction

END_MARKER = "."
START_MARKER = "^"
MAX_DEPTH = 20  # tokens per side; bounds payload size

Direction = Literal["forward", "backward"]


@dataclass(frozen=True)
class MatchSite:
    doc_id: str
    sentence_index: int
    position: int  # token index where the root phrase starts


@dataclass(frozen=True)
class TreeNode:
    token: str
    sites: tuple[MatchSite, ...]
    children: tuple["TreeNode", ...]

    @property
    def weight(self) -> int:
        return len(self.sites)

    @property
    def is_marker(self) -> bool:
        return self.token in (END_MARKER, START_MARKER)

    def doc_ids(self) -> tuple[str, ...]:
        seen = dict.fromkeys(site.doc_id for site in self.sites)
        return tuple(seen)


@dataclass(frozen=True)
class NodeGradient:
    frac_true: float
    frac_false: float
    frac_unknown: float
    n_true: int
    n_false: int
    n_unknown: int


@dataclass(frozen=True)
class WordTree:
    root_phrase: tuple[str, ...]
    forward: TreeNode
    backward: TreeNode
    matched_sites: tuple[MatchSite, ...]
    corpus: Corpus = field(repr=False, compare=False)
    history: tuple["WordTree", ...] = field(default=(), compare=False)
    max_depth: int = MAX_DEPTH

    @property
    def is_empty(self) -> bool:
        return not self.matched_sites


def _sentence_norms(corpus: Corpus, site: MatchSite) -> tuple[str, ...]:
    return corpus.document(site.doc_id).sentences[site.sentence_index].norms()


def _grow_forward(
    contexts: list[tuple[MatchSite, tuple[str, ...]]], token: str, depth: int, max_depth: int
) -> TreeNode:
    sites = tuple(site for site, _ in contexts)
    if depth >= max_depth:
        return TreeNode(token, sites, ())
    groups: dict[str, list[tuple[MatchSite, tuple[str, ...]]]] = {}
    end_sites: list[MatchSite] = []
    for site, rest in contexts:
        if not rest:
            end_sites.append(site)
        else:
            groups.setdefault(rest[0], []).append((site, rest[1:]))
    children = [
        _grow_forward(sub, tok, depth + 1, max_depth) for tok, sub in groups.items()
    ]
    if end_sites:
        children.append(TreeNode(END_MARKER, tuple(end_sites), ()))
    children.sort(key=lambda n: (-n.weight, n.token))
    return TreeNode(token, sites, tuple(children))


def _grow_backward(
    contexts: list[tuple[MatchSite, tuple[str, ...]]], token: str, depth: int, max_depth: int
) -> TreeNode:
    sites = tuple(site for site, _ in contexts)
    if depth >= max_depth:
        return TreeNode(token, sites, ())
    groups: dict[str, list[tuple[MatchSite, tuple[str, ...]]]] = {}
    start_sites: list[MatchSite] = []
    for site, rest in contexts:
        if not rest:
            start_sites.append(site)
        else:
            groups.setdefault(rest[0], []).append((site, rest[1:]))
    if not groups:
        # every sentence begins here: plain leaf, no start marker
        return TreeNode(token, sites, ())
    children = [
        _grow_backward(sub, tok, depth + 1, max_depth) for tok, sub in groups.items()
    ]
    if start_sites:
        children.append(TreeNode(START_MARKER, tuple(start_sites), ()))
    children.sort(key=lambda n: (-n.weight, n.token))
    return TreeNode(token, sites, tuple(children))


def find_occurrences(norms: Sequence[str], phrase: Sequence[str]) -> list[int]:
    """All (possibly overlapping) start positions of phrase in norms."""
    k = len(phrase)
    phrase = tuple(phrase)
    return [i for i in range(len(norms) - k + 1) if tuple(norms[i : i + k]) == phrase]


def _build_from_sites(
    corpus: Corpus,
    root: tuple[str, ...],
    sites: list[MatchSite],
    history: tuple[WordTree, ...],
    max_depth: int,
) -> WordTree:
    forward_ctx = []
    backward_ctx = []
    for site in sites:
        norms = _sentence_norms(corpus, site)
        after = norms[site.position + len(root) :][:max_depth]
        before = tuple(reversed(norms[: site.position]))[:max_depth]
        forward_ctx.append((site, after))
        backward_ctx.append((site, before))
    return WordTree(
        root_phrase=root,
        forward=_grow_forward(forward_ctx, "", 0, max_depth),
        backward=_grow_backward(backward_ctx, "", 0, max_depth),
        matched_sites=tuple(sites),
        corpus=corpus,
        history=history,
        max_depth=max_depth,
    )


def build_tree(corpus: Corpus, query: str, max_depth: int = MAX_DEPTH) -> WordTree:
    """Tree over every sentence containing the query phrase.

    Matching is over normalized tokens, case- and punctuation-insensitive.
    A query with no matches yields an empty tree, not an error, so callers
    can report zero coverage.
    """
    root = normalize_phrase(query)
    if not root:
        raise EmptyQuery("query contains no tokens")
    sites = []
    for doc, idx, sentence in corpus.iter_sentences():
        for pos in find_occurrences(sentence.norms(), root):
            sites.append(MatchSite(doc.doc_id, idx, pos))
    return _build_from_sites(corpus, root, sites, history=(), max_depth=max_depth)


def drill_down(tree: WordTree, direction: Direction, token: str) -> WordTree:
    """Extend the root by a depth-1 child token, pruning to its sentences."""
    side = tree.forward if direction == "forward" else tree.backward
    child = next((c for c in side.children if c.token == token), None)
    if child is None or child.is_marker:
        raise NodeNotInTree(
            f"no {direction} branch {token!r} under root {' '.join(tree.root_phrase)!r}"
        )
    if direction == "forward":
        new_root = tree.root_phrase + (token,)
        new_sites = list(child.sites)
    else:
        new_root = (token,) + tree.root_phrase
        new_sites = [
            MatchSite(s.doc_id, s.sentence_index, s.position - 1) for s in child.sites
        ]
    return _build_from_sites(
        tree.corpus, new_root, new_sites, history=tree.history + (tree,),
        max_depth=tree.max_depth,
    )


def revert(tree: WordTree) -> WordTree:
    if not tree.history:
        raise AtInitialState("tree is at its initial state")
    return tree.history[-1]


def coverage(tree: WordTree) -> tuple[int, float]:
    """(distinct documents, percent of corpus to 1 decimal)."""
    n_docs = len(set(site.doc_id for site in tree.matched_sites))
    total = len(tree.corpus.documents)
    percent = round(100.0 * n_docs / total, 1) if total else 0.0
    return n_docs, percent


def document_filter(tree: WordTree) -> list[str]:
    """Distinct matched doc_ids in corpus order."""
    matched = set(site.doc_id for site in tree.matched_sites)
    return [doc_id for doc_id in tree.corpus.doc_ids() if doc_id in matched]


def node_gradient(
    node: TreeNode,
    predictions: Mapping[tuple[str, str], Prediction],
    variable: str,
) -> NodeGradient:
    docs = node.doc_ids()
    n_true = n_false = n_unknown = 0
    for doc_id in docs:
        cls = predictions[(doc_id, variable)].cls
        if cls is PredictedClass.TRUE:
            n_true += 1
        elif cls is PredictedClass.FALSE:
            n_false += 1
        else:
            n_unknown += 1
    n = len(docs)
    if n == 0:
        return NodeGradient(0.0, 0.0, 0.0, 0, 0, 0)
    return NodeGradient(n_true / n, n_false / n, n_unknown / n, n_true, n_false, n_unknown)


MIN_FONT_SCALE = 0.15


def font_scale(node: TreeNode, tree: WordTree) -> float:
    """Relative font size in [MIN_FONT_SCALE, 1], sqrt of the weight share."""
    root_weight = len(tree.matched_sites)
    if root_weight == 0 or node.weight <= 0:
        return MIN_FONT_SCALE
    scale = (node.weight / root_weight) ** 0.5
    return min(max(scale, MIN_FONT_SCALE), 1.0)


def _node_payload(
    node: TreeNode,
    predictions: Mapping[tuple[str, str], Prediction],
    variable: str,
) -> dict:
    gradient = node_gradient(node, predictions, variable)
    return {
        "token": node.token,
        "weight": node.weight,
        "docs": len(node.doc_ids()),
        "gradient": {
            "t": gradient.frac_true,
            "f": gradient.frac_false,
            "u": gradient.frac_unknown,
            "nt": gradient.n_true,
            "nf": gradient.n_false,
            "nu": gradient.n_unknown,
        },
        "children": [_node_payload(c, predictions, variable) for c in node.children],
    }


def tree_payload(
    tree: WordTree,
    predictions: Mapping[tuple[str, str], Prediction],
    variable: str,
) -> dict:
    n_docs, percent = coverage(tree)
    return {
        "root": list(tree.root_phrase),
        "coverage": {"docs": n_docs, "percent": percent},
        "forward": _node_payload(tree.forward, predictions, variable),
        "backward": _node_payload(tree.backward, predictions, variable),
    }

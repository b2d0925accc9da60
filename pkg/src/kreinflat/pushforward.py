"""Monomial feature maps and exact flattening of deep networks.

The monomial feature map phi sends u in R^n to the vector of all monomials
phi_i(u) = prod_j u_j^{i_j} indexed by multi-indices i.  Applying an entire
activation sigma(xi) = sum_k a_k xi^k to a weighted inner product pushes the
weights through phi:

    sigma(<u, .>_mu) = <phi(u), .>_{gamma o phi(mu)},
    gamma_i = multinomial(|i|; i) * a_{|i|}.

Composing this through a network of depth d yields, level by level, an
explicit (truncated) monomial space on which the network is a *flat* machine
f(x) = sum_i g_i v_i phi_i(x):

  * level 0 lives on the input coordinates;
  * level l >= 1 lives on slots (b, k) = (block in 0..H_{l-1}-1, index k of
    level l-1) -- the block structure of the replication vectors is kept
    explicit because pushed weight vectors differ per block;
  * at each level only degrees in the activation's coefficient support are
    stored (anything else has metric exactly zero), own degrees and composed
    input degrees are both capped by the truncation.

Index storage is flat numpy: packed (slot, exponent) term arrays per level,
plus per-index multinomials, metric values, composed input exponents and
per-block degree profiles.  A size guard (SizeLimitError) bounds the
materialized entry count; exact per-level counts are available cheaply via
level_counts() without enumerating anything.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import activations as act
from .errors import SizeLimitError

DEFAULT_TRUNCATION = 8
DEFAULT_MAX_ENTRIES = 200_000


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

def multinomial(exponents):
    """|i|! / prod_j i_j! as an exact integer."""
    total = 0
    denom = 1
    for e in exponents:
        if e < 0:
            raise ValueError("exponents must be nonnegative")
        total += e
        denom *= math.factorial(e)
    return math.factorial(total) // denom


class MultiIndex:
    """A sparse multi-index over ``n`` positions, graded-lex comparable."""

    __slots__ = ("n", "pairs")

    def __init__(self, n, pairs=()):
        norm = tuple(sorted((int(p), int(e)) for p, e in pairs if e != 0))
        for p, e in norm:
            if not 0 <= p < n:
                raise ValueError(f"position {p} out of range for n={n}")
            if e < 0:
                raise ValueError("exponents must be nonnegative")
        if len({p for p, _ in norm}) != len(norm):
            raise ValueError("duplicate positions")
        self.n = int(n)
        self.pairs = norm

    @classmethod
    def from_exponents(cls, exponents):
        exponents = tuple(int(e) for e in exponents)
        return cls(len(exponents), tuple((p, e) for p, e in enumerate(exponents) if e))

    @property
    def exponents(self):
        dense = [0] * self.n
        for p, e in self.pairs:
            dense[p] = e
        return tuple(dense)

    @property
    def degree(self):
        return sum(e for _, e in self.pairs)

    def _lex_cmp(self, other):
        # dense lexicographic comparison without materializing dense tuples
        ia = ib = 0
        pa, pb = self.pairs, other.pairs
        while ia < len(pa) or ib < len(pb):
            posa = pa[ia][0] if ia < len(pa) else self.n
            posb = pb[ib][0] if ib < len(pb) else other.n
            if posa == posb:
                ea, eb = pa[ia][1], pb[ib][1]
                if ea != eb:
                    return -1 if ea < eb else 1
                ia += 1
                ib += 1
            elif posa < posb:
                return 1  # self nonzero where other is zero
            else:
                return -1
        return 0

    def _cmp(self, other):
        if not isinstance(other, MultiIndex):
            return NotImplemented
        if self.n != other.n:
            raise ValueError("multi-indices over different dimensions")
        if self.degree != other.degree:
            return -1 if self.degree < other.degree else 1
        return self._lex_cmp(other)

    def __eq__(self, other):
        return (
            isinstance(other, MultiIndex)
            and self.n == other.n
            and self.pairs == other.pairs
        )

    def __hash__(self):
        return hash((self.n, self.pairs))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __repr__(self):
        return f"MultiIndex({self.n}, {self.pairs})"


def iter_exponents(n, max_degree):
    """Dense exponent tuples over n positions, graded-lex ascending."""
    def compositions(slots, total):
        if slots == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(slots - 1, total - first):
                yield (first,) + rest

    for total in range(max_degree + 1):
        yield from compositions(n, total)


# ---------------------------------------------------------------------------
# series vectors
# ---------------------------------------------------------------------------

class SeriesVector:
    """Real coefficients on monomial multi-indices of degree <= truncation.

    Anything not stored is exactly zero.  Vectors built on the same space
    (same plain (n, T) enumeration, or the same flattening level of the same
    architecture) are positionwise aligned, which is what flat_inner needs.
    """

    __slots__ = ("dimension", "truncation", "values", "_space", "_entries")

    def __init__(self, dimension, truncation, values, space):
        self.dimension = int(dimension)
        self.truncation = int(truncation)
        self.values = np.asarray(values, dtype=float)
        self._space = space
        self._entries = None

    def _keys(self):
        return self._space.keys()

    @property
    def entries(self):
        """dict MultiIndex -> value over the nonzero stored entries."""
        if self._entries is None:
            keys = self._keys()
            self._entries = {
                k: float(v) for k, v in zip(keys, self.values) if v != 0.0
            }
        return self._entries

    def value_at(self, index):
        if not isinstance(index, MultiIndex):
            index = MultiIndex.from_exponents(index)
        if index.degree > self.truncation or index.n != self.dimension:
            return 0.0
        return self.entries.get(index, 0.0)

    def aligned_with(self, other):
        return isinstance(other, SeriesVector) and self._space is other._space

    def stable_keys(self):
        """T-independent nested identities of the stored indices.

        Plain vectors: the dense exponent tuple.  Tower vectors: a nested
        tuple ((block, child identity), exponent), suitable for matching
        entries across different truncations.
        """
        return self._space.stable_keys()

    def composed_exponents(self):
        """Total input-coordinate exponents per stored index, shape (m, D)."""
        return self._space.composed_exponents()

    def tags(self):
        """Human-readable block-structure tag per stored index."""
        return self._space.tags()

    def __repr__(self):
        return (
            f"SeriesVector(dim={self.dimension}, trunc={self.truncation}, "
            f"stored={len(self.values)})"
        )


def flat_inner(metric, *vectors):
    """sum_i g_i * prod_v v_i over the shared index space."""
    if not vectors:
        raise ValueError("need at least one vector")
    for v in vectors:
        if not metric.aligned_with(v):
            raise ValueError("series vectors live on different spaces or truncations")
    prod = metric.values.copy()
    for v in vectors:
        prod *= v.values
    return float(np.sum(prod))


def flat_eval(weight_vec, feature_vec, metric_vec):
    """The flat machine value sum_i g_i v_i phi_i(x)."""
    return flat_inner(metric_vec, weight_vec, feature_vec)


# ---------------------------------------------------------------------------
# plain (dense) spaces: monomial features and push-forward weights on R^n
# ---------------------------------------------------------------------------

class _PlainSpace:
    __slots__ = ("n", "truncation", "exps", "_key_cache")

    def __init__(self, n, truncation):
        self.n = n
        self.truncation = truncation
        self.exps = np.array(list(iter_exponents(n, truncation)), dtype=np.int64)
        self._key_cache = None

    def keys(self):
        if self._key_cache is None:
            self._key_cache = [MultiIndex.from_exponents(tuple(e)) for e in self.exps]
        return self._key_cache

    def stable_keys(self):
        return [tuple(int(v) for v in e) for e in self.exps]

    def composed_exponents(self):
        return self.exps

    def tags(self):
        return ["-"] * len(self.exps)


@lru_cache(maxsize=128)
def _plain_space(n, truncation):
    count = sum(math.comb(n + k - 1, k) for k in range(truncation + 1))
    if count > DEFAULT_MAX_ENTRIES:
        raise SizeLimitError(
            f"{count} monomials for n={n}, truncation={truncation}",
            requested=count,
            limit=DEFAULT_MAX_ENTRIES,
        )
    return _PlainSpace(n, truncation)


def monomial_features(x, truncation):
    """phi(x): every monomial of x up to total degree ``truncation``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x must be a nonempty vector")
    space = _plain_space(x.size, int(truncation))
    vals = np.prod(x[None, :] ** space.exps, axis=1)
    return SeriesVector(x.size, truncation, vals, space)


def gamma_weights(spec, n, truncation):
    """The pushed metric on R^n: gamma_i = multinomial(|i|; i) * a_{|i|}."""
    space = _plain_space(int(n), int(truncation))
    degs = space.exps.sum(axis=1)
    coeff = {int(k): act.taylor_coefficient(spec, int(k)) for k in set(degs.tolist())}
    vals = np.array(
        [multinomial(e) * coeff[int(k)] for e, k in zip(space.exps.tolist(), degs)],
        dtype=float,
    )
    return SeriesVector(n, truncation, vals, space)


def pushforward_check(spec, vectors, mu, truncation):
    """(lhs, rhs) of the scalar push-forward identity for one activation.

    lhs = sigma(sum_j mu_j prod_v v_j); rhs re-assembles it from the pushed
    metric gamma o phi(mu) and the monomial features of every vector, up to
    the truncation degree.
    """
    mu = np.asarray(mu, dtype=float)
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if not vs:
        raise ValueError("need at least one vector")
    if any(v.shape != mu.shape for v in vs) or mu.ndim != 1:
        raise ValueError("mu and all vectors must share one dimension")
    inner = float(np.sum(mu * np.prod(np.stack(vs), axis=0)))
    lhs = act.evaluate(spec, inner)
    gamma = gamma_weights(spec, mu.size, truncation)
    feats = [monomial_features(v, truncation) for v in vs]
    rhs = flat_inner(gamma, monomial_features(mu, truncation), *feats)
    return lhs, rhs


# ---------------------------------------------------------------------------
# the flattening tower
# ---------------------------------------------------------------------------

class _Level:
    """One composition level: slots, stored indices, and their invariants."""

    __slots__ = (
        "level",
        "n_slots",
        "slot_block",
        "slot_prev",
        "input_dim",
        "terms_pos",
        "terms_exp",
        "own_degree",
        "composed_degree",
        "mnom",
        "gamma",
        "metric",
        "block_profile",
        "xexp",
        "pairs_list",
        "prev",
        "truncation",
        "_key_cache",
        "_stable_cache",
    )

    def keys(self):
        if self._key_cache is None:
            self._key_cache = [MultiIndex(self.n_slots, p) for p in self.pairs_list]
        return self._key_cache

    def _stable_slot(self, pos):
        if self.level == 0:
            return int(pos)
        prev_stable = self.prev.stable_keys()
        return (int(self.slot_block[pos]), prev_stable[int(self.slot_prev[pos])])

    def stable_keys(self):
        if self._stable_cache is None:
            if self.level == 0:
                self._stable_cache = [
                    tuple(int(v) for v in row) for row in self.xexp
                ]
            else:
                self._stable_cache = [
                    tuple(sorted((self._stable_slot(p), int(e)) for p, e in pairs))
                    for pairs in self.pairs_list
                ]
        return self._stable_cache

    def composed_exponents(self):
        return self.xexp

    def _tag(self, pairs):
        if self.level == 0:
            return "-"
        parts = []
        for pos, e in pairs:
            b = int(self.slot_block[pos])
            k = int(self.slot_prev[pos])
            inner = self.prev._tag(self.prev.pairs_list[k])
            piece = f"{b}:({inner})"
            if e > 1:
                piece += f"^{e}"
            parts.append(piece)
        return "*".join(parts) if parts else "1"

    def tags(self):
        if self.level == 0:
            out = []
            for pairs in self.pairs_list:
                if not pairs:
                    out.append("1")
                else:
                    out.append(
                        "*".join(
                            f"x{p}^{e}" if e > 1 else f"x{p}" for p, e in pairs
                        )
                    )
            return out
        return [self._tag(p) for p in self.pairs_list]

    def compose(self, slot_values):
        """prod over packed terms of slot_values[pos]**exp, vectorized."""
        padded = np.concatenate([np.asarray(slot_values, dtype=float), [1.0]])
        return np.prod(padded[self.terms_pos] ** self.terms_exp, axis=1)


class FlatSpace:
    """All levels of the truncated flat space for one architecture."""

    def __init__(self, arch, truncation, levels, max_entries):
        self.arch = arch
        self.truncation = truncation
        self.levels = levels
        self.max_entries = max_entries

    @property
    def top(self):
        return self.levels[-1]


def _support(spec, truncation):
    return [k for k in act.support_degrees(spec, truncation)]


def level_counts(arch, truncation):
    """Exact stored-index count per level, computed without enumeration.

    Dynamic program over (composed degree, own degree) using the multiset
    generating function of the slot histogram; used both by the size guard
    and by architecture generators that must stay desk-sized.
    """
    trunc = int(truncation)
    counts = []
    # histogram of composed degree over stored indices of the previous level
    hist = {1: arch.input_dim}  # level-0 "slots" are the D inputs, degree 1
    for q in range(arch.depth):
        supp = _support(arch.activations[q], trunc)
        if q > 0:
            hist = {cd: arch.widths[q - 1] * m for cd, m in hist.items()}
        max_own = max(supp) if supp else 0
        table = {(0, 0): 1}
        for cd, m in sorted(hist.items()):
            new = dict(table)
            for (t, k), ways in table.items():
                for e in range(1, max_own - k + 1):
                    t2 = t + e * cd
                    if t2 > trunc:
                        break
                    w = ways * math.comb(m + e - 1, e)
                    key = (t2, k + e)
                    new[key] = new.get(key, 0) + w
            table = new
        level_hist = {}
        for (t, k), ways in table.items():
            if k in supp:
                level_hist[t] = level_hist.get(t, 0) + ways
        counts.append(sum(level_hist.values()))
        hist = level_hist
    return counts


def _enumerate_indices(slot_cdeg, supp, trunc, limit):
    """Multisets over slots with own degree in supp and composed degree <= trunc.

    Slots are visited in ascending composed-degree order so budget overruns
    break the scan early; output is re-sorted into a canonical order.
    """
    n = len(slot_cdeg)
    supp_set = set(supp)
    if not supp_set:
        return []
    max_own = max(supp_set)
    order = sorted(range(n), key=lambda s: (slot_cdeg[s], s))
    cds = [slot_cdeg[s] for s in order]
    out = []
    if 0 in supp_set:
        out.append(((), 0, 0))

    def record(pairs, own, comp):
        out.append((tuple(sorted(pairs)), own, comp))
        if len(out) > limit:
            raise SizeLimitError(
                f"more than {limit} flat entries at one level",
                requested=len(out),
                limit=limit,
            )

    def rec(start, pairs, own, comp):
        for j in range(start, n):
            cd = cds[j]
            if comp + cd > trunc:
                break
            cap = max_own - own
            if cd > 0:
                cap = min(cap, (trunc - comp) // cd)
            pos = order[j]
            for e in range(1, cap + 1):
                new_own = own + e
                new_comp = comp + e * cd
                pairs.append((pos, e))
                if new_own in supp_set:
                    record(pairs, new_own, new_comp)
                if new_own < max_own:
                    rec(j + 1, pairs, new_own, new_comp)
                pairs.pop()

    if max_own > 0:
        rec(0, [], 0, 0)
    out.sort(key=lambda item: (item[1], item[0]))
    return out


def _pack_level(level_no, arch, prev, enumerated, trunc):
    lv = _Level.__new__(_Level)
    lv.level = level_no
    lv.prev = prev
    lv.truncation = trunc
    lv.input_dim = arch.input_dim
    lv._key_cache = None
    lv._stable_cache = None
    if level_no == 0:
        lv.n_slots = arch.input_dim
        lv.slot_block = None
        lv.slot_prev = None
        slot_cdeg = np.ones(arch.input_dim, dtype=np.int64)
        slot_xexp = np.eye(arch.input_dim, dtype=np.int64)
    else:
        h = arch.widths[level_no - 1]
        n_prev = len(prev.pairs_list)
        lv.n_slots = h * n_prev
        lv.slot_block = np.repeat(np.arange(h, dtype=np.int64), n_prev)
        lv.slot_prev = np.tile(np.arange(n_prev, dtype=np.int64), h)
        slot_cdeg = np.tile(prev.composed_degree, h)
        slot_xexp = np.tile(prev.xexp, (h, 1))

    pairs_list = [item[0] for item in enumerated]
    lv.pairs_list = pairs_list
    m = len(pairs_list)
    width = max((len(p) for p in pairs_list), default=1) or 1
    terms_pos = np.full((m, width), lv.n_slots, dtype=np.int64)  # pad slot
    terms_exp = np.zeros((m, width), dtype=np.int64)
    for row, pairs in enumerate(pairs_list):
        for col, (pos, e) in enumerate(pairs):
            terms_pos[row, col] = pos
            terms_exp[row, col] = e
    lv.terms_pos = terms_pos
    lv.terms_exp = terms_exp
    lv.own_degree = np.array([item[1] for item in enumerated], dtype=np.int64)
    lv.composed_degree = np.array([item[2] for item in enumerated], dtype=np.int64)
    lv.mnom = np.array(
        [float(multinomial([e for _, e in pairs])) for pairs in pairs_list]
    )
    coeff = {
        int(k): act.taylor_coefficient(arch.activations[level_no], int(k))
        for k in set(lv.own_degree.tolist())
    }
    lv.gamma = lv.mnom * np.array([coeff[int(k)] for k in lv.own_degree])

    # composed input exponents
    xexp = np.zeros((m, arch.input_dim), dtype=np.int64)
    padded_xexp = np.vstack([slot_xexp, np.zeros((1, arch.input_dim), dtype=np.int64)])
    for col in range(width):
        xexp += terms_exp[:, col : col + 1] * padded_xexp[terms_pos[:, col]]
    lv.xexp = xexp

    # per-block degree profile (weight generators need it above level 0)
    if level_no >= 1:
        h = arch.widths[level_no - 1]
        bp = np.zeros((m, h), dtype=np.int64)
        padded_block = np.concatenate([lv.slot_block, [0]])
        rows = np.arange(m)
        for col in range(width):
            blocks = padded_block[terms_pos[:, col]]
            np.add.at(bp, (rows, blocks), terms_exp[:, col])
        lv.block_profile = bp
    else:
        lv.block_profile = None

    # metric recursion: g = gamma o phi(previous metric replicated over blocks)
    if level_no == 0:
        lv.metric = lv.gamma.copy()
    else:
        slot_metric = np.tile(prev.metric, arch.widths[level_no - 1])
        lv.metric = lv.gamma * lv.compose(slot_metric)
    return lv


@lru_cache(maxsize=24)
def flat_space(arch, truncation, max_entries=DEFAULT_MAX_ENTRIES):
    """Build (and cache) the flattening tower for an architecture."""
    trunc = int(truncation)
    if trunc < 1:
        raise ValueError("truncation must be at least 1")
    counts = level_counts(arch, trunc)
    worst = max(counts)
    if worst > max_entries:
        raise SizeLimitError(
            f"flat space needs {worst} entries at one level "
            f"(limit {max_entries}); lower the truncation or the widths",
            requested=worst,
            limit=max_entries,
        )
    prev = None
    levels = []
    for q in range(arch.depth):
        if q == 0:
            slot_cdeg = [1] * arch.input_dim
        else:
            slot_cdeg = np.tile(prev.composed_degree, arch.widths[q - 1]).tolist()
        supp = _support(arch.activations[q], trunc)
        enumerated = _enumerate_indices(slot_cdeg, supp, trunc, max_entries)
        level = _pack_level(q, arch, prev, enumerated, trunc)
        if len(level.pairs_list) != counts[q]:
            raise AssertionError(
                f"enumeration produced {len(level.pairs_list)} indices, "
                f"count recursion said {counts[q]}"
            )
        levels.append(level)
        prev = level
    return FlatSpace(arch, trunc, levels, max_entries)


# ---------------------------------------------------------------------------
# the flat vectors
# ---------------------------------------------------------------------------

def _feature_values(space, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (space.arch.input_dim,):
        raise ValueError(f"input shape {x.shape} != ({space.arch.input_dim},)")
    vals = None
    out = []
    for level in space.levels:
        if level.level == 0:
            vals = np.prod(x[None, :] ** level.xexp, axis=1)
        else:
            vals = level.compose(np.tile(vals, space.arch.widths[level.level - 1]))
        out.append(vals)
    return out


def _wrap(space, level, values):
    return SeriesVector(level.n_slots, space.truncation, values, level)


def flatten_feature_map(
    arch, x, truncation=DEFAULT_TRUNCATION, *, level=None, max_entries=DEFAULT_MAX_ENTRIES
):
    """The composed feature map of the network at input x.

    Returns the top level by default; ``level=q`` returns the intermediate
    feature vector after q compositions (level 0 is phi restricted to the
    stored support of the first activation).
    """
    space = flat_space(arch, truncation, max_entries)
    values = _feature_values(space, x)
    pick = arch.depth - 1 if level is None else int(level)
    return _wrap(space, space.levels[pick], values[pick])


def feature_levels(arch, x, truncation=DEFAULT_TRUNCATION, max_entries=DEFAULT_MAX_ENTRIES):
    """Every intermediate feature vector, bottom to top."""
    space = flat_space(arch, truncation, max_entries)
    values = _feature_values(space, x)
    return [_wrap(space, lv, v) for lv, v in zip(space.levels, values)]


def flatten_metric(
    arch,
    truncation=DEFAULT_TRUNCATION,
    *,
    variant="krein",
    level=None,
    max_entries=DEFAULT_MAX_ENTRIES,
):
    """The flat metric of the network (variant "associated" takes |g|)."""
    if variant not in ("krein", "associated"):
        raise ValueError(f"unknown variant {variant!r}")
    space = flat_space(arch, truncation, max_entries)
    pick = arch.depth - 1 if level is None else int(level)
    lv = space.levels[pick]
    vals = np.abs(lv.metric) if variant == "associated" else lv.metric.copy()
    return _wrap(space, lv, vals)


def _weight_values(space, weights, q):
    """Values of the pushed weight vector of layer q on the top level."""
    arch = space.arch
    d = arch.depth
    levels = space.levels
    w = np.asarray(weights[q], dtype=float)
    if q == d - 1:
        # output layer: a single row, expanded directly on the top level
        top = levels[d - 1]
        if d == 1:
            vals = np.prod(w[0][None, :] ** top.xexp, axis=1)
        else:
            vals = np.prod(w[0][None, :] ** top.block_profile, axis=1)
        return vals
    # rows of W_q become per-block generator values on the slots of level q+1
    stack = levels[q + 1]
    if q == 0:
        base = levels[0].xexp  # exponents over input coordinates
    else:
        base = levels[q].block_profile  # exponents over previous blocks
    gen = np.prod(w[:, None, :] ** base[None, :, :], axis=2)  # (H_q, n_idx_q)
    vals = stack.compose(gen.reshape(-1))
    for lvl in range(q + 2, d):
        vals = levels[lvl].compose(np.tile(vals, arch.widths[lvl - 1]))
    return vals


def pushforward_weights(
    arch, weights, q, truncation=DEFAULT_TRUNCATION, max_entries=DEFAULT_MAX_ENTRIES
):
    """Layer q's weights pushed to the top of the flat space."""
    from .netcore import check_shapes

    check_shapes(arch, weights)
    if not 0 <= q < arch.depth:
        raise ValueError(f"layer {q} out of range")
    space = flat_space(arch, truncation, max_entries)
    return _wrap(space, space.top, _weight_values(space, weights, q))


def flat_weight(arch, weights, truncation=DEFAULT_TRUNCATION, max_entries=DEFAULT_MAX_ENTRIES):
    """The flat machine's weight vector: elementwise product over all layers."""
    from .netcore import check_shapes

    check_shapes(arch, weights)
    space = flat_space(arch, truncation, max_entries)
    vals = np.ones(len(space.top.pairs_list))
    for q in range(arch.depth):
        vals = vals * _weight_values(space, weights, q)
    return _wrap(space, space.top, vals)


# ---------------------------------------------------------------------------
# dumps
# ---------------------------------------------------------------------------

def dump_series(vec):
    """Deterministic text dump: exponents | block tag | value, graded-lex.

    One line per nonzero stored entry.  The exponent tuple is over the input
    coordinates (composed through all levels for tower vectors); the tag
    pins down which hierarchical index the line belongs to.
    """
    xexp = np.asarray(vec.composed_exponents())
    tags = vec.tags()
    rows = []
    for i, v in enumerate(vec.values):
        if v == 0.0:
            continue
        e = tuple(int(t) for t in xexp[i])
        rows.append((sum(e), e, tags[i], float(v)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = [
        " ".join(str(t) for t in e) + f" | {tag} | " + "%.17g" % v
        for _, e, tag, v in rows
    ]
    return "\n".join(lines) + ("\n" if lines else "")

"""LDPC coding: alist parity-check matrices, systematic encoding, sum-product
belief-propagation decoding, and frame packing with interleaving and padding.

LLR convention at the decoder interface matches the rest of the repo
(positive favors bit 1); internally messages use the classic log(p0/p1) sign.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

BUILTIN_CODE = "ldpc_n1024_r23.alist"
MESSAGE_CLIP = 20.0


class AlistFormatError(ValueError):
    """alist text violates the format or is internally inconsistent."""


# ---------------------------------------------------------------------------
# alist parsing / writing

def parse_alist(text):
    """Parse alist text into a dense uint8 parity-check matrix (checks x vars)."""
    tokens = text.split()
    pos = 0

    def take(count, what):
        nonlocal pos
        if pos + count > len(tokens):
            raise AlistFormatError(f"alist truncated while reading {what}")
        out = tokens[pos:pos + count]
        pos += count
        try:
            return [int(t) for t in out]
        except ValueError as exc:
            raise AlistFormatError(f"non-integer token in {what}: {exc}") from None

    n_vars, n_checks = take(2, "dimensions")
    if n_vars < 1 or n_checks < 1:
        raise AlistFormatError(f"bad dimensions {n_vars} x {n_checks}")
    max_col, max_row = take(2, "maximum degrees")
    col_deg = take(n_vars, "column degrees")
    row_deg = take(n_checks, "row degrees")
    if max(col_deg) > max_col or max(row_deg) > max_row:
        raise AlistFormatError("degree exceeds declared maximum")

    h = np.zeros((n_checks, n_vars), dtype=np.uint8)
    for v in range(n_vars):
        entries = take(col_deg[v], f"column {v} entries")
        # tolerate zero padding up to the declared maximum
        while pos < len(tokens) and len(entries) < max_col and tokens[pos] == "0":
            pos += 1
            entries.append(0)
        for c in entries:
            if c == 0:
                continue
            if not 1 <= c <= n_checks:
                raise AlistFormatError(f"column {v}: check index {c} out of range")
            h[c - 1, v] = 1
    for c in range(n_checks):
        entries = take(row_deg[c], f"row {c} entries")
        while pos < len(tokens) and len(entries) < max_row and tokens[pos] == "0":
            pos += 1
            entries.append(0)
        cols = [e - 1 for e in entries if e != 0]
        if any(not 0 <= v < n_vars for v in cols):
            raise AlistFormatError(f"row {c}: variable index out of range")
        if sorted(cols) != sorted(np.flatnonzero(h[c]).tolist()):
            raise AlistFormatError(f"row {c}: row list inconsistent with column lists")
    if pos != len(tokens):
        raise AlistFormatError(f"{len(tokens) - pos} unexpected trailing tokens")
    if (h.sum(axis=1) != np.asarray(row_deg)).any() or (h.sum(axis=0) != np.asarray(col_deg)).any():
        raise AlistFormatError("declared degrees inconsistent with entries")
    return h


def format_alist(h):
    """Render a dense parity-check matrix (checks x vars) as alist text."""
    h = np.asarray(h, dtype=np.uint8)
    n_checks, n_vars = h.shape
    col_deg = h.sum(axis=0).astype(int)
    row_deg = h.sum(axis=1).astype(int)
    max_col, max_row = int(col_deg.max()), int(row_deg.max())
    lines = [f"{n_vars} {n_checks}", f"{max_col} {max_row}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for v in range(n_vars):
        entries = (np.flatnonzero(h[:, v]) + 1).tolist()
        entries += [0] * (max_col - len(entries))
        lines.append(" ".join(map(str, entries)))
    for c in range(n_checks):
        entries = (np.flatnonzero(h[c]) + 1).tolist()
        entries += [0] * (max_row - len(entries))
        lines.append(" ".join(map(str, entries)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# GF(2) elimination for the systematic encoder

def _gf2_reduce(h):
    """Row-reduce over GF(2); returns (reduced rows, pivot column list)."""
    h = h.astype(np.uint8).copy()
    n_checks = h.shape[0]
    pivots = []
    row = 0
    for col in range(h.shape[1]):
        if row == n_checks:
            break
        hits = np.flatnonzero(h[row:, col])
        if hits.size == 0:
            continue
        swap = row + hits[0]
        if swap != row:
            h[[row, swap]] = h[[swap, row]]
        others = np.flatnonzero(h[:, col])
        others = others[others != row]
        h[others] ^= h[row]
        pivots.append(col)
        row += 1
    return h, pivots


@dataclass
class LdpcCode:
    """Parity-check matrix plus the derived systematic encoder structure."""

    h: np.ndarray  # (n_checks, n) uint8
    info_positions: np.ndarray = field(init=False)
    parity_positions: np.ndarray = field(init=False)
    _parity_gen: np.ndarray = field(init=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.uint8)
        reduced, pivots = _gf2_reduce(self.h)
        rank = len(pivots)
        self.parity_positions = np.asarray(pivots, dtype=int)
        self.info_positions = np.setdiff1d(np.arange(self.n), self.parity_positions)
        # reduced row r reads: c[pivot_r] = sum_j gen[r, j] * info_j
        self._parity_gen = reduced[:rank][:, self.info_positions]
        self._build_bp_tables()

    @property
    def n(self):
        return self.h.shape[1]

    @property
    def n_checks(self):
        return self.h.shape[0]

    @property
    def k(self):
        return self.info_positions.size

    @property
    def rank(self):
        return self.parity_positions.size

    @property
    def rate(self):
        return self.k / self.n

    @classmethod
    def from_alist(cls, path):
        with open(path, "r", encoding="ascii") as fh:
            return cls(parse_alist(fh.read()))

    def _build_bp_tables(self):
        checks, vars_ = np.nonzero(self.h)
        order = np.argsort(checks, kind="stable")
        self._edge_check = checks[order]
        self._edge_var = vars_[order]
        n_edges = self._edge_var.size
        deg = self.h.sum(axis=1).astype(int)
        dmax = int(deg.max())
        # slot matrix (n_checks, dmax) of edge ids, padded with the sentinel n_edges
        slots = np.full((self.n_checks, dmax), n_edges, dtype=int)
        starts = np.concatenate([[0], np.cumsum(deg)])
        for c in range(self.n_checks):
            slots[c, :deg[c]] = np.arange(starts[c], starts[c + 1])
        self._check_slots = slots
        self._slot_valid = slots < n_edges
        self._n_edges = n_edges

    def encode(self, info_bits):
        """Systematic encoding: info bits land on info_positions, H c = 0."""
        info_bits = np.asarray(info_bits, dtype=np.uint8)
        if info_bits.shape != (self.k,):
            raise ValueError(f"expected {self.k} information bits, got shape {info_bits.shape}")
        codeword = np.zeros(self.n, dtype=np.uint8)
        codeword[self.info_positions] = info_bits
        codeword[self.parity_positions] = (self._parity_gen @ info_bits) & 1
        return codeword

    def syndrome(self, bits):
        return (self.h @ np.asarray(bits, dtype=np.uint8)) & 1

    def extract_info(self, codeword_bits):
        return np.asarray(codeword_bits)[self.info_positions]


@dataclass
class DecodeResult:
    bits: np.ndarray  # hard decisions over the full codeword
    iterations: int
    converged: bool


def bp_decode(code: LdpcCode, llrs, max_iterations=40) -> DecodeResult:
    """Flooding-schedule sum-product decoding.

    Stops early once every parity check is satisfied; hard decisions are
    returned either way. Deterministic for a given input.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got shape {llrs.shape}")
    if not np.isfinite(llrs).all():
        raise ValueError("LLR input must be finite")
    mu = -llrs  # internal sign: log(p0/p1)
    ev, slots, valid = code._edge_var, code._check_slots, code._slot_valid
    n_edges = code._n_edges
    c2v = np.zeros(n_edges)

    def totals():
        return mu + np.bincount(ev, weights=c2v, minlength=code.n)

    def hard(tot):
        return (tot < 0).astype(np.uint8)

    bits = hard(totals())
    if not code.syndrome(bits).any():
        return DecodeResult(bits=bits, iterations=0, converged=True)

    for iteration in range(1, max_iterations + 1):
        v2c = totals()[ev] - c2v
        np.clip(v2c, -MESSAGE_CLIP, MESSAGE_CLIP, out=v2c)
        t = np.concatenate([np.tanh(0.5 * v2c), [1.0]])[slots]  # sentinel -> neutral 1
        # exclusive product per check via prefix/suffix scans
        pre = np.ones_like(t)
        np.cumprod(t[:, :-1], axis=1, out=pre[:, 1:])
        suf = np.ones_like(t)
        np.cumprod(t[:, :0:-1], axis=1, out=suf[:, -2::-1])
        prod = np.clip(pre * suf, -1.0 + 1e-15, 1.0 - 1e-15)
        c2v[slots[valid]] = np.clip(2.0 * np.arctanh(prod[valid]), -MESSAGE_CLIP, MESSAGE_CLIP)
        bits = hard(totals())
        if not code.syndrome(bits).any():
            return DecodeResult(bits=bits, iterations=iteration, converged=True)
    return DecodeResult(bits=bits, iterations=max_iterations, converged=False)


def bits_to_llrs(bits, magnitude=20.0):
    """Noiseless LLRs under the repo sign convention (positive = bit 1)."""
    return (2.0 * np.asarray(bits, dtype=np.float64) - 1.0) * magnitude


def load_builtin_code() -> LdpcCode:
    """The committed rate-2/3, length-1024 code."""
    ref = importlib.resources.files("ofdmlink") / "codes" / BUILTIN_CODE
    return LdpcCode(parse_alist(ref.read_text(encoding="ascii")))


# ---------------------------------------------------------------------------
# PEG-style code construction (used by the make-code command)

def peg_construct(n_vars, n_checks, var_degree=3, seed=0):
    """Progressive edge growth: connect each new edge to the check node
    farthest from the variable in the current Tanner graph (unreached checks
    first, ties broken by lowest degree then randomly)."""
    rng = np.random.default_rng(seed)
    var_adj = [[] for _ in range(n_vars)]
    check_adj = [[] for _ in range(n_checks)]
    check_deg = np.zeros(n_checks, dtype=int)

    def bfs_check_depths(root_var):
        depth = np.full(n_checks, -1, dtype=int)
        seen_vars = np.zeros(n_vars, dtype=bool)
        seen_vars[root_var] = True
        frontier = [root_var]
        level = 0
        while frontier:
            level += 1
            checks_next = set()
            for v in frontier:
                for c in var_adj[v]:
                    if depth[c] < 0:
                        depth[c] = level
                        checks_next.add(c)
            frontier = []
            for c in checks_next:
                for v in check_adj[c]:
                    if not seen_vars[v]:
                        seen_vars[v] = True
                        frontier.append(v)
        return depth

    def pick(candidates):
        degs = check_deg[candidates]
        best = candidates[degs == degs.min()]
        return int(best[rng.integers(best.size)])

    for v in range(n_vars):
        for _ in range(var_degree):
            if not var_adj[v]:
                chosen = pick(np.arange(n_checks))
            else:
                depth = bfs_check_depths(v)
                unreached = np.flatnonzero(depth < 0)
                if unreached.size:
                    chosen = pick(unreached)
                else:
                    chosen = pick(np.flatnonzero(depth == depth.max()))
            var_adj[v].append(chosen)
            check_adj[chosen].append(v)
            check_deg[chosen] += 1

    h = np.zeros((n_checks, n_vars), dtype=np.uint8)
    for v, checks in enumerate(var_adj):
        h[checks, v] = 1
    return h


# ---------------------------------------------------------------------------
# frame layout: codewords -> interleaved bit stream on data REs

class FrameLayoutError(ValueError):
    """Frame cannot hold the configured codewords."""


@dataclass
class FrameLayout:
    code: LdpcCode
    n_data_re: int
    bits_per_re: int
    codewords_per_frame: int = 3
    interleaver_seed: int = 0x1EAF

    def __post_init__(self):
        if self.padding_bits < 0:
            raise FrameLayoutError(
                f"{self.n_data_re} data REs x {self.bits_per_re} bits cannot hold "
                f"{self.codewords_per_frame} codewords of length {self.code.n}"
            )
        self.permutation = np.random.default_rng(self.interleaver_seed).permutation(self.n_bits)

    @property
    def n_bits(self):
        return self.n_data_re * self.bits_per_re

    @property
    def coded_bits(self):
        return self.codewords_per_frame * self.code.n

    @property
    def padding_bits(self):
        return self.n_bits - self.coded_bits

    @property
    def info_bits_per_frame(self):
        return self.codewords_per_frame * self.code.k


def frame_pack(info_bits, layout: FrameLayout, rng):
    """Encode, append random padding, interleave. info_bits: (codewords, k)."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.shape != (layout.codewords_per_frame, layout.code.k):
        raise ValueError(f"expected {(layout.codewords_per_frame, layout.code.k)} info bits, "
                         f"got {info_bits.shape}")
    coded = np.concatenate([layout.code.encode(row) for row in info_bits])
    padding = rng.integers(0, 2, size=layout.padding_bits, dtype=np.uint8)
    stream = np.concatenate([coded, padding])
    return stream[layout.permutation]


def frame_unpack(llrs, layout: FrameLayout):
    """Deinterleave received LLRs and split per codeword; padding discarded."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape != (layout.n_bits,):
        raise ValueError(f"expected {layout.n_bits} LLRs, got shape {llrs.shape}")
    stream = np.empty_like(llrs)
    stream[layout.permutation] = llrs
    return stream[:layout.coded_bits].reshape(layout.codewords_per_frame, layout.code.n)

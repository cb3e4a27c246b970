"""Span selection and the bipartite matching loss.

Each argument slot's representation is gated elementwise into a start and an
end selector; selectors score every text position by dot product. Decoding
takes the best-scoring candidate span, where position 0 (the start sentinel)
doubles as the empty span (0, 0). Training assigns golden spans to same-role
slots with the Hungarian algorithm and applies cross-entropy at the assigned
start/end positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from torch import nn

EMPTY_SPAN = (0, 0)


def make_selectors(h, w_start, w_end):
    """Elementwise-gate slot representations into start/end selectors."""
    if h.shape[-1] != w_start.shape[-1] or h.shape[-1] != w_end.shape[-1]:
        raise ValueError("width mismatch between slot representations and gates")
    return h * w_start, h * w_end


def span_logits(phi, h_text):
    """Score every text position against a selector: ``logit[l] = <H[l], phi>``."""
    return h_text @ phi.transpose(-1, -2) if phi.dim() > 1 else h_text @ phi


class SpanSelectorHead(nn.Module):
    """Owns the learnable start/end gate vectors."""

    def __init__(self, hidden_size: int):
        super().__init__()
        self.w_start = nn.Parameter(torch.ones(hidden_size))
        self.w_end = nn.Parameter(torch.ones(hidden_size))

    def selectors(self, h_slots):
        return make_selectors(h_slots, self.w_start, self.w_end)

    def logits(self, h_slots, h_text):
        """Start/end logits for every slot: two ``[slots x text]`` matrices."""
        phi_start, phi_end = self.selectors(h_slots)
        return span_logits(phi_start, h_text).T, span_logits(phi_end, h_text).T


@dataclass(frozen=True)
class SpanPrediction:
    start: int
    end: int
    score: float

    @property
    def is_empty(self) -> bool:
        return (self.start, self.end) == EMPTY_SPAN


def select_span(logit_start, logit_end, length=None, max_span_len=10,
                valid_starts=None, valid_ends=None) -> SpanPrediction:
    """Best span under ``score(l, m) = logit_start[l] + logit_end[m]``.

    Candidates are the empty span (0, 0) plus every pair with
    ``0 < m - l < max_span_len`` and ``l >= 1``; ``valid_starts``/
    ``valid_ends`` further restrict l and m (used to keep l on real text
    positions rather than markers or sentinels). Ties break toward smaller l,
    then smaller m, so the empty span wins any tie it is part of.
    """
    ls = np.asarray(logit_start, dtype=np.float64).reshape(-1)
    le = np.asarray(logit_end, dtype=np.float64).reshape(-1)
    n = len(ls) if length is None else min(length, len(ls))

    best = SpanPrediction(0, 0, float(ls[0] + le[0]))
    start_ok = np.zeros(n, dtype=bool)
    start_ok[1:] = True
    if valid_starts is not None:
        mask = np.zeros(n, dtype=bool)
        mask[[p for p in valid_starts if p < n]] = True
        start_ok &= mask
    end_ok = np.ones(n, dtype=bool)
    if valid_ends is not None:
        mask = np.zeros(n, dtype=bool)
        mask[[p for p in valid_ends if p < n]] = True
        end_ok = mask

    scores = ls[:n, None] + le[None, :n]
    offset = np.arange(n)[None, :] - np.arange(n)[:, None]
    valid = (offset > 0) & (offset < max_span_len) & start_ok[:, None] & end_ok[None, :]
    if valid.any():
        top = scores[valid].max()
        if top > best.score:
            l, m = np.argwhere(valid & (scores == top))[0]
            best = SpanPrediction(int(l), int(m), float(top))
    return best


def hungarian_assign(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square cost matrix.

    Returns the assigned column for each row. The caller pads golden-span
    columns with empty-span columns up to the slot count, so columns at or
    beyond the golden count mean "assigned the empty span".
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square after padding, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], dtype=int)
    out[rows] = cols
    return out


def assign_golden_spans(start_logits, end_logits, slot_roles, golden_by_role,
                        cost_mode="logit") -> list[tuple[int, int]]:
    """Assign golden spans to slots, per role group, minimizing total cost.

    ``slot_roles`` lists each slot's role; ``golden_by_role`` maps a role to
    its golden (start, end) subword spans. Slots of one role compete for that
    role's spans; slots beyond the golden count receive the empty span. When
    a role has more golden spans than slots, the lowest-cost subset is kept.
    """
    with torch.no_grad():
        if cost_mode == "logit":
            s_np = start_logits.detach().cpu().numpy()
            e_np = end_logits.detach().cpu().numpy()
        elif cost_mode == "prob":
            s_np = torch.log_softmax(start_logits, dim=-1).cpu().numpy()
            e_np = torch.log_softmax(end_logits, dim=-1).cpu().numpy()
        else:
            raise ValueError(f"unknown cost_mode {cost_mode!r}")

    assignment: list[tuple[int, int]] = [EMPTY_SPAN] * len(slot_roles)
    groups: dict[str, list[int]] = {}
    for k, role in enumerate(slot_roles):
        groups.setdefault(role, []).append(k)
    for role, slot_idx in groups.items():
        golds = list(golden_by_role.get(role, ()))
        if not golds:
            continue
        n = len(slot_idx)
        spans = golds + [EMPTY_SPAN] * max(0, n - len(golds))
        cost = np.empty((n, len(spans)))
        for i, k in enumerate(slot_idx):
            for j, (s, e) in enumerate(spans):
                cost[i, j] = -(s_np[k][s] + e_np[k][e])
        if len(spans) == n:
            cols = hungarian_assign(cost)
        else:
            # more golden spans than slots: optimal subset, extras unassigned
            rows, cols_r = linear_sum_assignment(cost)
            cols = np.full(n, -1, dtype=int)
            cols[rows] = cols_r
        for i, k in enumerate(slot_idx):
            if cols[i] >= 0:
                assignment[k] = spans[cols[i]]
    return assignment


def bipartite_loss(start_logits, end_logits, assignment) -> torch.Tensor:
    """Sum of start/end cross-entropies at the assigned golden positions."""
    n_slots, length = start_logits.shape
    if len(assignment) != n_slots:
        raise ValueError("assignment must cover every slot")
    if n_slots == 0:
        return start_logits.sum() * 0.0
    for s, e in assignment:
        if not (0 <= s < length and 0 <= e < length):
            raise ValueError(f"assigned span ({s}, {e}) out of range for length {length}")
    log_p_start = torch.log_softmax(start_logits, dim=-1)
    log_p_end = torch.log_softmax(end_logits, dim=-1)
    idx = torch.as_tensor(assignment, dtype=torch.long)
    picked = (log_p_start.gather(1, idx[:, :1]).squeeze(1)
              + log_p_end.gather(1, idx[:, 1:]).squeeze(1))
    return -picked.sum()

"""Brute-force reference implementations used to cross-check the package.

Everything here is written as plain Python loops, straight from the metric
and policy definitions. Nothing imports the vectorized production code, so
a shared bug would have to be introduced twice independently. The decoy
formula is deliberately a frozen copy, not an import.
"""

import math
import random

from streameval.timeline import EmissionLog


# -- string helpers ------------------------------------------------------------


def naive_lcp(a, b):
    out = []
    for x, y in zip(a, b):
        if x != y:
            break
        out.append(x)
    return out


def naive_lcp_many(seqs):
    seqs = list(seqs)
    prefix = list(seqs[0])
    for seq in seqs[1:]:
        prefix = naive_lcp(prefix, seq)
    return prefix


# -- latency metrics as definitional sums ----------------------------------------


def al_oracle(delays, total_ms, step=None):
    """AL = (1/tau) * sum_{j<=tau} (d_j - (j-1)*step), tau = first full-source j."""
    n = len(delays)
    step = total_ms / n if step is None else step
    tau = n
    for j, d in enumerate(delays, start=1):
        if d >= total_ms - 1e-6:
            tau = j
            break
    acc = 0.0
    for j in range(1, tau + 1):
        acc += delays[j - 1] - (j - 1) * step
    return acc / tau, tau


def laal_oracle(delays, total_ms, n_ref):
    step = total_ms / max(len(delays), n_ref)
    return al_oracle(delays, total_ms, step)[0]


def ap_oracle(delays, total_ms):
    return sum(delays) / (len(delays) * total_ms)


def dal_oracle(delays, total_ms):
    n = len(delays)
    step = total_ms / n
    g_prev = None
    acc = 0.0
    for j, d in enumerate(delays, start=1):
        g = d if g_prev is None else max(d, g_prev + step)
        acc += g - (j - 1) * step
        g_prev = g
    return acc / n


def source_ends_oracle(total_ms, segment_ms=300.0):
    count = math.ceil(total_ms / segment_ms)
    return [min(i * segment_ms, total_ms) for i in range(1, count + 1)]


def speech_piece_ends_oracle(start_ms, duration_ms, segment_ms=300.0):
    count = math.ceil(duration_ms / segment_ms)
    return [start_ms + min(i * segment_ms, duration_ms) for i in range(1, count + 1)]


def atd_oracle(source_ends, target_ends):
    """Mean end-time difference under the capped one-to-one pairing."""
    acc = 0.0
    for j, end in enumerate(target_ends, start=1):
        partner = min(j, len(source_ends))
        acc += end - source_ends[partner - 1]
    return acc / len(target_ends)


def atd_from_delays_oracle(delays, total_ms, segment_ms=300.0):
    return atd_oracle(source_ends_oracle(total_ms, segment_ms), list(delays))


def offsets_oracle(delays, total_ms):
    return delays[0], delays[-1] - total_ms


# -- policy rules as plain loops -------------------------------------------------


def alignatt_round_oracle(tokens, attention_rows, frames, committed, f, eos="</s>"):
    """One non-final emission round: scan new tokens in order, stop at the
    first frame-margin violation or at EOS. Returns (emitted, stopped,
    reason, alignment_of_stopper)."""
    emitted = []
    for row in range(len(committed), len(tokens)):
        if tokens[row] == eos:
            return emitted, True, "eos", None
        best_frame, best_weight = 1, None
        for col in range(frames):
            w = attention_rows[row][col]
            if best_weight is None or w > best_weight:
                best_weight = w
                best_frame = col + 1
        if best_frame > frames - f:
            return emitted, True, "violation", best_frame
        emitted.append(tokens[row])
    return emitted, False, None, None


def la_replay_oracle(hypotheses, n):
    """Replay LA-n over per-boundary hypotheses; the last one is final.

    Returns the list of per-boundary newly-committed token lists.
    """
    committed = []
    window = []
    commits = []
    for i, hyp in enumerate(hypotheses):
        is_final = i == len(hypotheses) - 1
        window.append(list(hyp))
        if len(window) > n:
            window.pop(0)
        if is_final:
            newly = list(hyp[len(committed):])
        elif len(window) < n:
            newly = []
        else:
            agreed = naive_lcp_many(window)
            newly = agreed[len(committed):]
        committed.extend(newly)
        commits.append(newly)
    return commits


def la_session_oracle(ends, tokens, total_frames, instability, seed,
                      boundary_frames, n):
    """Whole-session LA-n replay with prefix-constrained decoding.

    Each boundary decode replays the committed prefix verbatim and fills the
    suffix from the toy rule, exactly like the constrained agent does.
    """
    committed = []
    window = []
    commits = []
    for i, f in enumerate(boundary_frames):
        fresh = toy_hypothesis_oracle(
            ends, tokens, total_frames, instability, seed, f
        )
        hyp = committed + fresh[len(committed):]
        window.append(hyp)
        if len(window) > n:
            window.pop(0)
        if i == len(boundary_frames) - 1:
            newly = hyp[len(committed):]
        elif len(window) < n:
            newly = []
        else:
            newly = naive_lcp_many(window)[len(committed):]
        committed = committed + newly
        commits.append(newly)
    return commits


def decoy_oracle(token, seed, index):
    # frozen copy of the decoy scheme; must never be imported from the package
    return f"{token}~{(seed * 31 + index * 7) % 100:02d}"


def toy_hypothesis_oracle(ends, tokens, total_frames, instability, seed, frames):
    """Token list the toy agent should produce after `frames` frames."""
    f = min(frames, total_frames)
    out = [tok for end, tok in zip(ends, tokens) if end <= f]
    if instability > 0 and f < total_frames:
        for pos in range(max(0, len(out) - instability), len(out)):
            if ends[pos] > f - instability:
                out[pos] = decoy_oracle(tokens[pos], seed, pos)
    return out


# -- random generators -----------------------------------------------------------


def random_finalized_log(rng: random.Random):
    """Finalized log with <= 6 tokens, T <= 3000 ms, grouped into commits."""
    total_ms = rng.uniform(400.0, 3000.0)
    n_tokens = rng.randint(1, 6)
    delays = sorted(rng.uniform(1.0, total_ms) for _ in range(n_tokens))
    log = EmissionLog(source_duration_ms=total_ms,
                      reference_tokens=[f"r{i}" for i in range(rng.randint(1, 8))])
    idx = 0
    wall = 0.0
    counter = 0
    while idx < n_tokens:
        size = min(rng.randint(1, 3), n_tokens - idx)
        ideal = delays[idx + size - 1]
        wall = max(wall, ideal) + rng.uniform(0.0, 120.0)
        log.record_commit([f"t{counter + k}" for k in range(size)], ideal, wall)
        idx += size
        counter += size
    log.finalize(total_ms)
    return log


def random_toy_layout(rng: random.Random):
    """Random span table; the last span end is pinned to the source end so a
    final-boundary commit always happens."""
    total = rng.randint(12, 48)
    ends = []
    e = rng.randint(1, 3)
    while e < total:
        ends.append(e)
        e += rng.randint(1, 5)
    ends.append(total)
    tokens = [f"w{i:02d}" for i in range(len(ends))]
    return ends, tokens, total

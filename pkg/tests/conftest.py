"""Shared test helpers: an instant-witness labelling oracle and cached
experiment runs used by the acceptance suite."""

from windnbm.scada import SECONDS_PER_DAY


def label_oracle(episodes, failures, cfg):
    """Classify episodes against failures from first principles.

    Works on instant membership predicates rather than interval-overlap
    algebra: an episode supports a window if some integer instant lies in
    both. For integer intervals a witness exists iff max(starts) satisfies
    both predicates, but this checks a candidate set of all endpoints and
    neighbours to stay assumption-free.
    """
    day = SECONDS_PER_DAY
    windows = []
    for f in failures:
        windows.append(
            {
                "turbine_id": f.turbine_id,
                "w_lo": f.failure_time - cfg.window_days * day,
                "w_hi": f.failure_time - cfg.lead_days * day,  # exclusive
                "z_lo": f.failure_time - cfg.lead_days * day,
                "z_hi": f.failure_time + cfg.blackout_days * day,  # inclusive
            }
        )

    def any_witness(ep, lo, hi_exclusive=None, hi_inclusive=None):
        candidates = {ep.start, ep.end, lo}
        if hi_exclusive is not None:
            candidates |= {hi_exclusive - 1, hi_exclusive}
        if hi_inclusive is not None:
            candidates |= {hi_inclusive, hi_inclusive + 1}
        for t in candidates:
            in_episode = ep.start <= t <= ep.end
            if hi_exclusive is not None:
                in_zone = lo <= t < hi_exclusive
            else:
                in_zone = lo <= t <= hi_inclusive
            if in_episode and in_zone:
                return True
        return False

    detected = [False] * len(windows)
    fp = 0
    for ep in episodes:
        supported = False
        for i, w in enumerate(windows):
            if w["turbine_id"] != ep.turbine_id:
                continue
            if any_witness(ep, w["w_lo"], hi_exclusive=w["w_hi"]):
                detected[i] = True
                supported = True
        if supported:
            continue
        ignored = any(
            w["turbine_id"] == ep.turbine_id
            and any_witness(ep, w["z_lo"], hi_inclusive=w["z_hi"])
            for w in windows
        )
        if not ignored:
            fp += 1
    tp = sum(detected)
    return tp, fp, len(windows) - tp

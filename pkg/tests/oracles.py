"""Independent reference implementations used as test oracles."""
import random

from sec_bot.rl import LearnerConfig, QTable, sarsa_lambda_update, select_action

CHAIN_STATES = 3
CHAIN_ACTIONS = 2  # 0 = left, 1 = right
CHAIN_GOAL_REWARD = 10.0
CHAIN_STEP_REWARD = -1.0
CHAIN_MAX_STEPS = 100


def chain_step(s, a):
    """Right from the last state ends the episode; left from state 0 stays put."""
    if a == 1 and s == CHAIN_STATES - 1:
        return CHAIN_GOAL_REWARD, None
    return CHAIN_STEP_REWARD, (s + 1 if a == 1 else max(0, s - 1))


def chain_with_library(episodes, seed, cfg):
    q = QTable(CHAIN_STATES, CHAIN_ACTIONS, bucket_counts=(CHAIN_STATES, 1, 1, 1))
    rng = random.Random(seed)
    for _ in range(episodes):
        q.traces.clear()
        s = 0
        a = select_action(q, s, cfg.epsilon, rng).ordinal
        for _ in range(CHAIN_MAX_STEPS):
            r, s2 = chain_step(s, a)
            if s2 is None:
                sarsa_lambda_update(q, s, a, r, None, None, cfg)
                break
            a2 = select_action(q, s2, cfg.epsilon, rng).ordinal
            sarsa_lambda_update(q, s, a, r, s2, a2, cfg)
            s, a = s2, a2
    return q


def chain_oracle(episodes, seed, cfg):
    """Step-by-step replay written from the update rule alone, on plain dicts."""
    Q = {(s, a): 0.0 for s in range(CHAIN_STATES) for a in range(CHAIN_ACTIONS)}
    rng = random.Random(seed)

    def choose(s):
        if cfg.epsilon > 0 and rng.random() < cfg.epsilon:
            return rng.randrange(CHAIN_ACTIONS)
        best = 0
        for a in range(1, CHAIN_ACTIONS):
            if Q[(s, a)] > Q[(s, best)]:
                best = a
        return best

    for _ in range(episodes):
        E = {}
        s = 0
        a = choose(s)
        for _ in range(CHAIN_MAX_STEPS):
            r, s2 = chain_step(s, a)
            a2 = None if s2 is None else choose(s2)
            target = r if s2 is None else r + cfg.gamma * Q[(s2, a2)]
            delta = target - Q[(s, a)]
            E[(s, a)] = 1.0
            for key in list(E):
                Q[key] += cfg.alpha * delta * E[key]
                E[key] *= cfg.gamma * cfg.lam
                if E[key] < 1e-8:
                    del E[key]
            if s2 is None:
                break
            s, a = s2, a2
    return Q


def balancer_oracle(incidents, n_milestones, threshold):
    """Index after each incident plus final counters, from the transition rules."""
    idx, kdd = 0, 0
    up = down = clear = 0
    trajectory = []
    for inc in incidents:
        if inc == "kill":
            kdd += 1
            if kdd > threshold:
                if idx > 0:
                    idx -= 1
                    down += 1
                else:
                    clear += 1
        else:
            kdd -= 1
            if kdd < -threshold and idx < n_milestones - 1:
                idx += 1
                up += 1
        trajectory.append(idx)
    return trajectory, (up, down, clear)


def interval_bucket(value, edges):
    bucket = 0
    for e in edges:
        if value >= e:
            bucket += 1
    return bucket


def sector_bucket(angle, sectors):
    width = 360.0 / sectors
    for k in range(sectors):
        lo = k * width - width / 2
        if (angle - lo) % 360.0 < width:
            return k
    raise AssertionError("angle fell outside every sector")


DEFAULT_CFG = LearnerConfig(alpha=0.1, gamma=0.9, lam=0.9, epsilon=0.2)

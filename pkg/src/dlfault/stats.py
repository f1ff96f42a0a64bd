"""Effect size, significance test, and the mutant-kill decision.

The significance test is a Gaussian-family identity-link GLM of accuracy on a
binary group indicator; the Wald test of the group coefficient reduces to the
pooled two-sample t-test, so that is what gets computed (Student-t CDF via the
regularized incomplete beta function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import TooFewSamples

DEFAULT_ALPHA = 0.2
DEFAULT_BETA = 0.05

# Stand-in for an infinite effect size when the pooled s.d. is 0 but the
# means differ.
EFFECT_SIZE_SENTINEL = 1e9


@dataclass(frozen=True)
class KillVerdict:
    killed: bool
    effect_size: float
    p_value: float
    mutant_worse: bool

    def to_dict(self):
        return {
            "killed": self.killed,
            "effect_size": self.effect_size,
            "p_value": self.p_value,
            "mutant_worse": self.mutant_worse,
        }


def _check(samples, name, min_n=2):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < min_n:
        raise TooFewSamples(f"{name}: need >= {min_n} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise TooFewSamples(f"{name}: samples must be finite")
    return x


def _pooled_sd(a, b):
    na, nb = a.size, b.size
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    return math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))


def cohens_d(a, b) -> float:
    """Standardized mean difference (pooled s.d.), sign = mean(a) - mean(b)."""
    a = _check(a, "a")
    b = _check(b, "b")
    diff = a.mean() - b.mean()
    sp = _pooled_sd(a, b)
    if sp == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(EFFECT_SIZE_SENTINEL, diff)
    return float(diff / sp)


def glm_p_value(a, b) -> float:
    """Two-sided p-value of the group coefficient (= pooled t-test p-value)."""
    a = _check(a, "a")
    b = _check(b, "b")
    na, nb = a.size, b.size
    if na + nb < 3:
        raise TooFewSamples("need n_a + n_b >= 3")
    diff = a.mean() - b.mean()
    sp = _pooled_sd(a, b)
    if sp == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    t = diff / (sp * math.sqrt(1.0 / na + 1.0 / nb))
    if t == 0.0:
        return 1.0
    df = na + nb - 2
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def is_kill(orig, mut, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> KillVerdict:
    """Kill decision: large-enough effect, significant, and mutant worse.

    The effect size is oriented so that a worse mutant yields a positive d.
    """
    orig_arr = _check(orig, "orig")
    mut_arr = _check(mut, "mut")
    d = cohens_d(orig_arr, mut_arr)
    p = glm_p_value(orig_arr, mut_arr)
    worse = bool(mut_arr.mean() < orig_arr.mean())
    killed = bool(d >= beta and p < alpha and worse)
    return KillVerdict(killed=killed, effect_size=float(d), p_value=float(p), mutant_worse=worse)

"""Statistical toolkit: z-test, one-way ANOVA, Tukey HSD, chi-square with
continuity-corrected standardized residuals, and the discretizers used by
the trajectory and network stages.

All functions are pure and reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ZTestResult:
    z_abs: float
    p_two_sided: float


@dataclass(frozen=True)
class AnovaResult:
    f: float
    df_between: int
    df_within: int
    ms_between: float
    ms_within: float
    undefined: bool = False


@dataclass(frozen=True)
class TukeyResult:
    q_critical: float
    critical_difference: float
    #: (i, j, |mean_i - mean_j|, significant)
    pairs: tuple[tuple[int, int, float, bool], ...]


@dataclass(frozen=True)
class ChiSquareResult:
    chi2: float
    df: int
    expected: np.ndarray
    #: continuity-corrected standardized residuals, (|O - E| - 0.5) / sqrt(E)
    residuals: np.ndarray


def normal_sf(z: float) -> float:
    """Upper-tail probability of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def two_sample_z(
    mean1: float, mean2: float, sigma: float, n1: int, n2: int
) -> ZTestResult:
    """|Z| for the difference of two sample means with known population sd."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be >= 1")
    z = abs(mean1 - mean2) / (sigma * math.sqrt(1.0 / n1 + 1.0 / n2))
    return ZTestResult(z_abs=z, p_two_sided=min(1.0, 2.0 * normal_sf(z)))


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Between/within mean-square ratio over two or more samples."""
    if len(groups) < 2:
        raise ValueError("ANOVA needs at least 2 groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(a.size == 0 for a in arrays):
        raise ValueError("every group needs at least 1 observation")
    n_total = sum(a.size for a in arrays)
    g = len(arrays)
    df_between = g - 1
    df_within = n_total - g
    if df_within < 1:
        raise ValueError("total within degrees of freedom must be >= 1")
    grand = sum(a.sum() for a in arrays) / n_total
    ss_between = sum(a.size * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(((a - a.mean()) ** 2).sum() for a in arrays)
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0 and ms_between == 0.0:
        return AnovaResult(math.nan, df_between, df_within, 0.0, 0.0, undefined=True)
    if ms_within == 0.0:
        return AnovaResult(math.inf, df_between, df_within, ms_between, 0.0)
    return AnovaResult(ms_between / ms_within, df_between, df_within, ms_between, ms_within)


# Studentized range quantiles q(alpha; n_groups, df) for n_groups = 2..10.
# df keys ascend; lookups round df DOWN to the nearest tabulated value,
# which overstates q and keeps decisions conservative.
_Q_DF_GRID = (
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20,
    24, 30, 40, 60, 120, math.inf,
)

_Q_TABLE = {
    0.05: (
        (17.9693, 26.9755, 32.8187, 37.0815, 40.4076, 43.1186, 45.3973, 47.3566, 49.0710),
        (6.0849, 8.3308, 9.7980, 10.8811, 11.7343, 12.4349, 13.0273, 13.5390, 13.9885),
        (4.5007, 5.9096, 6.8245, 7.5017, 8.0371, 8.4783, 8.8525, 9.1766, 9.4620),
        (3.9265, 5.0402, 5.7571, 6.2870, 6.7064, 7.0526, 7.3465, 7.6015, 7.8263),
        (3.6354, 4.6017, 5.2183, 5.6731, 6.0329, 6.3299, 6.5823, 6.8014, 6.9947),
        (3.4605, 4.3392, 4.8956, 5.3049, 5.6284, 5.8953, 6.1222, 6.3192, 6.4931),
        (3.3441, 4.1649, 4.6813, 5.0601, 5.3591, 5.6057, 5.8153, 5.9973, 6.1579),
        (3.2612, 4.0410, 4.5288, 4.8858, 5.1672, 5.3991, 5.5962, 5.7673, 5.9183),
        (3.1992, 3.9485, 4.4149, 4.7554, 5.0235, 5.2444, 5.4319, 5.5947, 5.7384),
        (3.1511, 3.8768, 4.3266, 4.6543, 4.9120, 5.1242, 5.3042, 5.4605, 5.5984),
        (3.1127, 3.8196, 4.2561, 4.5736, 4.8230, 5.0281, 5.2021, 5.3531, 5.4863),
        (3.0813, 3.7729, 4.1987, 4.5077, 4.7502, 4.9496, 5.1187, 5.2653, 5.3946),
        (3.0552, 3.7341, 4.1509, 4.4529, 4.6897, 4.8842, 5.0491, 5.1921, 5.3181),
        (3.0332, 3.7014, 4.1105, 4.4066, 4.6385, 4.8290, 4.9903, 5.1301, 5.2534),
        (3.0143, 3.6734, 4.0760, 4.3670, 4.5947, 4.7816, 4.9399, 5.0770, 5.1979),
        (2.9980, 3.6491, 4.0461, 4.3327, 4.5568, 4.7406, 4.8962, 5.0310, 5.1498),
        (2.9837, 3.6280, 4.0200, 4.3027, 4.5237, 4.7048, 4.8580, 4.9907, 5.1077),
        (2.9712, 3.6093, 3.9970, 4.2763, 4.4944, 4.6731, 4.8243, 4.9552, 5.0705),
        (2.9600, 3.5927, 3.9766, 4.2528, 4.4685, 4.6450, 4.7944, 4.9236, 5.0375),
        (2.9500, 3.5779, 3.9583, 4.2319, 4.4452, 4.6199, 4.7676, 4.8954, 5.0079),
        (2.9188, 3.5317, 3.9013, 4.1663, 4.3727, 4.5413, 4.6838, 4.8069, 4.9152),
        (2.8882, 3.4864, 3.8454, 4.1021, 4.3015, 4.4642, 4.6014, 4.7199, 4.8241),
        (2.8582, 3.4421, 3.7907, 4.0391, 4.2316, 4.3885, 4.5205, 4.6345, 4.7345),
        (2.8288, 3.3987, 3.7371, 3.9774, 4.1632, 4.3141, 4.4411, 4.5504, 4.6463),
        (2.8000, 3.3561, 3.6846, 3.9169, 4.0960, 4.2412, 4.3630, 4.4678, 4.5595),
        (2.7718, 3.3145, 3.6332, 3.8577, 4.0301, 4.1696, 4.2863, 4.3865, 4.4741),
    ),
    0.01: (
        (90.0242, 135.0407, 164.2577, 185.5753, 202.2097, 215.7691, 227.1663, 236.9662, 245.5416),
        (14.0358, 19.0189, 22.2937, 24.7172, 26.6290, 28.2006, 29.5301, 30.6794, 31.6894),
        (8.2603, 10.6185, 12.1695, 13.3243, 14.2407, 14.9978, 15.6410, 16.1990, 16.6908),
        (6.5112, 8.1198, 9.1729, 9.9583, 10.5832, 11.1009, 11.5418, 11.9251, 12.2637),
        (5.7023, 6.9757, 7.8042, 8.4215, 8.9131, 9.3209, 9.6687, 9.9715, 10.2393),
        (5.2431, 6.3305, 7.0333, 7.5560, 7.9723, 8.3177, 8.6125, 8.8693, 9.0966),
        (4.9490, 5.9193, 6.5424, 7.0050, 7.3730, 7.6784, 7.9390, 8.1662, 8.3674),
        (4.7452, 5.6354, 6.2038, 6.6248, 6.9594, 7.2369, 7.4738, 7.6803, 7.8632),
        (4.5960, 5.4280, 5.9567, 6.3473, 6.6574, 6.9145, 7.1339, 7.3251, 7.4945),
        (4.4820, 5.2702, 5.7686, 6.1361, 6.4275, 6.6690, 6.8749, 7.0544, 7.2133),
        (4.3923, 5.1460, 5.6208, 5.9701, 6.2468, 6.4759, 6.6713, 6.8414, 6.9921),
        (4.3198, 5.0459, 5.5016, 5.8363, 6.1011, 6.3202, 6.5069, 6.6696, 6.8136),
        (4.2600, 4.9635, 5.4036, 5.7262, 5.9812, 6.1920, 6.3717, 6.5280, 6.6664),
        (4.2099, 4.8945, 5.3215, 5.6340, 5.8808, 6.0847, 6.2583, 6.4095, 6.5432),
        (4.1673, 4.8359, 5.2518, 5.5558, 5.7956, 5.9936, 6.1621, 6.3087, 6.4384),
        (4.1306, 4.7855, 5.1919, 5.4885, 5.7223, 5.9152, 6.0793, 6.2221, 6.3483),
        (4.0987, 4.7418, 5.1399, 5.4301, 5.6586, 5.8471, 6.0074, 6.1468, 6.2700),
        (4.0707, 4.7034, 5.0942, 5.3788, 5.6028, 5.7874, 5.9443, 6.0807, 6.2013),
        (4.0460, 4.6694, 5.0539, 5.3336, 5.5535, 5.7346, 5.8886, 6.0223, 6.1406),
        (4.0239, 4.6392, 5.0180, 5.2933, 5.5095, 5.6876, 5.8389, 5.9703, 6.0865),
        (3.9555, 4.5456, 4.9068, 5.1684, 5.3735, 5.5420, 5.6850, 5.8092, 5.9187),
        (3.8891, 4.4549, 4.7992, 5.0476, 5.2418, 5.4012, 5.5361, 5.6531, 5.7563),
        (3.8247, 4.3672, 4.6951, 4.9308, 5.1145, 5.2648, 5.3920, 5.5020, 5.5989),
        (3.7622, 4.2822, 4.5944, 4.8178, 4.9913, 5.1330, 5.2525, 5.3558, 5.4466),
        (3.7016, 4.1999, 4.4970, 4.7085, 4.8722, 5.0055, 5.1176, 5.2143, 5.2992),
        (3.6428, 4.1203, 4.4028, 4.6028, 4.7570, 4.8822, 4.9872, 5.0775, 5.1566),
    ),
}


def studentized_range_q(alpha: float, n_groups: int, df: int) -> float:
    """Tabulated upper quantile of the studentized range distribution."""
    if alpha not in _Q_TABLE:
        raise ValueError(f"alpha must be one of {sorted(_Q_TABLE)}, got {alpha}")
    if not 2 <= n_groups <= 10:
        raise ValueError(f"n_groups must be in 2..10, got {n_groups}")
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    rows = _Q_TABLE[alpha]
    row_idx = 0
    for i, tab_df in enumerate(_Q_DF_GRID):
        if tab_df <= df:
            row_idx = i
    return rows[row_idx][n_groups - 2]


def tukey_hsd(groups: Sequence[Sequence[float]], alpha: float = 0.05) -> TukeyResult:
    """Pairwise mean comparisons after a one-way ANOVA.

    A pair is significant when its absolute mean difference exceeds
    q(alpha; g, df_within) * sqrt(MS_within / n).  Unbalanced designs use
    the harmonic mean of the group sizes for n.
    """
    anova = one_way_anova(groups)
    g = len(groups)
    sizes = [len(grp) for grp in groups]
    n_h = g / sum(1.0 / n for n in sizes)
    q = studentized_range_q(alpha, g, anova.df_within)
    ms_w = anova.ms_within if not anova.undefined else 0.0
    critical = q * math.sqrt(ms_w / n_h)
    means = [float(np.mean(np.asarray(grp, dtype=float))) for grp in groups]
    pairs = []
    for i in range(g):
        for j in range(i + 1, g):
            diff = abs(means[i] - means[j])
            pairs.append((i, j, diff, diff > critical))
    return TukeyResult(q_critical=q, critical_difference=critical, pairs=tuple(pairs))


def chi_square(counts) -> ChiSquareResult:
    """Chi-square test of independence on an r x c contingency table.

    Residuals use the continuity-corrected standardized form
    (|O - E| - 0.5) / sqrt(E).
    """
    obs = np.asarray(counts, dtype=float)
    if obs.ndim != 2:
        raise ValueError("contingency table must be 2-dimensional")
    if np.any(obs < 0):
        raise ValueError("counts must be nonnegative")
    row = obs.sum(axis=1)
    col = obs.sum(axis=0)
    total = obs.sum()
    if total <= 0:
        raise ValueError("table total must be positive")
    if np.any(row == 0) or np.any(col == 0):
        raise ValueError("every row and column margin must be positive")
    expected = np.outer(row, col) / total
    chi2 = float(((obs - expected) ** 2 / expected).sum())
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    residuals = (np.abs(obs - expected) - 0.5) / np.sqrt(expected)
    return ChiSquareResult(chi2=chi2, df=df, expected=expected, residuals=residuals)


def discretize(
    values: Sequence[float],
    mode: str,
    bins: int,
    labels: Sequence[str] | None = None,
) -> list:
    """Bin values by equal width or equal frequency.

    Equal width splits [min, max] into ``bins`` equal intervals, right-closed
    at the max.  Equal frequency cuts at empirical quantiles; values tied
    with a boundary go to the upper bin.  Returns 0-based bin indices, or
    ``labels[index]`` when labels are given.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if mode not in ("equal_width", "equal_frequency"):
        raise ValueError(f"mode must be 'equal_width' or 'equal_frequency', got {mode!r}")
    if labels is not None and len(labels) != bins:
        raise ValueError("labels must have one entry per bin")
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return []
    if mode == "equal_width":
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            idx = np.zeros(x.size, dtype=int)  # degenerate single-bin case
        else:
            width = (hi - lo) / bins
            idx = np.minimum((x - lo) // width, bins - 1).astype(int)
    else:
        distinct = np.unique(x)
        if distinct.size < 2:
            raise ValueError("equal_frequency needs at least 2 distinct values")
        cuts = np.quantile(x, [i / bins for i in range(1, bins)])
        idx = np.zeros(x.size, dtype=int)
        for c in cuts:
            idx += x >= c
    if labels is None:
        return [int(i) for i in idx]
    return [labels[i] for i in idx]


def equal_width_boundaries(values: Sequence[float], bins: int) -> list[float]:
    """Interior cut points of the equal-width binning of ``values``."""
    x = np.asarray(values, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    width = (hi - lo) / bins
    return [lo + i * width for i in range(1, bins)]

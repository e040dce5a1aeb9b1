"""
Stats Service for morphdiv
Diversity, convergence, unit-cost transport distance, frequency binning,
corpus comparison, correlation, quadratic fits and kernel densities
"""

import logging
import math
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from app.exceptions import PatternTypeError, StatisticsError
from app.models.distribution import SENTINEL_KEYS, ConditionalPatternDistribution
from app.models.patterns import NULL_KEY, OTHER_KEY, Outcome, PatternOccurrence, PatternType, TargetPathPattern
from app.models.schemas import (
    AggregateSummary,
    BinnedSeries,
    DensityCurve,
    FrequencyBin,
    OutcomeBreakdown,
    PatternComparison,
    PatternInventory,
    PatternProfile,
    QuadraticFit,
)

# Configure logging
logger = logging.getLogger(__name__)

CI_Z = 1.96
KDE_POINTS = 256
KDE_MARGIN = 3.0

DistributionOrOccurrences = Union[ConditionalPatternDistribution, Iterable[PatternOccurrence]]


class StatsService:
    """Service for distributional metrics over conditional pattern distributions"""

    def build_distribution(self, occurrences: Iterable[PatternOccurrence], scope: str = "o2o",
                           long_path_threshold: Optional[int] = None) -> ConditionalPatternDistribution:
        """
        Count outcomes per source pattern

        Args:
            occurrences: Occurrences of a single pattern type
            scope: "o2o" keeps convergent/divergent outcomes only, "all" also keeps NULL and OTHER
            long_path_threshold: Bucket target paths longer than this

        Returns:
            ConditionalPatternDistribution
        """
        if scope not in ("o2o", "all"):
            raise ValueError(f"Unknown scope {scope!r}")
        dist = ConditionalPatternDistribution(scope=scope)
        for occurrence in occurrences:
            if dist.pattern_type is None:
                dist.pattern_type = occurrence.pattern_type
            elif occurrence.pattern_type != dist.pattern_type:
                raise PatternTypeError("Occurrences mix word-based and arc-based patterns")
            if scope == "o2o" and occurrence.outcome in (Outcome.NULL, Outcome.OTHER):
                continue
            dist.add(occurrence.source_key, occurrence.outcome_key(long_path_threshold))
        return dist

    def pattern_diversity(self, dist: ConditionalPatternDistribution, pattern: str, log_base: float = 2.0) -> float:
        """Entropy of the outcomes of one source pattern"""
        counts = [n for n in dist.outcomes(pattern).values() if n > 0]
        if not counts:
            raise StatisticsError(f"Pattern {pattern} is not in the distribution")
        return float(stats.entropy(counts, base=log_base))

    def aggregate_diversity(self, dist: ConditionalPatternDistribution, log_base: float = 2.0) -> float:
        """Frequency-weighted mean of per-pattern entropies, H(Q|P)"""
        totals = {p: n for p, n in dist.totals().items() if n > 0}
        grand_total = sum(totals.values())
        if grand_total == 0:
            raise StatisticsError("Aggregate diversity of an empty distribution")
        return sum(
            (n / grand_total) * self.pattern_diversity(dist, pattern, log_base)
            for pattern, n in sorted(totals.items())
        )

    def convergence_rate(self, dist: DistributionOrOccurrences, pattern: Optional[str] = None,
                         denominator: str = "o2o") -> float:
        """
        Share of convergent outcomes

        Args:
            dist: Distribution, or occurrences to count directly
            pattern: Source pattern key; None for the corpus aggregate
            denominator: "o2o" counts convergent and divergent outcomes, "all" adds NULL and OTHER

        Returns:
            Rate in [0, 1]
        """
        convergent, total = self._convergence_counts(dist, pattern, denominator)
        if total == 0:
            raise StatisticsError("Convergence rate with an empty denominator")
        return convergent / total

    def divergence_rate(self, dist: DistributionOrOccurrences, pattern: Optional[str] = None,
                        denominator: str = "o2o") -> float:
        """Share of divergent outcomes; complements the convergence rate under the o2o denominator"""
        dist = self._as_distribution(dist)
        patterns = [pattern] if pattern is not None else dist.patterns()
        divergent = 0
        for key in patterns:
            divergent += sum(
                n for outcome, n in dist.outcomes(key).items()
                if outcome != key and outcome not in SENTINEL_KEYS
            )
        _, total = self._convergence_counts(dist, pattern, denominator)
        if total == 0:
            raise StatisticsError("Divergence rate with an empty denominator")
        return divergent / total

    def wasserstein_unit(self, dist_a: Mapping[str, float], dist_b: Mapping[str, float]) -> float:
        """
        Optimal transport cost between two discrete distributions under a 0/1 cost matrix

        Computed in closed form as total variation, half the L1 distance over the
        union of supports. Inputs may be counts or probabilities.

        Args:
            dist_a: Outcome -> mass
            dist_b: Outcome -> mass

        Returns:
            Distance in [0, 1]; 1 when only one side has mass
        """
        total_a = float(sum(dist_a.values()))
        total_b = float(sum(dist_b.values()))
        if total_a <= 0 and total_b <= 0:
            raise StatisticsError("Both distributions are empty")
        if total_a <= 0 or total_b <= 0:
            return 1.0
        keys = sorted(set(dist_a) | set(dist_b))
        a = np.array([dist_a.get(k, 0.0) for k in keys], dtype=float) / total_a
        b = np.array([dist_b.get(k, 0.0) for k in keys], dtype=float) / total_b
        return float(min(1.0, 0.5 * np.abs(a - b).sum()))

    def pattern_wasserstein(self, dist_a: ConditionalPatternDistribution, dist_b: ConditionalPatternDistribution,
                            pattern: str) -> float:
        """Unit-cost distance between the conditionals of one pattern in two corpora"""
        return self.wasserstein_unit(dist_a.outcomes(pattern), dist_b.outcomes(pattern))

    def bin_wd_by_frequency(self, dist_ht: ConditionalPatternDistribution, dist_mt: ConditionalPatternDistribution,
                            bin_width: float = 0.5, bin_edges: Optional[Sequence[float]] = None,
                            frequency_source: str = "ht") -> BinnedSeries:
        """
        Mean per-pattern distance in log10-frequency bins with 95% normal CIs

        Args:
            dist_ht: Reference distribution
            dist_mt: Compared distribution
            bin_width: Width of the default bins in log10 units
            bin_edges: Explicit log10 edges overriding bin_width
            frequency_source: "ht" uses reference counts, "pooled" sums both corpora

        Returns:
            BinnedSeries; empty bins carry count 0 and no mean
        """
        if frequency_source == "ht":
            patterns = [p for p in dist_ht.patterns() if dist_ht.pattern_total(p) > 0]
            freqs = [dist_ht.pattern_total(p) for p in patterns]
        elif frequency_source == "pooled":
            patterns = sorted(set(dist_ht.patterns()) | set(dist_mt.patterns()))
            freqs = [dist_ht.pattern_total(p) + dist_mt.pattern_total(p) for p in patterns]
        else:
            raise ValueError(f"Unknown frequency source {frequency_source!r}")

        if not patterns:
            return BinnedSeries(frequency_source=frequency_source, bins=[])

        log_freq = np.log10(np.array(freqs, dtype=float))
        wd = np.array([self.pattern_wasserstein(dist_ht, dist_mt, p) for p in patterns])

        if bin_edges is not None:
            edges = np.asarray(bin_edges, dtype=float)
        else:
            lower = math.floor(log_freq.min() / bin_width) * bin_width
            n_bins = int(math.floor((log_freq.max() - lower) / bin_width + 1e-9)) + 1
            edges = lower + bin_width * np.arange(n_bins + 1)

        assignment = np.searchsorted(edges, log_freq, side="right") - 1
        outside = int(np.sum((assignment < 0) | (assignment >= len(edges) - 1)))
        if outside:
            logger.warning(f"{outside} patterns fall outside the configured frequency bins")

        bins = []
        for i in range(len(edges) - 1):
            values = wd[assignment == i]
            n = int(values.size)
            if n == 0:
                bins.append(FrequencyBin(lower=float(edges[i]), upper=float(edges[i + 1]), count=0))
                continue
            half_width = CI_Z * float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
            bins.append(FrequencyBin(
                lower=float(edges[i]),
                upper=float(edges[i + 1]),
                count=n,
                mean=float(np.mean(values)),
                half_width=half_width,
                degenerate=n == 1,
            ))
        return BinnedSeries(frequency_source=frequency_source, bins=bins)

    def compare_corpora(self, dist_a: ConditionalPatternDistribution, dist_b: ConditionalPatternDistribution,
                        min_freq: int = 1000, log_base: float = 2.0, denominator: str = "o2o") -> List[PatternComparison]:
        """
        Per-pattern diversity and convergence differences between two corpora

        Args:
            dist_a: Reference corpus
            dist_b: Compared corpus
            min_freq: Minimum frequency of a pattern in corpus A
            log_base: Entropy base
            denominator: Convergence-rate denominator

        Returns:
            Records sorted by descending frequency, then pattern key
        """
        if min_freq < 1:
            raise ValueError("min_freq must be at least 1")
        records = []
        for pattern in dist_a.patterns():
            freq = dist_a.pattern_total(pattern)
            if freq < min_freq:
                continue
            freq_b = dist_b.pattern_total(pattern)
            diversity_a = self.pattern_diversity(dist_a, pattern, log_base)
            diversity_b = self.pattern_diversity(dist_b, pattern, log_base) if freq_b > 0 else None
            rel_diff = None
            if diversity_b is not None and diversity_a > 0:
                rel_diff = (diversity_b - diversity_a) / diversity_a
            convergence_a = self._optional_rate(dist_a, pattern, denominator)
            convergence_b = self._optional_rate(dist_b, pattern, denominator)
            abs_diff = None
            if convergence_a is not None and convergence_b is not None:
                abs_diff = convergence_b - convergence_a
            records.append(PatternComparison(
                pattern=pattern,
                freq=freq,
                freq_b=freq_b,
                diversity_a=diversity_a,
                diversity_b=diversity_b,
                diversity_rel_diff=rel_diff,
                convergence_a=convergence_a,
                convergence_b=convergence_b,
                convergence_abs_diff=abs_diff,
                wd=self.pattern_wasserstein(dist_a, dist_b, pattern),
            ))
        records.sort(key=lambda r: (-r.freq, r.pattern))
        return records

    def pearson(self, x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
        """Sample correlation with its two-sided t-test p-value"""
        x_arr, y_arr = self._paired(x, y)
        if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
            raise StatisticsError("Pearson correlation needs nonzero variance in both series")
        r, p_value = stats.pearsonr(x_arr, y_arr)
        return float(r), float(p_value)

    def kendall_tau(self, x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
        """
        Tau-b with tie correction

        The p-value uses the normal approximation z = 3 tau sqrt(n(n-1)) / sqrt(2(2n+5)).
        """
        x_arr, y_arr = self._paired(x, y)
        if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
            raise StatisticsError("Kendall tau is undefined for an all-tied series")
        tau, _ = stats.kendalltau(x_arr, y_arr, variant="b")
        tau = float(tau)
        n = x_arr.size
        z = 3.0 * tau * math.sqrt(n * (n - 1)) / math.sqrt(2.0 * (2 * n + 5))
        p_value = float(2.0 * stats.norm.sf(abs(z)))
        return tau, min(1.0, p_value)

    def quadratic_fit(self, x: Sequence[float], y: Sequence[float]) -> QuadraticFit:
        """Least-squares parabola y = a x^2 + b x + c and its vertex"""
        x_arr = np.asarray(x, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        if x_arr.shape != y_arr.shape:
            raise StatisticsError("x and y differ in length")
        if np.unique(x_arr).size < 3:
            raise StatisticsError("Quadratic fit needs at least 3 distinct x values")
        a, b, c = np.polyfit(x_arr, y_arr, 2)
        vertex = float(-b / (2.0 * a)) if abs(a) > 1e-12 else None
        return QuadraticFit(a=float(a), b=float(b), c=float(c), vertex=vertex)

    def kde(self, values: Sequence[float], bandwidth: Optional[float] = None) -> DensityCurve:
        """
        Gaussian kernel density sampled on an even grid

        Args:
            values: Sample, at least two values
            bandwidth: Kernel standard deviation; defaults to 1.06 * sd * n^(-1/5)

        Returns:
            DensityCurve over the data range widened by three bandwidths, or a point mass
        """
        data = np.asarray(values, dtype=float)
        if data.size < 2:
            raise StatisticsError("Density estimation needs at least 2 values")
        if np.ptp(data) == 0:
            logger.warning("All values are equal; reporting a point mass")
            return DensityCurve(point_mass=float(data[0]))
        sd = float(np.std(data, ddof=1))
        factor = bandwidth / sd if bandwidth is not None else 1.06 * data.size ** (-1.0 / 5.0)
        kernel = stats.gaussian_kde(data, bw_method=factor)
        h = factor * sd
        grid = np.linspace(data.min() - KDE_MARGIN * h, data.max() + KDE_MARGIN * h, KDE_POINTS)
        return DensityCurve(x=grid.tolist(), y=kernel(grid).tolist(), bandwidth=h)

    def pattern_inventory(self, dist: ConditionalPatternDistribution) -> PatternInventory:
        """Distinct source patterns and distinct target patterns; arc paths counted orientation-free"""
        sources = [p for p in dist.patterns() if dist.pattern_total(p) > 0]
        targets = set()
        for pattern in sources:
            for outcome in dist.outcomes(pattern):
                if outcome in SENTINEL_KEYS:
                    continue
                if dist.pattern_type is PatternType.ARC:
                    targets.add(TargetPathPattern.from_key(outcome).canonical_key())
                else:
                    targets.add(outcome)
        return PatternInventory(distinct_source=len(sources), distinct_target=len(targets))

    def aggregate_summary(self, dist: ConditionalPatternDistribution, log_base: float = 2.0,
                          denominator: str = "o2o") -> AggregateSummary:
        """Diversity, convergence and inventory sizes of one distribution"""
        inventory = self.pattern_inventory(dist)
        summary = AggregateSummary(
            occurrences=dist.total,
            patterns=inventory.distinct_source,
            distinct_source=inventory.distinct_source,
            distinct_target=inventory.distinct_target,
        )
        if dist.total == 0:
            return summary
        summary.diversity = self.aggregate_diversity(dist, log_base)
        convergent, total = self._convergence_counts(dist, None, denominator)
        if total > 0:
            summary.convergence_rate = convergent / total
            summary.divergence_rate = self.divergence_rate(dist, None, denominator)
        return summary

    @staticmethod
    def relative_change(a: Optional[float], b: Optional[float]) -> Optional[float]:
        """Percentage change from a to b; None when a is zero or either side is missing"""
        if a is None or b is None or a == 0:
            return None
        return 100.0 * (b - a) / a

    def pattern_profile(self, dist: ConditionalPatternDistribution, top_n: Optional[int] = None,
                        log_base: float = 2.0, denominator: str = "o2o") -> List[PatternProfile]:
        """Frequency, diversity and convergence of the most frequent source patterns"""
        totals = sorted(((n, p) for p, n in dist.totals().items() if n > 0), key=lambda item: (-item[0], item[1]))
        if top_n is not None:
            totals = totals[:top_n]
        return [
            PatternProfile(
                pattern=pattern,
                freq=n,
                diversity=self.pattern_diversity(dist, pattern, log_base),
                convergence_rate=self._optional_rate(dist, pattern, denominator),
            )
            for n, pattern in totals
        ]

    def outcome_breakdown(self, dist: ConditionalPatternDistribution, pattern: str) -> OutcomeBreakdown:
        """Four-way outcome percentages of one pattern from an all-outcome distribution"""
        outcomes = dist.outcomes(pattern)
        total = sum(outcomes.values())
        if total == 0:
            raise StatisticsError(f"Pattern {pattern} was never observed")
        convergent = outcomes.get(pattern, 0)
        null = outcomes.get(NULL_KEY, 0)
        other = outcomes.get(OTHER_KEY, 0)
        divergent = total - convergent - null - other
        return OutcomeBreakdown(
            pattern=pattern,
            total=total,
            o2o_conv=100.0 * convergent / total,
            o2o_div=100.0 * divergent / total,
            null=100.0 * null / total,
            others=100.0 * other / total,
        )

    def _convergence_counts(self, dist: DistributionOrOccurrences, pattern: Optional[str],
                            denominator: str) -> Tuple[int, int]:
        if denominator not in ("o2o", "all"):
            raise ValueError(f"Unknown denominator {denominator!r}")
        dist = self._as_distribution(dist)
        patterns = [pattern] if pattern is not None else dist.patterns()
        convergent = sum(dist.convergent_count(p) for p in patterns)
        if denominator == "o2o":
            total = sum(dist.o2o_total(p) for p in patterns)
        else:
            total = sum(dist.pattern_total(p) for p in patterns)
        return convergent, total

    def _optional_rate(self, dist: ConditionalPatternDistribution, pattern: str, denominator: str) -> Optional[float]:
        convergent, total = self._convergence_counts(dist, pattern, denominator)
        return convergent / total if total else None

    def _as_distribution(self, dist: DistributionOrOccurrences) -> ConditionalPatternDistribution:
        if isinstance(dist, ConditionalPatternDistribution):
            return dist
        return self.build_distribution(dist, scope="all")

    @staticmethod
    def _paired(x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        x_arr = np.asarray(x, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        if x_arr.shape != y_arr.shape:
            raise StatisticsError(f"Series lengths differ ({x_arr.size} vs {y_arr.size})")
        if x_arr.size < 3:
            raise StatisticsError("Correlation needs at least 3 points")
        return x_arr, y_arr


# Global stats service instance
stats_service = StatsService()

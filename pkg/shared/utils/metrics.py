"""
Prometheus metrics collection for GeoWeight
Counts local fits, degenerate windows, bandwidth evaluations and simulations
"""

import logging
from typing import Optional

from prometheus_client import CollectorRegistry, Counter, Histogram, Info, write_to_textfile

logger = logging.getLogger(__name__)


class GWMetrics:
    """Centralized metrics collection for GeoWeight runs"""

    def __init__(self, service_name: str, registry: Optional[CollectorRegistry] = None):
        self.service_name = service_name
        self.registry = registry or CollectorRegistry()

        # Local model metrics
        self.local_fits_total = Counter(
            'geoweight_local_fits_total',
            'Total number of local (per-location) model calibrations',
            ['model'],
            registry=self.registry
        )

        self.degenerate_windows_total = Counter(
            'geoweight_degenerate_windows_total',
            'Calibration windows that were singular or had zero weight',
            ['model'],
            registry=self.registry
        )

        # Bandwidth search metrics
        self.bandwidth_evaluations_total = Counter(
            'geoweight_bandwidth_evaluations_total',
            'Bandwidth objective evaluations',
            ['objective'],
            registry=self.registry
        )

        # Monte Carlo metrics
        self.simulations_total = Counter(
            'geoweight_simulations_total',
            'Monte Carlo permutation simulations completed',
            ['test'],
            registry=self.registry
        )

        self.run_duration = Histogram(
            'geoweight_run_duration_seconds',
            'Command line run duration in seconds',
            ['subcommand'],
            registry=self.registry
        )

        self.info = Info('geoweight', 'GeoWeight service information', registry=self.registry)
        self.info.info({
            'service': service_name,
            'version': '1.0.0'
        })

    def record_local_fits(self, model: str, count: int, degenerate: int = 0):
        """Record a batch of local calibrations"""
        if count > 0:
            self.local_fits_total.labels(model=model).inc(count)
        if degenerate > 0:
            self.degenerate_windows_total.labels(model=model).inc(degenerate)

    def record_bandwidth_evaluation(self, objective: str):
        """Record one bandwidth objective evaluation"""
        self.bandwidth_evaluations_total.labels(objective=objective).inc()

    def record_simulation(self, test: str):
        """Record one completed Monte Carlo simulation"""
        self.simulations_total.labels(test=test).inc()

    def observe_run(self, subcommand: str, duration: float):
        """Record CLI run duration"""
        self.run_duration.labels(subcommand=subcommand).observe(duration)

    def write_textfile(self, path: str):
        """Write all metrics in Prometheus text format"""
        write_to_textfile(path, self.registry)
        logger.info(f"Metrics written to {path}")


# Global metrics instance
gw_metrics: Optional[GWMetrics] = None


def get_metrics() -> GWMetrics:
    """Get or create the process metrics instance"""
    global gw_metrics
    if gw_metrics is None:
        gw_metrics = GWMetrics('geoweight')
    return gw_metrics

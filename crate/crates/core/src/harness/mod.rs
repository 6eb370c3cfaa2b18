//! Scenario configuration, the experiment runner, sweeps and plot output.

mod runner;
mod scenario;
mod sweep;
mod udp;

pub use runner::{derive_seed, registry_for, run, run_with_seed, source_slots, RunCounters, RunResult, SummaryReport};
pub use scenario::{
    load_scenario, reference_infra_pair, CameraConfig, ConfigError, CrashRule, Scenario, SensorSpec, TrackConfig,
    DEFAULT_DURATION, DEFAULT_TIMESTEP, INFRASTRUCTURE_LATENCY, INFRASTRUCTURE_RATE, ONBOARD_LATENCY, ONBOARD_RATE,
};
pub use sweep::{
    emit_plot_data, format_plot, parse_plot, plot_rows, run_metrics, sweep, sweep_seed, sweep_with, MetricCell,
    PlotRow, SweepAxis, SweepError, SweepRow, SweepSpec, SweepTable,
};
pub use udp::{run_udp, UdpOptions};

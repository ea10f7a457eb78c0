//! Flow-series ingestion, normalization, sliding windows, splits, and the
//! synthetic diffusion generator used for desk-scale experiments.

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, SpatialGraph};
use crate::io;
use crate::tensor::{DenseMatrix, DenseTensor3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fs;
use std::ops::Range;
use std::path::Path;

/// Multivariate sensor series: rows are time steps, columns sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    values: DenseMatrix,
}

impl FlowSeries {
    pub fn new(values: DenseMatrix) -> Result<FlowSeries> {
        if !values.is_finite() {
            return Err(Error::usage("flow series contains non-finite values".to_string()));
        }
        Ok(FlowSeries { values })
    }

    pub fn n_steps(&self) -> usize {
        self.values.rows()
    }

    pub fn n_sensors(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn get(&self, step: usize, sensor: usize) -> f64 {
        self.values.get(step, sensor)
    }

    /// Copy of the step range `[start, end)`.
    pub fn slice_steps(&self, range: Range<usize>) -> FlowSeries {
        let values = DenseMatrix::from_fn(range.len(), self.n_sensors(), |i, j| {
            self.values.get(range.start + i, j)
        });
        FlowSeries { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowFormat {
    Csv,
    SttBinary,
}

/// Load a flow file. CSV rows are time steps with comma-separated sensor
/// values and an optional header row; the binary form is the `STF1`
/// container.
pub fn load_flow(path: &Path, format: FlowFormat) -> Result<FlowSeries> {
    match format {
        FlowFormat::SttBinary => FlowSeries::new(io::read_flow_binary(path)?),
        FlowFormat::Csv => load_flow_csv(path),
    }
}

fn load_flow_csv(path: &Path) -> Result<FlowSeries> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(&name, 0, format!("cannot read: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(&name, line_no, format!("non-numeric cell `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::format(&name, line_no, format!("non-finite cell `{f}`")));
            }
            row.push(v);
        }
        if width == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::format(
                &name,
                line_no,
                format!("ragged row: {} cells, expected {width}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(Error::format(&name, 0, "no data rows".to_string()));
    }
    let n_steps = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    FlowSeries::new(DenseMatrix::from_vec(n_steps, width, data))
}

pub fn save_flow(series: &FlowSeries, path: &Path, format: FlowFormat) -> Result<()> {
    match format {
        FlowFormat::SttBinary => io::write_flow_binary(series.values(), path),
        FlowFormat::Csv => {
            let mut out = String::new();
            for i in 0..series.n_steps() {
                let row: Vec<String> =
                    series.values().row(i).iter().map(|v| v.to_string()).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            fs::write(path, out)?;
            Ok(())
        }
    }
}

/// Per-sensor normalization statistics. Degenerate sensors (zero variance)
/// fall back to `std = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(n_sensors: usize) -> NormStats {
        NormStats {
            mean: vec![0.0; n_sensors],
            std: vec![1.0; n_sensors],
        }
    }
}

/// Two-pass per-sensor mean and population standard deviation.
fn stats_of_columns(values: &DenseMatrix) -> NormStats {
    let (rows, cols) = values.shape();
    let mut mean = vec![0.0; cols];
    for i in 0..rows {
        for (j, v) in values.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }
    let mut var = vec![0.0; cols];
    for i in 0..rows {
        for (j, v) in values.row(i).iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    let std = var
        .iter()
        .map(|v| {
            let s = (v / rows as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    NormStats { mean, std }
}

/// Z-score a series against its own statistics; returns the normalized
/// series and the statistics used. `denormalize` with the same stats is the
/// exact inverse (within float round-off).
pub fn zscore(series: &FlowSeries) -> (FlowSeries, NormStats) {
    let stats = stats_of_columns(series.values());
    (normalize_with(series, &stats), stats)
}

pub fn normalize_with(series: &FlowSeries, stats: &NormStats) -> FlowSeries {
    let values = DenseMatrix::from_fn(series.n_steps(), series.n_sensors(), |i, j| {
        (series.get(i, j) - stats.mean[j]) / stats.std[j]
    });
    FlowSeries { values }
}

/// Map a normalized per-sensor value back to raw scale.
#[inline]
pub fn denormalize(value: f64, stats: &NormStats, sensor: usize) -> f64 {
    value * stats.std[sensor] + stats.mean[sensor]
}

/// One training sample: `window` input steps and `horizon` target steps.
/// Inputs are stored as a `T x N x 1` tensor (normalized once the dataset is
/// split); targets stay on raw scale as a `horizon x N` matrix. `start` is
/// the series step index of the first input row.
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub start: usize,
    pub input: DenseTensor3,
    pub target: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Sliding-window dataset. Built raw by [`make_windows`]; [`split`] tags the
/// contiguous train/val/test ranges, computes normalization statistics from
/// the training inputs only, and normalizes every input in place.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub samples: Vec<WindowSample>,
    pub window: usize,
    pub horizon: usize,
    pub stride: usize,
    pub n_sensors: usize,
    pub stats: Option<NormStats>,
    pub splits: Option<Splits>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split_range(&self, which: SplitTag) -> Result<Range<usize>> {
        let splits = self
            .splits
            .as_ref()
            .ok_or_else(|| Error::usage("dataset has not been split".to_string()))?;
        Ok(match which {
            SplitTag::Train => splits.train.clone(),
            SplitTag::Val => splits.val.clone(),
            SplitTag::Test => splits.test.clone(),
        })
    }

    pub fn stats(&self) -> Result<&NormStats> {
        self.stats
            .as_ref()
            .ok_or_else(|| Error::usage("dataset has not been split/normalized".to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Cut `series` into sliding windows: sample `t` (0-based) takes inputs from
/// steps `[t, t+T)` and targets from `[t+T, t+T+horizon)`. With stride 1
/// there are `n_steps - T - horizon + 1` samples.
pub fn make_windows(
    series: &FlowSeries,
    window: usize,
    horizon: usize,
    stride: usize,
) -> Result<WindowedDataset> {
    if window == 0 || horizon == 0 || stride == 0 {
        return Err(Error::usage("window, horizon and stride must be positive".to_string()));
    }
    if series.n_steps() < window + horizon {
        return Err(Error::usage(format!(
            "series has {} steps, need at least window + horizon = {}",
            series.n_steps(),
            window + horizon
        )));
    }
    let n = series.n_sensors();
    let mut samples = Vec::new();
    let mut start = 0usize;
    while start + window + horizon <= series.n_steps() {
        let input = DenseTensor3::from_fn((window, n, 1), |t, i, _| series.get(start + t, i));
        let target = DenseMatrix::from_fn(horizon, n, |h, i| series.get(start + window + h, i));
        samples.push(WindowSample { start, input, target });
        start += stride;
    }
    Ok(WindowedDataset {
        samples,
        window,
        horizon,
        stride,
        n_sensors: n,
        stats: None,
        splits: None,
    })
}

/// Contiguous time-ordered split. For ratios `(a, b, c)` the train split
/// gets `floor(n*a/(a+b+c))` samples, val `floor(n*b/(a+b+c))`, test the
/// rest. Normalization statistics come from the training inputs alone and
/// are applied to every sample input; targets stay raw.
pub fn split(mut ds: WindowedDataset, ratios: (usize, usize, usize)) -> Result<WindowedDataset> {
    let n = ds.samples.len();
    if n < 3 {
        return Err(Error::usage(format!("need at least 3 samples to split, have {n}")));
    }
    let total = ratios.0 + ratios.1 + ratios.2;
    if total == 0 || ratios.0 == 0 {
        return Err(Error::usage("split ratios must be positive with a nonempty train share".to_string()));
    }
    let n_train = n * ratios.0 / total;
    let n_val = n * ratios.1 / total;
    if n_train == 0 {
        return Err(Error::usage("train split is empty".to_string()));
    }
    let splits = Splits {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n,
    };

    // Train-only statistics: every input entry seen by a training window.
    let window = ds.window;
    let n_sensors = ds.n_sensors;
    let mut flat = Vec::with_capacity(n_train * window * n_sensors);
    for s in &ds.samples[splits.train.clone()] {
        flat.extend_from_slice(s.input.data());
    }
    let stacked = DenseMatrix::from_vec(n_train * window, n_sensors, flat);
    let stats = stats_of_columns(&stacked);

    for s in &mut ds.samples {
        for t in 0..window {
            for i in 0..n_sensors {
                let v = s.input.get(t, i, 0);
                s.input.set(t, i, 0, (v - stats.mean[i]) / stats.std[i]);
            }
        }
    }
    ds.stats = Some(stats);
    ds.splits = Some(splits);
    Ok(ds)
}

/// Options for the synthetic diffusion generator. The defaults define the
/// documented generator; tests switch individual terms off.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Weight on a node's own previous value.
    pub self_weight: f64,
    /// Weight on the mean of the node's neighbors' previous values.
    pub neighbor_weight: f64,
    /// Amplitude of the daily sinusoid (also the "signal scale").
    pub amplitude: f64,
    /// Noise standard deviation as a fraction of the amplitude.
    pub noise_frac: f64,
    /// Steps per day (5-minute data).
    pub period: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            self_weight: 0.6,
            neighbor_weight: 0.35,
            amplitude: 1.0,
            noise_frac: 0.05,
            period: 288,
        }
    }
}

/// Ring graph over `n` nodes: node `i` connects to `i+1 mod n` with unit
/// cost.
pub fn ring_graph(n_nodes: usize) -> Result<SpatialGraph> {
    let edges: Vec<EdgeRecord> = (0..n_nodes)
        .map(|i| EdgeRecord {
            from: i + 1,
            to: (i + 1) % n_nodes + 1,
            cost: 1.0,
            line: i + 1,
        })
        .collect();
    SpatialGraph::from_edges(n_nodes, &edges)
}

/// Deterministic part of one generator step: for the state at step `t-1`,
/// produce step `t` before noise. `x_t[i] = w_self * x[i] + w_nb * mean of
/// neighbors + amplitude * sin(2*pi*(t mod period)/period + phase_i)` with
/// `phase_i = 2*pi*i/n`.
pub fn diffusion_step(prev: &[f64], graph: &SpatialGraph, t: usize, opts: &SynthOptions) -> Vec<f64> {
    let n = graph.n();
    debug_assert_eq!(prev.len(), n);
    let adj = graph.adjacency();
    let mut next = vec![0.0; n];
    for (i, out) in next.iter_mut().enumerate() {
        let mut nb_sum = 0.0;
        let mut nb_count = 0.0;
        for j in 0..n {
            if adj.get(i, j) != 0.0 {
                nb_sum += prev[j];
                nb_count += 1.0;
            }
        }
        let nb_mean = if nb_count > 0.0 { nb_sum / nb_count } else { 0.0 };
        let phase = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
        let angle = 2.0 * std::f64::consts::PI * ((t % opts.period) as f64) / (opts.period as f64);
        *out = opts.self_weight * prev[i]
            + opts.neighbor_weight * nb_mean
            + opts.amplitude * (angle + phase).sin();
    }
    next
}

/// Synthetic diffusion dataset on a ring graph.
///
/// Generator, fully reproducible from `seed` with a ChaCha8 stream:
/// 1. draw the initial state, one standard-normal value per node scaled by
///    the amplitude (node order);
/// 2. for each subsequent step `t`, apply [`diffusion_step`] and add
///    per-node Gaussian noise with standard deviation
///    `noise_frac * amplitude` (node order).
pub fn synth_diffusion(n_nodes: usize, n_steps: usize, seed: u64) -> Result<(FlowSeries, SpatialGraph)> {
    synth_diffusion_with(n_nodes, n_steps, seed, &SynthOptions::default())
}

pub fn synth_diffusion_with(
    n_nodes: usize,
    n_steps: usize,
    seed: u64,
    opts: &SynthOptions,
) -> Result<(FlowSeries, SpatialGraph)> {
    if n_nodes < 2 {
        return Err(Error::usage("synthetic generator needs at least 2 nodes".to_string()));
    }
    if n_steps == 0 {
        return Err(Error::usage("n_steps must be positive".to_string()));
    }
    let graph = ring_graph(n_nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    let mut values = DenseMatrix::zeros(n_steps, n_nodes);
    let mut state: Vec<f64> = (0..n_nodes)
        .map(|_| {
            let z: f64 = normal.sample(&mut rng);
            z * opts.amplitude
        })
        .collect();
    values.row_mut(0).copy_from_slice(&state);
    let noise_std = opts.noise_frac * opts.amplitude;
    for t in 1..n_steps {
        let mut next = diffusion_step(&state, &graph, t, opts);
        if noise_std > 0.0 {
            for v in &mut next {
                let z: f64 = normal.sample(&mut rng);
                *v += z * noise_std;
            }
        }
        values.row_mut(t).copy_from_slice(&next);
        state = next;
    }
    Ok((FlowSeries::new(values)?, graph))
}

/// Historical-average baseline: the training-range mean per node and
/// time-of-day slot (`step mod period`). Slots unseen in training fall back
/// to the node's overall training mean.
pub struct HistoricalAverage {
    period: usize,
    slot_mean: DenseMatrix, // period x sensors
}

impl HistoricalAverage {
    /// Fit on the raw series steps `[0, train_steps)`.
    pub fn fit(series: &FlowSeries, train_steps: usize, period: usize) -> Result<HistoricalAverage> {
        if train_steps == 0 || train_steps > series.n_steps() {
            return Err(Error::usage("invalid training step range for baseline".to_string()));
        }
        let sensors = series.n_sensors();
        let mut sums = DenseMatrix::zeros(period, sensors);
        let mut counts = vec![0usize; period];
        let mut overall = vec![0.0; sensors];
        for t in 0..train_steps {
            let slot = t % period;
            counts[slot] += 1;
            for i in 0..sensors {
                let v = series.get(t, i);
                sums.set(slot, i, sums.get(slot, i) + v);
                overall[i] += v;
            }
        }
        for o in &mut overall {
            *o /= train_steps as f64;
        }
        let mut slot_mean = DenseMatrix::zeros(period, sensors);
        for s in 0..period {
            for i in 0..sensors {
                let v = if counts[s] > 0 {
                    sums.get(s, i) / counts[s] as f64
                } else {
                    overall[i]
                };
                slot_mean.set(s, i, v);
            }
        }
        Ok(HistoricalAverage { period, slot_mean })
    }

    /// Predicted value for `sensor` at absolute series step `step`.
    pub fn predict(&self, step: usize, sensor: usize) -> f64 {
        self.slot_mean.get(step % self.period, sensor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_series() -> FlowSeries {
        // 30 steps, 2 sensors, deterministic.
        let values = DenseMatrix::from_fn(30, 2, |t, s| (t as f64) + 100.0 * (s as f64));
        FlowSeries::new(values).unwrap()
    }

    #[test]
    fn flow_csv_known_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("flow.csv");
        std::fs::write(&p, "s0,s1\n1.5,2\n3,4.25\n5,6\n").unwrap();
        let f = load_flow(&p, FlowFormat::Csv).unwrap();
        assert_eq!(f.n_steps(), 3);
        assert_eq!(f.n_sensors(), 2);
        assert_eq!(f.get(1, 1), 4.25);
    }

    #[test]
    fn flow_csv_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("flow.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        let err = load_flow(&p, FlowFormat::Csv).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");

        std::fs::write(&p, "1,2\n3,NaN\n").unwrap();
        let err = load_flow(&p, FlowFormat::Csv).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");

        std::fs::write(&p, "1,2\n3,abc\n").unwrap();
        let err = load_flow(&p, FlowFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
    }

    #[test]
    fn flow_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("flow.csv");
        let f = toy_series();
        save_flow(&f, &p, FlowFormat::Csv).unwrap();
        let back = load_flow(&p, FlowFormat::Csv).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn table_shaped_binary_files() {
        // Loader reports the advertised shapes for full-size archives.
        let dir = tempfile::tempdir().unwrap();
        for (steps, sensors, name) in [(17856usize, 170usize, "pems08"), (26208, 358, "pems03")] {
            let p = dir.path().join(format!("{name}.stf1"));
            let values = DenseMatrix::from_fn(steps, sensors, |t, s| ((t * 31 + s) % 97) as f64);
            io::write_flow_binary(&values, &p).unwrap();
            let f = load_flow(&p, FlowFormat::SttBinary).unwrap();
            assert_eq!(f.n_steps(), steps);
            assert_eq!(f.n_sensors(), sensors);
        }
    }

    #[test]
    fn zscore_roundtrip_and_two_pass_oracle() {
        let f = toy_series();
        let (norm, stats) = zscore(&f);

        // Two-pass oracle.
        for j in 0..2 {
            let col: Vec<f64> = (0..30).map(|t| f.get(t, j)).collect();
            let mean = col.iter().sum::<f64>() / 30.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 30.0;
            assert!((stats.mean[j] - mean).abs() < 1e-12);
            assert!((stats.std[j] - var.sqrt()).abs() < 1e-12);
        }

        for t in 0..30 {
            for j in 0..2 {
                let back = denormalize(norm.get(t, j), &stats, j);
                assert!((back - f.get(t, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscore_constant_sensor_fallback() {
        let values = DenseMatrix::from_fn(10, 1, |_, _| 42.0);
        let f = FlowSeries::new(values).unwrap();
        let (norm, stats) = zscore(&f);
        assert_eq!(stats.std[0], 1.0);
        assert!(norm.values().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn window_counts_and_alignment() {
        let values = DenseMatrix::from_fn(25, 1, |t, _| t as f64);
        let f = FlowSeries::new(values).unwrap();
        let ds = make_windows(&f, 12, 12, 1).unwrap();
        assert_eq!(ds.len(), 2);
        // First sample's target starts at step 12 (0-based; 13 1-based).
        assert_eq!(ds.samples[0].target.get(0, 0), 12.0);
        assert_eq!(ds.samples[0].input.get(0, 0, 0), 0.0);
        assert_eq!(ds.samples[1].input.get(0, 0, 0), 1.0);

        assert!(make_windows(&f, 20, 12, 1).is_err());

        // Stride-1 coverage: every usable offset exactly once.
        let starts: Vec<usize> = ds.samples.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![0, 1]);
    }

    #[test]
    fn pems08_window_count_formula() {
        let values = DenseMatrix::zeros(17856, 1);
        let f = FlowSeries::new(values).unwrap();
        let ds = make_windows(&f, 12, 12, 1).unwrap();
        assert_eq!(ds.len(), 17856 - 24 + 1);
        assert_eq!(ds.len(), 17833);
    }

    #[test]
    fn split_ratios() {
        let values = DenseMatrix::from_fn(10 + 23, 1, |t, _| t as f64);
        let f = FlowSeries::new(values).unwrap();
        let ds = split(make_windows(&f, 12, 12, 1).unwrap(), (6, 2, 2)).unwrap();
        let s = ds.splits.as_ref().unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));

        let values = DenseMatrix::from_fn(11 + 23, 1, |t, _| t as f64);
        let f = FlowSeries::new(values).unwrap();
        let ds = split(make_windows(&f, 12, 12, 1).unwrap(), (6, 2, 2)).unwrap();
        let s = ds.splits.as_ref().unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 3));

        // Disjoint and exhaustive.
        assert_eq!(s.train.end, s.val.start);
        assert_eq!(s.val.end, s.test.start);
        assert_eq!(s.test.end, ds.len());
    }

    #[test]
    fn split_stats_from_train_inputs_only() {
        // Train windows cover only early steps; a late-step outlier must not
        // leak into the statistics.
        let mut values = DenseMatrix::from_fn(40, 1, |t, _| t as f64);
        values.set(39, 0, 1e9);
        let f = FlowSeries::new(values).unwrap();
        let ds = split(make_windows(&f, 4, 4, 1).unwrap(), (6, 2, 2)).unwrap();
        let stats = ds.stats().unwrap();
        // 33 samples; train = 19 samples covering steps 0..22.
        assert!(stats.mean[0] < 30.0, "leaked: {}", stats.mean[0]);
    }

    #[test]
    fn synth_uniform_state_stays_spatially_uniform() {
        // With no noise and no sinusoid, a spatially uniform state is a
        // fixed point of the mixing operator: every node stays equal, and
        // the common value contracts by self+neighbor weight per step.
        let opts = SynthOptions {
            noise_frac: 0.0,
            amplitude: 0.0,
            ..SynthOptions::default()
        };
        let (f, g) = synth_diffusion_with(5, 10, 1, &opts).unwrap();
        // Overwrite: rerun the deterministic part from a uniform state.
        let mut state = vec![3.0; 5];
        for _ in 1..10 {
            let next = diffusion_step(&state, &g, 1, &opts);
            for v in &next {
                assert!((v - 0.95 * state[0]).abs() < 1e-12);
            }
            state = next;
        }
        // Zero initial state: identically zero series.
        let mut zero = vec![0.0; 5];
        zero = diffusion_step(&zero, &g, 3, &opts);
        assert!(zero.iter().all(|v| *v == 0.0));
        let _ = f;
    }

    #[test]
    fn synth_seeded_reproducibility() {
        let (a, _) = synth_diffusion(4, 50, 42).unwrap();
        let (b, _) = synth_diffusion(4, 50, 42).unwrap();
        assert_eq!(a.values().data(), b.values().data());
        let (c, _) = synth_diffusion(4, 50, 43).unwrap();
        assert_ne!(a.values().data(), c.values().data());
    }

    #[test]
    fn synth_step_matches_naive_per_node_oracle() {
        let opts = SynthOptions::default();
        let g = ring_graph(6).unwrap();
        let prev: Vec<f64> = (0..6).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let got = diffusion_step(&prev, &g, 7, &opts);
        for i in 0..6 {
            // Ring neighbors of i are i-1 and i+1 (mod n).
            let left = prev[(i + 5) % 6];
            let right = prev[(i + 1) % 6];
            let phase = 2.0 * std::f64::consts::PI * (i as f64) / 6.0;
            let angle = 2.0 * std::f64::consts::PI * (7 % 288) as f64 / 288.0;
            let want = 0.6 * prev[i] + 0.35 * 0.5 * (left + right) + (angle + phase).sin();
            assert!((got[i] - want).abs() < 1e-12, "node {i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn historical_average_baseline() {
        let values = DenseMatrix::from_fn(10, 1, |t, _| if t % 2 == 0 { 10.0 } else { 20.0 });
        let f = FlowSeries::new(values).unwrap();
        let ha = HistoricalAverage::fit(&f, 10, 2).unwrap();
        assert_eq!(ha.predict(4, 0), 10.0);
        assert_eq!(ha.predict(7, 0), 20.0);
    }
}

//! The sampled operator `A = (1/√m)·stack(F_{t_k} Φ* ι_Λ)` with its `Q` normalization and data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{q_weights, ForwardModel, ModelKind, Segment};
use crate::error::{Error, Result};

/// Adds `scale · ⟨block[i], block[l]⟩` to the lower triangle of `acc`.
pub fn accumulate_normal(block: &[Segment], scale: f64, acc: &mut DMatrix<f64>) {
    for (i, a) in block.iter().enumerate() {
        for (l, b) in block[..=i].iter().enumerate() {
            if a.start < b.end() && b.start < a.end() {
                acc[(i, l)] += scale * a.dot(b);
            }
        }
    }
}

/// The data fit in normal form: `‖QAx − Qy‖² = xᵀNx − 2rᵀx + ‖Qy‖²`.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub normal: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub data_norm_sq: f64,
    pub scales: Vec<u32>,
}

impl NormalForm {
    /// From a dense operator and data vector.
    pub fn from_dense(a: &DMatrix<f64>, y: &DVector<f64>, scales: Vec<u32>) -> Result<Self> {
        if a.nrows() != y.len() || a.ncols() != scales.len() {
            return Err(Error::Dimension(format!(
                "operator {:?}, data {}, scales {}",
                a.shape(),
                y.len(),
                scales.len()
            )));
        }
        Ok(Self { normal: a.transpose() * a, rhs: a.transpose() * y, data_norm_sq: y.norm_squared(), scales })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// `‖QAx − Qy‖`, clamped against rounding below zero.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        ((&self.normal * x).dot(x) - 2.0 * self.rhs.dot(x) + self.data_norm_sq).max(0.0).sqrt()
    }
}

/// A sampled system reduced to its normal form while the samples are generated, for sample
/// counts whose blocks would not fit in memory.
#[derive(Debug, Clone)]
pub struct StreamedSystem {
    pub form: NormalForm,
    pub samples: Vec<f64>,
    pub truncation_residual: f64,
    pub beta: f64,
}

/// Same data as [`assemble_sampled_system`] (identical noise for identical seeds), accumulated
/// into normal form one sample at a time.
pub fn assemble_normal_form(
    model: &dyn ForwardModel,
    lambda_len: usize,
    samples: &[f64],
    x_dagger: &[f64],
    beta: f64,
    noise_seed: u64,
) -> Result<StreamedSystem> {
    if samples.is_empty() {
        return Err(Error::Config("at least one sample is required".into()));
    }
    if lambda_len > model.num_atoms() || x_dagger.len() > model.num_atoms() {
        return Err(Error::Dimension(format!(
            "Λ of size {lambda_len} and {} coefficients for {} atoms",
            x_dagger.len(),
            model.num_atoms()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("noise level {beta} must be non-negative")));
    }
    let len = model.measurement_len();
    let weight = model.measurement_weight();
    let m = samples.len();
    let q = q_weights(model, samples);
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut normal = DMatrix::zeros(lambda_len, lambda_len);
    let mut rhs = DVector::zeros(lambda_len);
    let (mut data_norm_sq, mut tail_sq) = (0.0, 0.0);
    for (k, &t) in samples.iter().enumerate() {
        let block = model.responses(lambda_len, t);
        let scale2 = weight / m as f64 * q[k] * q[k];
        accumulate_normal(&block, scale2, &mut normal);
        let mut y = vec![0.0; len];
        let mut tail = vec![0.0; len];
        for (i, &c) in x_dagger.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if i < lambda_len {
                block[i].add_to(c, &mut y);
            } else {
                let seg = model.response(i, t);
                seg.add_to(c, &mut y);
                seg.add_to(c, &mut tail);
            }
        }
        let noise = gaussian_noise(len, weight, beta, &mut rng);
        y.iter_mut().zip(&noise).for_each(|(a, e)| *a += e);
        for (r, seg) in rhs.iter_mut().zip(&block) {
            *r += scale2 * seg.values.iter().zip(&y[seg.start..seg.end()]).map(|(a, b)| a * b).sum::<f64>();
        }
        data_norm_sq += scale2 * y.iter().map(|v| v * v).sum::<f64>();
        tail_sq += scale2 * tail.iter().map(|v| v * v).sum::<f64>();
    }
    normal.fill_upper_triangle_with_lower_triangle();
    let scales = (0..lambda_len).map(|i| model.atom_scale(i)).collect();
    Ok(StreamedSystem {
        form: NormalForm { normal, rhs, data_norm_sq, scales },
        samples: samples.to_vec(),
        truncation_residual: tail_sq.sqrt(),
        beta,
    })
}

/// Noise-free data and its part outside `Λ`, both unweighted and per block.
#[derive(Debug, Clone)]
pub struct CleanData {
    pub measurements: Vec<Vec<f64>>,
    pub tail: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SampledSystem {
    pub kind: ModelKind,
    pub atom_count: usize,
    pub scales: Vec<u32>,
    pub samples: Vec<f64>,
    /// Per-block mass: `1/m` for random samples, quadrature weights for deterministic rules.
    pub sample_mass: Vec<f64>,
    pub q_weights: Vec<f64>,
    pub measurement_len: usize,
    pub measurement_weight: f64,
    /// `blocks[k][i] = F_{t_k} φ_i`, without any weight.
    pub blocks: Vec<Vec<Segment>>,
    /// `y_k = F_{t_k} u† + ε_k`, without any weight.
    pub y: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    /// `F_{t_k} Φ* P_Λ^⊥ x†`.
    pub tail: Vec<Vec<f64>>,
    pub beta: f64,
    pub noise_seed: u64,
}

fn gaussian_noise(len: usize, weight: f64, beta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if beta == 0.0 {
        return vec![0.0; len];
    }
    let mut e: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let norm = (weight * e.iter().map(|v| v * v).sum::<f64>()).sqrt();
    e.iter_mut().for_each(|v| *v *= beta / norm);
    e
}

/// Measures `x_dagger` (coefficients on the first `x_dagger.len()` atoms, possibly beyond `Λ`)
/// at every sample and adds noise with `‖ε_k‖_{H₂} = β`.
pub fn assemble_sampled_system(
    model: &dyn ForwardModel,
    lambda_len: usize,
    samples: &[f64],
    x_dagger: &[f64],
    beta: f64,
    noise_seed: u64,
) -> Result<SampledSystem> {
    if x_dagger.len() > model.num_atoms() {
        return Err(Error::Dimension(format!(
            "signal has {} coefficients, the model {} atoms",
            x_dagger.len(),
            model.num_atoms()
        )));
    }
    let mut system = SampledSystem::operator(model, lambda_len, samples)?;
    let len = model.measurement_len();
    let mut clean = CleanData { measurements: Vec::new(), tail: Vec::new() };
    for (k, &t) in samples.iter().enumerate() {
        let mut full = vec![0.0; len];
        let mut tail = vec![0.0; len];
        for (i, &c) in x_dagger.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if i < lambda_len {
                system.blocks[k][i].add_to(c, &mut full);
            } else {
                let seg = model.response(i, t);
                seg.add_to(c, &mut full);
                seg.add_to(c, &mut tail);
            }
        }
        clean.measurements.push(full);
        clean.tail.push(tail);
    }
    system.attach_data(clean, beta, noise_seed)?;
    Ok(system)
}

impl SampledSystem {
    /// Operator only, with `y = 0`.
    pub fn operator(model: &dyn ForwardModel, lambda_len: usize, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("at least one sample is required".into()));
        }
        let m = samples.len();
        Self::with_masses(model, lambda_len, samples, vec![1.0 / m as f64; m], q_weights(model, samples))
    }

    /// `A` on a deterministic rule for `μ`, so that `AᵀA` is the quadrature Gram matrix.
    pub fn on_quadrature(model: &dyn ForwardModel, lambda_len: usize, resolution: usize) -> Result<Self> {
        let rule = model.quadrature(resolution);
        let samples: Vec<f64> = rule.iter().map(|r| r.0).collect();
        let mass = rule.iter().map(|r| r.1).collect();
        Self::with_masses(model, lambda_len, &samples, mass, vec![1.0; samples.len()])
    }

    fn with_masses(
        model: &dyn ForwardModel,
        lambda_len: usize,
        samples: &[f64],
        sample_mass: Vec<f64>,
        q_weights: Vec<f64>,
    ) -> Result<Self> {
        if lambda_len > model.num_atoms() {
            return Err(Error::Index(format!(
                "Λ of size {lambda_len} exceeds the {} available atoms",
                model.num_atoms()
            )));
        }
        let len = model.measurement_len();
        let blocks = samples.iter().map(|&t| model.responses(lambda_len, t)).collect();
        let m = samples.len();
        Ok(Self {
            kind: model.kind(),
            atom_count: lambda_len,
            scales: (0..lambda_len).map(|i| model.atom_scale(i)).collect(),
            samples: samples.to_vec(),
            sample_mass,
            q_weights,
            measurement_len: len,
            measurement_weight: model.measurement_weight(),
            blocks,
            y: vec![vec![0.0; len]; m],
            noise: vec![vec![0.0; len]; m],
            tail: vec![vec![0.0; len]; m],
            beta: 0.0,
            noise_seed: 0,
        })
    }

    /// Sets `y = clean + ε` with fresh noise of norm exactly `β` in every block.
    pub fn attach_data(&mut self, clean: CleanData, beta: f64, noise_seed: u64) -> Result<()> {
        if !(beta >= 0.0) {
            return Err(Error::Domain(format!("noise level {beta} must be non-negative")));
        }
        let m = self.m();
        if clean.measurements.len() != m || clean.tail.len() != m {
            return Err(Error::Dimension(format!("expected {m} measurement blocks")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        self.noise = (0..m)
            .map(|_| gaussian_noise(self.measurement_len, self.measurement_weight, beta, &mut rng))
            .collect();
        self.y = clean
            .measurements
            .iter()
            .zip(&self.noise)
            .map(|(c, e)| c.iter().zip(e).map(|(a, b)| a + b).collect())
            .collect();
        self.tail = clean.tail;
        self.beta = beta;
        self.noise_seed = noise_seed;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn rows(&self) -> usize {
        self.m() * self.measurement_len
    }

    /// Scale turning unweighted block entries into rows of `A` (or `QA`).
    pub fn row_scale(&self, k: usize, with_q: bool) -> f64 {
        let q = if with_q { self.q_weights[k] } else { 1.0 };
        (self.measurement_weight * self.sample_mass[k]).sqrt() * q
    }

    /// `QAx` as a flat Euclidean vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let len = self.measurement_len;
        let mut out = vec![0.0; self.rows()];
        for (k, block) in self.blocks.iter().enumerate() {
            let scale = self.row_scale(k, true);
            let dst = &mut out[k * len..(k + 1) * len];
            for (seg, &c) in block.iter().zip(x) {
                if c != 0.0 {
                    seg.add_to(scale * c, dst);
                }
            }
        }
        out
    }

    /// `(QA)ᵀ r`.
    pub fn adjoint(&self, r: &[f64]) -> Vec<f64> {
        let len = self.measurement_len;
        let mut out = vec![0.0; self.atom_count];
        for (k, block) in self.blocks.iter().enumerate() {
            let scale = self.row_scale(k, true);
            let src = &r[k * len..(k + 1) * len];
            for (o, seg) in out.iter_mut().zip(block) {
                *o += scale * seg.values.iter().zip(&src[seg.start..seg.end()]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// `Qy` as a flat Euclidean vector, matching [`apply`](Self::apply).
    pub fn data(&self) -> Vec<f64> {
        self.weighted_stack(&self.y, true)
    }

    fn weighted_stack(&self, blocks: &[Vec<f64>], with_q: bool) -> Vec<f64> {
        blocks
            .iter()
            .enumerate()
            .flat_map(|(k, b)| {
                let s = self.row_scale(k, with_q);
                b.iter().map(move |v| s * v)
            })
            .collect()
    }

    /// Dense `A` (or `QA`), one row per (sample, grid point).
    pub fn dense(&self, with_q: bool) -> DMatrix<f64> {
        let len = self.measurement_len;
        let mut a = DMatrix::zeros(self.rows(), self.atom_count);
        for (k, block) in self.blocks.iter().enumerate() {
            let scale = self.row_scale(k, with_q);
            for (i, seg) in block.iter().enumerate() {
                for (p, v) in seg.values.iter().enumerate() {
                    a[(k * len + seg.start + p, i)] = scale * v;
                }
            }
        }
        a
    }

    /// `(QA)ᵀ(QA)` from overlaps of the stored segments.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let n = self.atom_count;
        let mut g = DMatrix::zeros(n, n);
        for (k, block) in self.blocks.iter().enumerate() {
            accumulate_normal(block, self.row_scale(k, true).powi(2), &mut g);
        }
        g.fill_upper_triangle_with_lower_triangle();
        g
    }

    pub fn normal_form(&self) -> NormalForm {
        let data = self.data();
        NormalForm {
            normal: self.normal_matrix(),
            rhs: DVector::from_vec(self.adjoint(&data)),
            data_norm_sq: data.iter().map(|v| v * v).sum(),
            scales: self.scales.clone(),
        }
    }

    /// `‖Q v‖_{H₂^m}` for unweighted blocks `v`.
    pub fn block_norm(&self, blocks: &[Vec<f64>]) -> f64 {
        self.weighted_stack(blocks, true).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖QAP_Λ^⊥x†‖_{H₂^m}`.
    pub fn truncation_residual(&self) -> f64 {
        self.block_norm(&self.tail)
    }

    /// `‖ε_k‖_{H₂}` for every block.
    pub fn noise_norms(&self) -> Vec<f64> {
        self.noise
            .iter()
            .map(|e| (self.measurement_weight * e.iter().map(|v| v * v).sum::<f64>()).sqrt())
            .collect()
    }

    /// `‖ε‖_{H₂^m}` without `Q`.
    pub fn noise_norm(&self) -> f64 {
        self.weighted_stack(&self.noise, false).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Writes `samples.csv`, `A.bin`, `y.bin` (both without `Q`, little-endian f64, row-major)
    /// and `meta.txt`.
    pub fn write_dir(&self, dir: &Path, extra_meta: &[(&str, String)]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = BufWriter::new(File::create(dir.join("samples.csv"))?);
        writeln!(csv, "k,t,q_weight,mass")?;
        for k in 0..self.m() {
            writeln!(csv, "{k},{:e},{:e},{:e}", self.samples[k], self.q_weights[k], self.sample_mass[k])?;
        }
        csv.flush()?;
        let a = self.dense(false);
        let mut out = BufWriter::new(File::create(dir.join("A.bin"))?);
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                out.write_all(&a[(r, c)].to_le_bytes())?;
            }
        }
        out.flush()?;
        let mut out = BufWriter::new(File::create(dir.join("y.bin"))?);
        for v in self.weighted_stack(&self.y, false) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        let mut meta = BufWriter::new(File::create(dir.join("meta.txt"))?);
        writeln!(meta, "kind = {}", self.kind)?;
        writeln!(meta, "rows = {}", self.rows())?;
        writeln!(meta, "cols = {}", self.atom_count)?;
        writeln!(meta, "m = {}", self.m())?;
        writeln!(meta, "measurement_len = {}", self.measurement_len)?;
        writeln!(meta, "measurement_weight = {:e}", self.measurement_weight)?;
        writeln!(meta, "beta = {:e}", self.beta)?;
        writeln!(meta, "noise_seed = {}", self.noise_seed)?;
        for (k, v) in extra_meta {
            writeln!(meta, "{k} = {v}")?;
        }
        meta.flush()?;
        Ok(())
    }
}

/// Dense system as stored by [`SampledSystem::write_dir`].
#[derive(Debug, Clone)]
pub struct StoredSystem {
    pub samples: Vec<f64>,
    pub q_weights: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub y: DVector<f64>,
    pub meta: Vec<(String, String)>,
}

pub fn read_dir(dir: &Path) -> Result<StoredSystem> {
    let mut meta = Vec::new();
    for line in BufReader::new(File::open(dir.join("meta.txt"))?).lines() {
        let line = line?;
        if let Some((k, v)) = line.split_once(" = ") {
            meta.push((k.to_string(), v.to_string()));
        }
    }
    let get = |key: &str| -> Result<usize> {
        meta.iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("meta.txt lacks a valid `{key}`")))
    };
    let (rows, cols) = (get("rows")?, get("cols")?);
    let read_f64s = |name: &str, n: usize| -> Result<Vec<f64>> {
        let mut bytes = Vec::new();
        File::open(dir.join(name))?.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(Error::Parse(format!("{name} holds {} bytes, expected {}", bytes.len(), 8 * n)));
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let matrix = DMatrix::from_row_slice(rows, cols, &read_f64s("A.bin", rows * cols)?);
    let y = DVector::from_vec(read_f64s("y.bin", rows)?);
    let (mut samples, mut q) = (Vec::new(), Vec::new());
    for line in BufReader::new(File::open(dir.join("samples.csv"))?).lines().skip(1) {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("samples.csv: {e}")));
        if f.len() < 3 {
            return Err(Error::Parse(format!("samples.csv: short line `{line}`")));
        }
        samples.push(parse(f[1])?);
        q.push(parse(f[2])?);
    }
    Ok(StoredSystem { samples, q_weights: q, matrix, y, meta })
}

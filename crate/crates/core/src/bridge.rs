//! Exact simulation of the standard three-dimensional Brownian bridge.

use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::simpson_weights;
use crate::rng::{stream_seed, StreamRng};

/// Paths per work unit. Fixed so that reductions do not depend on the
/// number of threads.
pub const CHUNK_PATHS: usize = 64;

/// A bridge sampled at `u_k = k / M`, `k = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub seed: u64,
    points: Vec<[f64; 3]>,
}

impl BridgePath {
    pub fn grid_size(&self) -> usize {
        self.points.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.grid_size() as f64
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Every `stride`-th point: the same bridge on the grid of size `M / stride`.
    pub fn subsample(&self, stride: usize) -> Result<BridgePath> {
        let m = self.grid_size();
        if stride == 0 || !m.is_multiple_of(stride) || m / stride < 2 {
            return Err(Error::invalid(format!(
                "stride {stride} does not divide the grid size {m} into at least two steps"
            )));
        }
        Ok(BridgePath {
            seed: self.seed,
            points: self.points.iter().step_by(stride).copied().collect(),
        })
    }

    /// `max_k |beta_{u_k}|`.
    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Sequential conditional sampling: given `beta_{u_k} = b`, each coordinate of
/// `beta_{u_{k+1}}` is normal with mean `b (1 - u_{k+1}) / (1 - u_k)` and
/// variance `(u_{k+1} - u_k)(1 - u_{k+1}) / (1 - u_k)`. Both endpoints are
/// exactly zero.
pub(crate) fn fill_bridge(points: &mut [[f64; 3]], rng: &mut StreamRng) {
    let m = points.len() - 1;
    let inv_m = 1.0 / m as f64;
    points[0] = [0.0; 3];
    for k in 0..m - 1 {
        let remaining = (m - k) as f64;
        let shrink = (remaining - 1.0) / remaining;
        let sd = (inv_m * shrink).sqrt();
        let prev = points[k];
        let mut next = [0.0; 3];
        for (c, v) in next.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = prev[c] * shrink + sd * z;
        }
        points[k + 1] = next;
    }
    points[m] = [0.0; 3];
}

pub fn sample_bridge(grid_size: usize, seed: u64) -> Result<BridgePath> {
    if grid_size < 2 {
        return Err(Error::invalid(format!(
            "bridge grid size must be at least 2, got {grid_size}"
        )));
    }
    let mut points = vec![[0.0; 3]; grid_size + 1];
    fill_bridge(&mut points, &mut StreamRng::seed_from_u64(seed));
    Ok(BridgePath { seed, points })
}

/// `N` bridges on a common grid. Path `i` is generated from
/// `stream_seed(base_seed, i)`, so any subset can be regenerated on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeEnsemble {
    n_paths: usize,
    grid_size: usize,
    base_seed: u64,
}

impl BridgeEnsemble {
    /// `grid_size` must be even (Simpson) and at least 2.
    pub fn new(n_paths: usize, grid_size: usize, base_seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::invalid("ensemble needs at least one path"));
        }
        if grid_size < 2 || !grid_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "bridge grid size must be even and at least 2, got {grid_size}"
            )));
        }
        Ok(BridgeEnsemble {
            n_paths,
            grid_size,
            base_seed,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn path_seed(&self, i: usize) -> u64 {
        stream_seed(self.base_seed, i as u64)
    }

    pub fn path(&self, i: usize) -> BridgePath {
        assert!(i < self.n_paths, "path index {i} out of range");
        sample_bridge(self.grid_size, self.path_seed(i)).expect("grid size validated")
    }

    pub fn paths(&self) -> impl Iterator<Item = BridgePath> + '_ {
        (0..self.n_paths).map(move |i| self.path(i))
    }

    /// Applies `f` to fixed chunks of path indices in parallel and returns
    /// the results in chunk order.
    pub fn map_chunks<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync,
    {
        let chunks = self.n_paths.div_ceil(CHUNK_PATHS);
        (0..chunks)
            .into_par_iter()
            .map(|c| f(c * CHUNK_PATHS..((c + 1) * CHUNK_PATHS).min(self.n_paths)))
            .collect()
    }

    /// Visits paths `range` in order, reusing one buffer.
    pub(crate) fn for_each_path(&self, range: Range<usize>, mut f: impl FnMut(usize, &[[f64; 3]])) {
        let mut points = vec![[0.0; 3]; self.grid_size + 1];
        for i in range {
            let mut rng = StreamRng::seed_from_u64(self.path_seed(i));
            fill_bridge(&mut points, &mut rng);
            f(i, &points);
        }
    }
}

/// Evaluates `I(t) = ∫_0^1 gamma(|u x e1 + sqrt(t) beta_u|) du` by composite
/// Simpson on the bridge grid.
pub(crate) struct FunctionalKernel {
    along: Vec<f64>,
    weights: Vec<f64>,
    h_third: f64,
}

/// Per-path quantities reused across every `t`.
pub(crate) struct PathProfile {
    pub first: Vec<f64>,
    pub perp_sq: Vec<f64>,
}

impl PathProfile {
    pub fn new(grid_size: usize) -> Self {
        PathProfile {
            first: vec![0.0; grid_size + 1],
            perp_sq: vec![0.0; grid_size + 1],
        }
    }

    pub fn load(&mut self, points: &[[f64; 3]]) {
        for (k, p) in points.iter().enumerate() {
            self.first[k] = p[0];
            self.perp_sq[k] = p[1] * p[1] + p[2] * p[2];
        }
    }
}

impl FunctionalKernel {
    pub fn new(grid_size: usize, x: f64) -> Self {
        let m = grid_size as f64;
        FunctionalKernel {
            along: (0..=grid_size).map(|k| k as f64 / m * x).collect(),
            weights: simpson_weights(grid_size),
            h_third: 1.0 / (3.0 * m),
        }
    }

    #[inline]
    fn radius(&self, profile: &PathProfile, k: usize, sqrt_t: f64, t: f64) -> f64 {
        let d = self.along[k] + sqrt_t * profile.first[k];
        (d * d + t * profile.perp_sq[k]).sqrt()
    }

    /// `I(t)` with `gamma` applied to all grid radii at once; `radii` and
    /// `values` are caller-owned buffers of length `M + 1`.
    pub fn integrate_batch<G: FnMut(&[f64], &mut [f64])>(
        &self,
        profile: &PathProfile,
        t: f64,
        radii: &mut [f64],
        values: &mut [f64],
        mut gamma: G,
    ) -> Result<f64> {
        let sqrt_t = t.sqrt();
        for (k, r) in radii.iter_mut().enumerate() {
            *r = self.radius(profile, k, sqrt_t, t);
        }
        gamma(radii, values);
        let acc: f64 = self
            .weights
            .iter()
            .zip(values.iter())
            .map(|(w, v)| w * v)
            .sum();
        if acc.is_finite() {
            return Ok(acc * self.h_third);
        }
        let z = values
            .iter()
            .position(|v| !v.is_finite())
            .map_or(f64::NAN, |k| radii[k]);
        Err(Error::Evaluation { what: "gamma", z })
    }

    pub fn integrate<G: Fn(f64) -> f64>(
        &self,
        profile: &PathProfile,
        t: f64,
        gamma: &G,
    ) -> Result<f64> {
        let n = self.weights.len();
        let (mut radii, mut values) = (vec![0.0; n], vec![0.0; n]);
        self.integrate_batch(profile, t, &mut radii, &mut values, |zs, out| {
            for (o, z) in out.iter_mut().zip(zs) {
                *o = gamma(*z);
            }
        })
    }
}

/// `I(t)` for one path.
pub fn path_functional_i<G: Fn(f64) -> f64>(
    path: &BridgePath,
    x: f64,
    t: f64,
    gamma: G,
) -> Result<f64> {
    let m = path.grid_size();
    if !m.is_multiple_of(2) {
        return Err(Error::invalid("Simpson needs an even bridge grid"));
    }
    if !(t >= 0.0) || !(x > 0.0) {
        return Err(Error::invalid(format!(
            "need t >= 0 and x > 0, got t = {t}, x = {x}"
        )));
    }
    let mut profile = PathProfile::new(m);
    profile.load(path.points());
    FunctionalKernel::new(m, x).integrate(&profile, t, &gamma)
}

/// `P[max_{0<=u<=1} |beta_u| <= y]` from the theta-type series
/// `(2/y^3) sqrt(2/pi) sum n pi / J_{3/2}(n pi)^2 exp(-pi^2 n^2 / 2 y^2)`,
/// with `J_{3/2}(n pi)^2 = 2 / (n pi^2)`.
pub fn bessel_max_cdf(y: f64, terms: usize) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!(
            "bessel_max_cdf needs y > 0, got {y}"
        )));
    }
    if terms == 0 {
        return Err(Error::invalid("bessel_max_cdf needs at least one term"));
    }
    use std::f64::consts::PI;
    let c = PI * PI / (2.0 * y * y);
    let prefactor = 2.0 / (y * y * y) * (2.0 / PI).sqrt();
    let peak = (1.0 / c).sqrt();
    let mut sum = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        let j_sq = 2.0 / (nf * PI * PI);
        let term = prefactor * nf * PI / j_sq * (-c * nf * nf).exp();
        sum += term;
        if nf > peak && term < 1e-15 {
            break;
        }
    }
    Ok(sum.min(1.0))
}

const DUMP_MAGIC: [u8; 8] = *b"BB3DUMP\0";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u32,
    pub n_paths: u64,
    pub grid_size: u64,
    pub base_seed: u64,
}

/// Writes the ensemble as: magic `BB3DUMP\0`, version (u32), N, M, base seed
/// (u64 each), then `N * (M + 1) * 3` little-endian f64 in path, point,
/// coordinate order.
pub fn write_dump<W: Write>(mut out: W, ensemble: &BridgeEnsemble) -> Result<()> {
    out.write_all(&DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(ensemble.n_paths as u64).to_le_bytes())?;
    out.write_all(&(ensemble.grid_size as u64).to_le_bytes())?;
    out.write_all(&ensemble.base_seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity((ensemble.grid_size + 1) * 24);
    let mut result = Ok(());
    ensemble.for_each_path(0..ensemble.n_paths, |_, points| {
        if result.is_err() {
            return;
        }
        buf.clear();
        for p in points {
            for v in p {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        result = out.write_all(&buf);
    });
    result?;
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<(DumpHeader, Vec<BridgePath>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if magic != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let mut read_u64 = || -> Result<u64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    let header = DumpHeader {
        version,
        n_paths: read_u64()?,
        grid_size: read_u64()?,
        base_seed: read_u64()?,
    };
    let ensemble = BridgeEnsemble::new(
        header.n_paths as usize,
        header.grid_size as usize,
        header.base_seed,
    )
    .map_err(|e| Error::Dump(e.to_string()))?;
    let mut paths = Vec::with_capacity(ensemble.n_paths);
    let mut b = [0u8; 8];
    for i in 0..ensemble.n_paths {
        let mut points = Vec::with_capacity(ensemble.grid_size + 1);
        for _ in 0..=ensemble.grid_size {
            let mut p = [0.0; 3];
            for v in &mut p {
                input.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
            points.push(p);
        }
        paths.push(BridgePath {
            seed: ensemble.path_seed(i),
            points,
        });
    }
    Ok((header, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_pinned_and_reproducible() {
        let a = sample_bridge(10, 42).unwrap();
        let b = sample_bridge(10, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points()[0], [0.0; 3]);
        assert_eq!(a.points()[10], [0.0; 3]);
        assert_ne!(a, sample_bridge(10, 43).unwrap());
        assert!(sample_bridge(1, 0).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(BridgeEnsemble::new(10, 3, 0).is_err());
        assert!(BridgeEnsemble::new(0, 4, 0).is_err());
        let e = BridgeEnsemble::new(3, 4, 9).unwrap();
        assert_eq!(e.path(2).seed, stream_seed(9, 2));
    }

    #[test]
    fn chunk_order_is_index_order() {
        let e = BridgeEnsemble::new(200, 4, 1).unwrap();
        let chunks = e.map_chunks(|r| r);
        let flat: Vec<usize> = chunks.into_iter().flatten().collect();
        assert_eq!(flat, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn functional_trivial_cases() {
        let p = sample_bridge(100, 5).unwrap();
        assert_eq!(path_functional_i(&p, 1.3, 2.0, |_| 0.0).unwrap(), 0.0);
        let v = path_functional_i(&p, 2.0, 0.0, |z| z * z).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
        let err = path_functional_i(&p, 1.0, 1.0, |z| if z > 0.5 { f64::NAN } else { 0.0 });
        assert!(matches!(err, Err(Error::Evaluation { z, .. }) if z > 0.5));
    }

    #[test]
    fn series_values() {
        assert!((bessel_max_cdf(1.0, 100).unwrap() - 0.177_923_355_643).abs() < 1e-9);
        assert!((bessel_max_cdf(10.0, 10_000).unwrap() - 1.0).abs() < 1e-12);
        assert!(bessel_max_cdf(0.01, 100).unwrap() < 1e-10);
        assert!(bessel_max_cdf(0.0, 100).is_err());
        let mut prev = 0.0;
        for k in 1..300 {
            let v = bessel_max_cdf(0.02 * k as f64, 10_000).unwrap();
            assert!(v >= prev - 1e-15, "y = {}: {v} < {prev}", 0.02 * k as f64);
            prev = v;
        }
    }

    #[test]
    fn dump_round_trip() {
        let e = BridgeEnsemble::new(5, 8, 77).unwrap();
        let mut bytes = Vec::new();
        write_dump(&mut bytes, &e).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 24 + 5 * 9 * 3 * 8);
        let (header, paths) = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(
            header,
            DumpHeader {
                version: 1,
                n_paths: 5,
                grid_size: 8,
                base_seed: 77
            }
        );
        let regenerated: Vec<_> = e.paths().collect();
        assert_eq!(paths, regenerated);

        bytes[0] = b'X';
        assert!(matches!(read_dump(bytes.as_slice()), Err(Error::Dump(_))));
    }
}

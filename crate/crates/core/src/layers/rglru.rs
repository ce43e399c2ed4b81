//! Real-gated linear recurrent unit.
//!
//! ```text
//! r_k = σ(W_a x_k + b_a)        i_k = σ(W_x x_k + b_x)
//! a_k = a^{c r_k}               h_k = a_k ⊙ h_{k−1} + √(1 − a_k²) ⊙ (i_k ⊙ x_k)
//! ```
//!
//! Both modes run the same complex computation over `N` lanes. In real mode
//! `N = R`, `a = σ(Λ)` and the output is `Re h`. In complex mode `N = R/2`,
//! `a = σ(Λ) e^{iθ}`, the input lanes are `x[..N] + i x[N..]` and the output
//! concatenates `Re h` and `Im h`, so both modes map `[S × R]` to `[S × R]`.

use std::f64::consts::PI;

use num_complex::Complex;

use super::activation::sigmoid;
use super::{Dense, ParamBuilder, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::scan::{sequential_recurrence, DiagonalAffineSeq};
use crate::tensor::Tensor;

/// The constant `c` in `a_k = a^{c r_k}`.
pub const GATE_EXPONENT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LruMode {
    Real,
    Complex,
}

impl LruMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(LruMode::Real),
            "complex" => Ok(LruMode::Complex),
            other => Err(Error::arg(format!("unknown rg-lru mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LruMode::Real => "real",
            LruMode::Complex => "complex",
        }
    }
}

/// Initial distributions for the recurrence coefficient `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingPreset {
    /// `|a| ∼ √U[0.9², 0.99²]`, phase `U[0, π/10]`.
    Small,
    /// Phase `U[0, π]`.
    Half,
    /// Phase `U[0, 2π]`.
    Full,
    /// `|a| ∼ √U[0.01², 0.99²]`, phase `U[0, 2π]`.
    FullCircle,
}

impl RingPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(RingPreset::Small),
            "half" => Ok(RingPreset::Half),
            "full" => Ok(RingPreset::Full),
            "full_circle" => Ok(RingPreset::FullCircle),
            other => Err(Error::arg(format!("unknown ring preset '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RingPreset::Small => "small",
            RingPreset::Half => "half",
            RingPreset::Full => "full",
            RingPreset::FullCircle => "full_circle",
        }
    }

    pub fn magnitude(self) -> (f64, f64) {
        match self {
            RingPreset::FullCircle => (0.01, 0.99),
            _ => (0.9, 0.99),
        }
    }

    pub fn phase(self) -> (f64, f64) {
        match self {
            RingPreset::Small => (0.0, PI / 10.0),
            RingPreset::Half => (0.0, PI),
            RingPreset::Full | RingPreset::FullCircle => (0.0, 2.0 * PI),
        }
    }
}

/// Samples `n` pairs `(Λ, θ)` with `σ(Λ) ∼ √U[lo², hi²]` and `θ ∼ U[phase]`.
///
/// Drawing the squared magnitude uniformly makes the points uniform in area
/// over the ring rather than bunched towards its inner edge.
pub fn ring_init(rng: &mut SeededRng, n: usize, magnitude: (f64, f64), phase: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = magnitude;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::arg(format!("ring magnitudes need 0 < lo < hi < 1, got [{lo}, {hi}]")));
    }
    if !(phase.0 <= phase.1) || !phase.0.is_finite() || !phase.1.is_finite() {
        return Err(Error::arg(format!("invalid phase range [{}, {}]", phase.0, phase.1)));
    }
    let mut lambda = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for _ in 0..n {
        let m = rng.uniform_range(lo * lo, hi * hi).sqrt();
        lambda.push((m / (1.0 - m)).ln());
        theta.push(rng.uniform_range(phase.0, phase.1));
    }
    Ok((lambda, theta))
}

/// Recurrent layer kinds with closed-form parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnKind {
    Elman,
    Lstm,
    Gru,
    RgLru,
}

impl RnnKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "elman" => Ok(RnnKind::Elman),
            "lstm" => Ok(RnnKind::Lstm),
            "gru" => Ok(RnnKind::Gru),
            "rg_lru" | "rglru" => Ok(RnnKind::RgLru),
            _ => Err(Error::arg(format!("unknown recurrent layer kind '{s}'"))),
        }
    }
}

/// Parameters of a recurrent layer with `d` channels and square projections.
pub fn count_rnn_params(kind: &str, d: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::arg("channel count must be positive"));
    }
    let (quad, lin) = match RnnKind::parse(kind)? {
        RnnKind::Elman => (3, 2),
        RnnKind::Lstm => (8, 4),
        RnnKind::Gru => (6, 3),
        RnnKind::RgLru => (2, 3),
    };
    Ok(quad * d * d + lin * d)
}

/// Principal branch: wraps a phase into `(−π, π]`.
fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// `ln σ(z)` without overflow.
fn log_sigmoid(z: f64) -> f64 {
    -(z.max(0.0) - z + (-z.abs()).exp().ln_1p())
}

#[derive(Debug, Clone)]
pub struct RgLru {
    pub mode: LruMode,
    /// Width `R` of the input and output.
    pub dim: usize,
    /// Number of recurrence lanes `N`.
    pub lanes: usize,
    pub c: f64,
    wa: Dense,
    wx: Dense,
    lambda: ParamId,
    theta: Option<ParamId>,
}

/// Per-step quantities shared by the forward pass, backward pass and sampler.
#[derive(Debug, Clone)]
struct Coefficients<T> {
    r: Vec<T>,
    ig: Vec<T>,
    a: Vec<Complex<T>>,
    beta: Vec<Complex<T>>,
    u: Vec<Complex<T>>,
    log_mag: Vec<T>,
    phase: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct RgLruCache<T> {
    x: Tensor<T>,
    co: Coefficients<T>,
    h: Vec<Complex<T>>,
}

impl RgLru {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, mode: LruMode, dim: usize, ring: RingPreset) -> Result<Self> {
        let lanes = match mode {
            LruMode::Real => dim,
            LruMode::Complex => {
                if dim % 2 != 0 {
                    return Err(Error::arg(format!("complex rg-lru needs an even width, got {dim}")));
                }
                dim / 2
            }
        };
        if lanes == 0 {
            return Err(Error::arg("rg-lru width must be positive"));
        }
        let mut pb = pb.child(name);
        let wa = Dense::new(&mut pb, "wa", dim, lanes, 1.0 / dim as f64, true)?;
        let wx = Dense::new(&mut pb, "wx", dim, lanes, 1.0 / dim as f64, true)?;
        let (lam, th) = ring_init(&mut pb.rng_for("ring"), lanes, ring.magnitude(), ring.phase())?;
        let lambda = pb.tensor("lambda", Tensor::from_vec(lam.into_iter().map(T::of).collect()))?;
        let theta = match mode {
            LruMode::Real => None,
            LruMode::Complex => Some(pb.tensor("theta", Tensor::from_vec(th.into_iter().map(T::of).collect()))?),
        };
        Ok(RgLru {
            mode,
            dim,
            lanes,
            c: GATE_EXPONENT,
            wa,
            wx,
            lambda,
            theta,
        })
    }

    pub fn param_count(&self) -> usize {
        self.wa.param_count() + self.wx.param_count() + self.lanes * if self.theta.is_some() { 2 } else { 1 }
    }

    pub fn gate_projections(&self) -> (&Dense, &Dense) {
        (&self.wa, &self.wx)
    }

    pub fn lambda(&self) -> ParamId {
        self.lambda
    }

    pub fn theta(&self) -> Option<ParamId> {
        self.theta
    }

    /// The learned base coefficients `a = σ(Λ) e^{iθ}` (θ = 0 in real mode).
    pub fn base_coefficients<T: Scalar>(&self, p: &ParamStore<T>) -> Vec<Complex<f64>> {
        let lam = p.get(self.lambda).data();
        (0..self.lanes)
            .map(|n| {
                let m = sigmoid(lam[n].to_f64_lossless());
                let th = self.theta.map_or(0.0, |t| p.get(t).data()[n].to_f64_lossless());
                Complex::from_polar(m, th)
            })
            .collect()
    }

    fn lane_input<T: Scalar>(&self, x: &[T], n: usize) -> Complex<T> {
        match self.mode {
            LruMode::Real => Complex::new(x[n], T::zero()),
            LruMode::Complex => Complex::new(x[n], x[self.lanes + n]),
        }
    }

    fn coefficients<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<Coefficients<T>> {
        let za = self.wa.forward(p, x)?;
        let zx = self.wx.forward(p, x)?;
        let n_lanes = self.lanes;
        let lam = p.get(self.lambda).data();
        let log_mag: Vec<T> = lam.iter().map(|&l| T::of(log_sigmoid(l.to_f64_lossless()))).collect();
        let phase: Vec<T> = match self.theta {
            Some(t) => p.get(t).data().iter().map(|&v| T::of(wrap_phase(v.to_f64_lossless()))).collect(),
            None => vec![T::zero(); n_lanes],
        };
        let c = T::of(self.c);
        let total = x.rows() * n_lanes;
        let mut co = Coefficients {
            r: Vec::with_capacity(total),
            ig: Vec::with_capacity(total),
            a: Vec::with_capacity(total),
            beta: Vec::with_capacity(total),
            u: Vec::with_capacity(total),
            log_mag,
            phase,
        };
        for k in 0..x.rows() {
            let xr = x.row(k);
            for n in 0..n_lanes {
                let r = sigmoid(za.data()[k * n_lanes + n]);
                let ig = sigmoid(zx.data()[k * n_lanes + n]);
                let a = Complex::new(c * r * co.log_mag[n], c * r * co.phase[n]).exp();
                let beta = (Complex::new(T::one(), T::zero()) - a * a).sqrt();
                co.r.push(r);
                co.ig.push(ig);
                co.a.push(a);
                co.beta.push(beta);
                co.u.push(self.lane_input(xr, n) * ig);
            }
        }
        Ok(co)
    }

    fn write_output<T: Scalar>(&self, h: &[Complex<T>], out: &mut [T]) {
        let n = self.lanes;
        for (j, v) in h.iter().enumerate() {
            out[j] = v.re;
            if self.mode == LruMode::Complex {
                out[n + j] = v.im;
            }
        }
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, RgLruCache<T>)> {
        let s = x.rows();
        let co = self.coefficients(p, x)?;
        let bre = co.beta.iter().zip(&co.u).map(|(b, u)| (b * u).re).collect();
        let bim = co.beta.iter().zip(&co.u).map(|(b, u)| (b * u).im).collect();
        let seq = DiagonalAffineSeq::complex(
            s,
            self.lanes,
            co.a.iter().map(|a| a.re).collect(),
            co.a.iter().map(|a| a.im).collect(),
            bre,
            bim,
        )?;
        let states = sequential_recurrence(&seq);
        let h: Vec<Complex<T>> = states.re.iter().zip(&states.im).map(|(&r, &i)| Complex::new(r, i)).collect();
        let mut y = vec![T::zero(); s * self.dim];
        for k in 0..s {
            self.write_output(&h[k * self.lanes..(k + 1) * self.lanes], &mut y[k * self.dim..(k + 1) * self.dim]);
        }
        let y = Tensor::new(vec![s, self.dim], y)?;
        if !y.all_finite() {
            return Err(Error::Evaluation("rg-lru produced a non-finite state".into()));
        }
        Ok((y, RgLruCache { x: x.clone(), co, h }))
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, cache: &RgLruCache<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let x = &cache.x;
        let (s, n_lanes) = (x.rows(), self.lanes);
        dy.ensure_shape(&[s, self.dim])?;
        let co = &cache.co;
        let c = T::of(self.c);
        let zero = Complex::new(T::zero(), T::zero());
        let mut delta = vec![zero; n_lanes];
        let mut dza = vec![T::zero(); s * n_lanes];
        let mut dzx = vec![T::zero(); s * n_lanes];
        let mut dx = vec![T::zero(); s * self.dim];
        let mut dlog_mag = vec![T::zero(); n_lanes];
        let mut dphase = vec![T::zero(); n_lanes];
        for k in (0..s).rev() {
            let dyr = dy.row(k);
            let xr = x.row(k);
            for n in 0..n_lanes {
                let idx = k * n_lanes + n;
                let out = self.lane_input(dyr, n);
                let carry = if k + 1 < s { co.a[idx + n_lanes].conj() * delta[n] } else { zero };
                let d = out + carry;
                delta[n] = d;
                let hprev = if k > 0 { cache.h[idx - n_lanes] } else { zero };
                let (a, beta, u) = (co.a[idx], co.beta[idx], co.u[idx]);
                let g_beta = u.conj() * d;
                let g_u = beta.conj() * d;
                let g_a = hprev.conj() * d - (a / beta).conj() * g_beta;
                let g_l = a.conj() * g_a;
                let r = co.r[idx];
                let dr = c * (co.log_mag[n] * g_l.re + co.phase[n] * g_l.im);
                dlog_mag[n] += c * r * g_l.re;
                dphase[n] += c * r * g_l.im;
                let xc = self.lane_input(xr, n);
                let ig = co.ig[idx];
                let dig = xc.re * g_u.re + xc.im * g_u.im;
                dx[k * self.dim + n] += g_u.re * ig;
                if self.mode == LruMode::Complex {
                    dx[k * self.dim + n_lanes + n] += g_u.im * ig;
                }
                dza[idx] = dr * r * (T::one() - r);
                dzx[idx] = dig * ig * (T::one() - ig);
            }
        }
        let lam = p.get(self.lambda).data().to_vec();
        let gl = g.get_mut(self.lambda).data_mut();
        for n in 0..n_lanes {
            gl[n] += dlog_mag[n] * (T::one() - sigmoid(lam[n]));
        }
        if let Some(t) = self.theta {
            g.get_mut(t).data_mut().iter_mut().zip(&dphase).for_each(|(a, &b)| *a += b);
        }
        let dza = Tensor::new(vec![s, n_lanes], dza)?;
        let dzx = Tensor::new(vec![s, n_lanes], dzx)?;
        let mut dx = Tensor::new(vec![s, self.dim], dx)?;
        dx.add_assign(&self.wa.backward(p, x, &dza, g)?)?;
        dx.add_assign(&self.wx.backward(p, x, &dzx, g)?)?;
        Ok(dx)
    }

    /// One recurrent step for a single input row, updating `h` in place.
    pub fn step<T: Scalar>(&self, p: &ParamStore<T>, x_row: &[T], h: &mut Vec<Complex<T>>) -> Result<Vec<T>> {
        if h.is_empty() {
            h.resize(self.lanes, Complex::new(T::zero(), T::zero()));
        }
        let x = Tensor::new(vec![1, self.dim], x_row.to_vec())?;
        let co = self.coefficients(p, &x)?;
        for n in 0..self.lanes {
            h[n] = co.a[n] * h[n] + co.beta[n] * co.u[n];
        }
        let mut y = vec![T::zero(); self.dim];
        self.write_output(h, &mut y);
        Ok(y)
    }
}

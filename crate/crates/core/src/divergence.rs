//! Regularizers for divergence-penalized transport, represented through the
//! convex conjugate.
//!
//! A divergence is generated by a convex, lower semicontinuous, superlinear
//! `phi: [0, inf) -> R` with `phi(1) = 0`. The dual solver never touches
//! `phi` directly; everything runs through the conjugate
//! `psi(t) = sup_x { t*x - phi(x) }` and its derivative `psi'`, which is the
//! density map of the optimal coupling. `phi` itself is kept around (when
//! available) only for primal evaluation.
//!
//! Built-ins:
//! * entropic: `phi(x) = x log x`, `psi(t) = exp(t - 1)`
//! * power `p > 1`: `phi(x) = x^p - 1`,
//!   `psi(t) = 1 + (p-1) (t_+/p)^(p/(p-1))`, `psi'(t) = (t_+/p)^(1/(p-1))`
//!
//! Anything else goes through [`Divergence::custom`], which screens the
//! supplied callables on a sampled grid: `psi'` must be nondecreasing and
//! nonnegative, since it produces densities.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Entropic `psi(t) = exp(t-1)` refuses arguments with `t - 1` beyond this,
/// staying clear of `f64` overflow near 709.
pub const PSI_ARG_CAP: f64 = 700.0;

const GRID_MIN: f64 = -50.0;
const GRID_MAX: f64 = 50.0;
const GRID_STEPS: usize = 1000; // step 0.1

/// Shared scalar callable; divergences are cloned freely across worker threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("psi_prime decreases between t={t1} and t={t2}: {v1} > {v2}")]
    MonotonicityViolation { t1: f64, t2: f64, v1: f64, v2: f64 },
    #[error("psi_prime is negative at t={t}: {value} (densities must be nonnegative)")]
    NegativeDensity { t: f64, value: f64 },
    #[error("psi argument {t} exceeds the evaluation cap")]
    CapExceeded { t: f64 },
    #[error("value {v} exceeds the range of psi_prime over the expanded search bracket")]
    RangeExceeded { v: f64 },
    #[error("power divergence needs p > 1, got p = {p}")]
    InvalidPower { p: f64 },
    #[error("unknown divergence {name:?}; known names are \"entropic\" and \"power:p=<real>\" (custom divergences are built through the library, not by name)")]
    UnknownName { name: String },
    #[error("regularity metadata rejected: psi(t0 = {t0}) = {value}, expected 1")]
    BadRegularity { t0: f64, value: f64 },
    #[error("regularity metadata rejected: psi'({t}) = {value} < t past the growth threshold")]
    BadGrowth { t: f64, value: f64 },
    #[error("conjugate oracle needs search_bound > 0, got {bound}")]
    BadSearchBound { bound: f64 },
}

pub type Result<T> = std::result::Result<T, DivergenceError>;

/// Metadata asserting that `psi` is well behaved enough for potential
/// extension and plug-in variance work: `psi(t0) = 1`, strict convexity from
/// `t0 - delta` onwards, and `psi'(t) >= t` past `growth_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRegularity {
    pub t0: f64,
    pub delta: f64,
    pub growth_threshold: f64,
}

#[derive(Clone)]
pub struct Divergence {
    name: String,
    psi: ScalarFn,
    psi_prime: ScalarFn,
    psi_second: Option<ScalarFn>,
    phi: Option<ScalarFn>,
    regularity: Option<DualRegularity>,
}

impl fmt::Debug for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Divergence")
            .field("name", &self.name)
            .field("dual_regular", &self.regularity.is_some())
            .finish()
    }
}

impl Divergence {
    /// `phi(x) = x log x`. Dual regular with `t0 = 1`; `psi' = psi`, so the
    /// density map is its own slope.
    pub fn entropic() -> Self {
        let psi: ScalarFn = Arc::new(|t: f64| {
            if t - 1.0 > PSI_ARG_CAP {
                f64::INFINITY
            } else {
                (t - 1.0).exp()
            }
        });
        Divergence {
            name: "entropic".to_owned(),
            psi_prime: psi.clone(),
            psi_second: Some(psi.clone()),
            psi,
            phi: Some(Arc::new(|x: f64| {
                if x < 0.0 {
                    f64::INFINITY
                } else if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            })),
            regularity: Some(DualRegularity {
                t0: 1.0,
                delta: 1.0,
                growth_threshold: 1.0,
            }),
        }
    }

    /// `phi(x) = x^p - 1` for `p > 1`. Includes the quadratic case `p = 2`
    /// (`psi(t) = 1 + t_+^2/4`). Not marked dual regular: `psi` is constant
    /// at 1 on `t <= 0`, so there is no neighborhood of `t0 = 0` on which it
    /// is strictly convex.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(DivergenceError::InvalidPower { p });
        }
        let q = p / (p - 1.0); // conjugate exponent
        let psi: ScalarFn = Arc::new(move |t: f64| {
            if t <= 0.0 {
                1.0
            } else {
                1.0 + (p - 1.0) * (t / p).powf(q)
            }
        });
        let psi_prime: ScalarFn = Arc::new(move |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                (t / p).powf(1.0 / (p - 1.0))
            }
        });
        // Undefined at the kink t = 0; report the flat side there.
        let psi_second: ScalarFn = Arc::new(move |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                (t / p).powf((2.0 - p) / (p - 1.0)) / (p * (p - 1.0))
            }
        });
        Ok(Divergence {
            name: format!("power:p={p}"),
            psi,
            psi_prime,
            psi_second: Some(psi_second),
            phi: Some(Arc::new(move |x: f64| {
                if x < 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(p) - 1.0
                }
            })),
            regularity: None,
        })
    }

    /// Wrap user-supplied callables. `psi_prime` is screened on the grid
    /// `[-50, 50]` with step `0.1`: it must be nondecreasing (slack `1e-12`)
    /// and nonnegative. If `regularity` is claimed, `psi(t0) = 1` is checked
    /// on the spot and `psi'(t) >= t` is sampled past the growth threshold.
    pub fn custom(
        name: impl Into<String>,
        psi: ScalarFn,
        psi_prime: ScalarFn,
        psi_second: Option<ScalarFn>,
        phi: Option<ScalarFn>,
        regularity: Option<DualRegularity>,
    ) -> Result<Self> {
        let step = (GRID_MAX - GRID_MIN) / GRID_STEPS as f64;
        let mut prev_t = GRID_MIN;
        let mut prev_v = psi_prime(GRID_MIN);
        if prev_v < -1e-12 {
            return Err(DivergenceError::NegativeDensity {
                t: prev_t,
                value: prev_v,
            });
        }
        for k in 1..=GRID_STEPS {
            let t = GRID_MIN + step * k as f64;
            let v = psi_prime(t);
            if v < -1e-12 {
                return Err(DivergenceError::NegativeDensity { t, value: v });
            }
            if prev_v > v + 1e-12 {
                return Err(DivergenceError::MonotonicityViolation {
                    t1: prev_t,
                    t2: t,
                    v1: prev_v,
                    v2: v,
                });
            }
            prev_t = t;
            prev_v = v;
        }
        if let Some(reg) = &regularity {
            let at_t0 = psi(reg.t0);
            if (at_t0 - 1.0).abs() > 1e-9 {
                return Err(DivergenceError::BadRegularity {
                    t0: reg.t0,
                    value: at_t0,
                });
            }
            let mut t = reg.growth_threshold;
            while t <= GRID_MAX {
                let v = psi_prime(t);
                if v < t - 1e-9 {
                    return Err(DivergenceError::BadGrowth { t, value: v });
                }
                t += step;
            }
        }
        Ok(Divergence {
            name: name.into(),
            psi,
            psi_prime,
            psi_second,
            phi,
            regularity,
        })
    }

    /// Resolve a config-style name: `"entropic"` or `"power:p=<real>"`.
    pub fn from_name(name: &str) -> Result<Self> {
        if name == "entropic" {
            return Ok(Self::entropic());
        }
        if let Some(raw) = name.strip_prefix("power:p=") {
            if let Ok(p) = raw.trim().parse::<f64>() {
                return Self::power(p);
            }
        }
        Err(DivergenceError::UnknownName {
            name: name.to_owned(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Conjugate value; errors instead of returning a non-finite number.
    pub fn psi(&self, t: f64) -> Result<f64> {
        let v = (self.psi)(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DivergenceError::CapExceeded { t })
        }
    }

    /// Raw conjugate, non-finite values passed through. Root brackets probe
    /// far out and cope with `inf` on their own.
    pub fn psi_raw(&self, t: f64) -> f64 {
        (self.psi)(t)
    }

    /// Density map `psi'`; nonnegative and nondecreasing by construction.
    pub fn psi_prime(&self, t: f64) -> f64 {
        (self.psi_prime)(t)
    }

    /// Slope of the density map where available, `None` otherwise.
    pub fn psi_second(&self, t: f64) -> Option<f64> {
        self.psi_second.as_ref().map(|f| f(t))
    }

    pub fn has_psi_second(&self) -> bool {
        self.psi_second.is_some()
    }

    pub fn phi(&self, x: f64) -> Option<f64> {
        self.phi.as_ref().map(|f| f(x))
    }

    pub fn has_phi(&self) -> bool {
        self.phi.is_some()
    }

    pub fn dual_regularity(&self) -> Option<DualRegularity> {
        self.regularity
    }

    pub fn is_dual_regular(&self) -> bool {
        self.regularity.is_some()
    }

    /// Generalized inverse `inf { s : psi'(s) >= v }` by bracketing and
    /// bisection to width `1e-12`.
    ///
    /// The flat-bottom case (`psi' >= v` all the way down, e.g. `v = 0`)
    /// has no finite infimum; the expanded bracket lower bound is returned
    /// as the sentinel. `v` above the range of `psi'` is `RangeExceeded`.
    pub fn psi_prime_inverse(&self, v: f64) -> Result<f64> {
        debug_assert!(v >= 0.0, "psi' is nonnegative, v = {v}");
        let mut hi = 1.0;
        let mut width = 1.0;
        let mut rounds = 0usize;
        while self.psi_prime(hi) < v {
            width *= 2.0;
            hi += width;
            rounds += 1;
            if rounds > 200 {
                return Err(DivergenceError::RangeExceeded { v });
            }
        }
        let mut lo = -1.0;
        width = 1.0;
        rounds = 0;
        while self.psi_prime(lo) >= v {
            width *= 2.0;
            lo -= width;
            rounds += 1;
            if rounds > 60 {
                return Ok(lo); // infimum is -infinity; sentinel
            }
        }
        // invariant: psi'(lo) < v <= psi'(hi)
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.psi_prime(mid) >= v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Numerical conjugate `sup_x { t*x - phi(x) }` over `x in [0, search_bound]`,
/// by dense grid then golden-section refinement. Testing oracle: slow, but it
/// only assumes `phi` is convex (so the objective is concave in `x`).
pub fn conjugate_oracle<F: Fn(f64) -> f64>(phi: F, t: f64, search_bound: f64) -> Result<f64> {
    if !(search_bound > 0.0) {
        return Err(DivergenceError::BadSearchBound {
            bound: search_bound,
        });
    }
    let obj = |x: f64| t * x - phi(x);
    let steps = 4000usize;
    let h = search_bound / steps as f64;
    let mut best_k = 0usize;
    let mut best = obj(0.0);
    for k in 1..=steps {
        let v = obj(h * k as f64);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // Refine on the bracketing interval around the grid argmax.
    let mut a = h * best_k.saturating_sub(1) as f64;
    let mut b = (h * (best_k + 1) as f64).min(search_bound);
    let inv_phi_ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi_ratio * (b - a);
    let mut x2 = a + inv_phi_ratio * (b - a);
    let mut f1 = obj(x1);
    let mut f2 = obj(x2);
    for _ in 0..200 {
        if b - a < 1e-13 * (1.0 + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi_ratio * (b - a);
            f2 = obj(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi_ratio * (b - a);
            f1 = obj(x1);
        }
    }
    Ok(best.max(f1).max(f2))
}

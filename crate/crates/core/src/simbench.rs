//! Simulation scenarios and Monte-Carlo MSE estimation.
//!
//! Replication `k` of a run with master seed `s` draws its noise and folds
//! from `derive_seed(s, k)`, so replications are independent of each other
//! and of the thread schedule.

use std::f64::consts::PI;
use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cv::{default_max_exponent, CvResult, LambdaGrid};
use crate::dcart::cvdcart;
use crate::error::{Error, Result};
use crate::lattice::{LatticeShape, LatticeSignal};
use crate::numeric::KahanSum;
use crate::rng::{derive_seed, stream, Purpose};
use crate::tfilter::{cvtf, TfConfig};

/// Fraction of replications allowed to fail before the whole run is an error.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    /// 2-D signals for dyadic CART.
    Dc,
    /// 1-D signals for trend filtering.
    Tf,
}

impl Suite {
    pub fn scenario_count(self) -> usize {
        match self {
            Suite::Dc => 3,
            Suite::Tf => 4,
        }
    }

    pub fn min_side(self) -> usize {
        match self {
            Suite::Dc => 8,
            Suite::Tf => 12,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Dc => "dc",
            Suite::Tf => "tf",
        })
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dc" => Ok(Suite::Dc),
            "tf" => Ok(Suite::Tf),
            other => Err(Error::invalid(format!("unknown suite {other:?} (expected dc or tf)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    suite: Suite,
    id: usize,
    n: usize,
}

impl Scenario {
    pub fn new(suite: Suite, id: usize, n: usize) -> Result<Self> {
        if id == 0 || id > suite.scenario_count() {
            return Err(Error::invalid(format!(
                "{suite} scenarios are numbered 1..={}, got {id}",
                suite.scenario_count()
            )));
        }
        if n < suite.min_side() {
            return Err(Error::invalid(format!(
                "{suite} scenarios need n >= {}, got {n}",
                suite.min_side()
            )));
        }
        Ok(Scenario { suite, id, n })
    }

    pub fn suite(&self) -> Suite {
        self.suite
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn signal(&self) -> Result<LatticeSignal> {
        match self.suite {
            Suite::Dc => gen_dc_signal(self.id, self.n),
            Suite::Tf => gen_tf_signal(self.id, self.n),
        }
    }
}

/// `n x n` test images. Coordinates are 1-based in the formulas.
pub fn gen_dc_signal(id: usize, n: usize) -> Result<LatticeSignal> {
    Scenario::new(Suite::Dc, id, n)?;
    let shape = LatticeShape::square(n)?;
    let nf = n as f64;
    let (lo, hi) = (n / 3, 2 * n / 3);
    let value = |i1: usize, i2: usize| -> f64 {
        match id {
            1 => f64::from(u8::from((lo..=hi).contains(&i1) && (lo..=hi).contains(&i2))),
            2 => {
                let (a, b) = (i1 as f64 - nf / 2.0, i2 as f64 - nf / 2.0);
                f64::from(u8::from((a * a + b * b).sqrt() <= nf / 4.0))
            }
            _ => {
                let (x, y) = (i1 as f64 / nf - 0.5, i2 as f64 / nf - 0.5);
                20.0 * (-5.0 * (x * x + y * y - 0.9 * x * y)).exp()
            }
        }
    };
    let values = (0..shape.len())
        .map(|p| {
            let c = shape.coords(p);
            value(c[0] + 1, c[1] + 1)
        })
        .collect();
    LatticeSignal::new(shape, values)
}

/// Profile `f` evaluated at `x = i/n`, `i = 1..=n`.
pub fn tf_profile(id: usize, x: f64) -> Result<f64> {
    let r12 = 1.0 / 12f64.sqrt();
    Ok(match id {
        1 => {
            if x < 0.2 {
                0.0
            } else if x < 0.4 {
                2.0
            } else if x < 0.6 {
                1.0
            } else if x < 0.8 {
                -1.0
            } else {
                2.0
            }
        }
        2 => {
            if x <= 1.0 / 3.0 {
                6.0 * x
            } else if x <= 2.0 / 3.0 {
                -12.0 * x + 6.0
            } else {
                x - 8.0 / 3.0
            }
        }
        3 => {
            if x <= 1.0 / 3.0 {
                18.0 * x * x
            } else if x <= 2.0 / 3.0 {
                -36.0 * (x - 0.5 - r12) * (x - 0.5 + r12)
            } else {
                18.0 * (x - 1.0) * (x - 1.0)
            }
        }
        4 => (2.0 * PI * x).sin() + (5.0 * PI * x).cos(),
        other => return Err(Error::invalid(format!("tf scenarios are numbered 1..=4, got {other}"))),
    })
}

pub fn gen_tf_signal(id: usize, n: usize) -> Result<LatticeSignal> {
    Scenario::new(Suite::Tf, id, n)?;
    let values = (1..=n)
        .map(|i| tf_profile(id, i as f64 / n as f64))
        .collect::<Result<Vec<_>>>()?;
    LatticeSignal::from_vec(values)
}

/// `theta + sigma * z` with `z` standard normal from the seed's noise stream.
pub fn add_noise(theta: &LatticeSignal, sigma: f64, seed: u64) -> Result<LatticeSignal> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!("noise scale must be nonnegative, got {sigma}")));
    }
    let mut rng = stream(seed, Purpose::Noise, 0);
    let values = theta
        .values()
        .iter()
        .map(|&t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            t + sigma * z
        })
        .collect();
    theta.with_values(values)
}

/// Estimator run in each replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dcart,
    Tf { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    /// Top of the grid `{2^lo, ..., 2^hi}`; `None` uses `hi = ceil(log2 N)`.
    pub grid_max_exponent: Option<u32>,
    /// Bottom of the grid; `None` uses `lo = 0` for dyadic CART and
    /// `lo = -hi` for trend filtering, whose best penalties at order
    /// `r >= 2` fall below 1 under the `n^(r-1)` scaling.
    pub grid_min_exponent: Option<i32>,
}

impl MethodSpec {
    pub fn default_for(scenario: &Scenario, order: usize) -> Self {
        MethodSpec {
            method: match scenario.suite() {
                Suite::Dc => Method::Dcart,
                Suite::Tf => Method::Tf { order },
            },
            grid_max_exponent: None,
            grid_min_exponent: None,
        }
    }

    pub fn grid(&self, total: usize) -> Result<LambdaGrid> {
        let hi = match self.grid_max_exponent {
            Some(e) => e,
            None => default_max_exponent(total)?,
        } as i32;
        let lo = self.grid_min_exponent.unwrap_or(match self.method {
            Method::Dcart => 0,
            Method::Tf { .. } => -hi,
        });
        LambdaGrid::powers_of_two_between(lo, hi)
    }

    /// Run the cross-validated estimator on `y`.
    pub fn run(&self, y: &LatticeSignal, seed: u64) -> Result<CvResult> {
        let grid = self.grid(y.len())?;
        match self.method {
            Method::Dcart => cvdcart(y, &grid, seed),
            Method::Tf { order } => cvtf(y, &grid, &TfConfig::new(order)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<ReplicationFit, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationFit {
    pub mse: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub scenario: Scenario,
    pub spec: MethodSpec,
    pub sigma: f64,
    pub replications: Vec<Replication>,
    /// Mean over successful replications.
    pub mean_mse: f64,
    pub std_error: f64,
}

impl SimResult {
    pub fn reps(&self) -> usize {
        self.replications.len()
    }

    pub fn failures(&self) -> usize {
        self.replications.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn mses(&self) -> Vec<f64> {
        self.replications
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|f| f.mse))
            .collect()
    }
}

pub fn run_replication(spec: &MethodSpec, theta: &LatticeSignal, sigma: f64, seed: u64) -> Result<ReplicationFit> {
    let y = add_noise(theta, sigma, seed)?;
    let result = spec.run(&y, seed)?;
    Ok(ReplicationFit {
        mse: result.fit.mse(theta)?,
        lambda: result.lambda,
    })
}

/// Mean `(1/N) ||fit - theta||^2` over `reps` noisy replications.
pub fn monte_carlo_mse(spec: &MethodSpec, scenario: &Scenario, sigma: f64, reps: usize, seed: u64) -> Result<SimResult> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    match (spec.method, scenario.suite()) {
        (Method::Dcart, Suite::Dc) | (Method::Tf { .. }, Suite::Tf) => {}
        _ => return Err(Error::invalid("method does not match the scenario suite")),
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::invalid(format!("noise scale must be nonnegative, got {sigma}")));
    }
    let theta = scenario.signal()?;
    let replications: Vec<Replication> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(seed, k as u64);
            Replication {
                index: k,
                seed,
                outcome: run_replication(spec, &theta, sigma, seed).map_err(|e| e.to_string()),
            }
        })
        .collect();

    let failed: Vec<&Replication> = replications.iter().filter(|r| r.outcome.is_err()).collect();
    if failed.len() as f64 > MAX_FAILURE_FRACTION * reps as f64 {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: reps,
            first: failed[0].outcome.clone().unwrap_err(),
        });
    }
    let mses: Vec<f64> = replications
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|f| f.mse))
        .collect();
    let (mean_mse, std_error) = mean_and_std_error(&mses);
    Ok(SimResult {
        scenario: *scenario,
        spec: *spec,
        sigma,
        replications,
        mean_mse,
        std_error,
    })
}

/// Compensated mean and standard error of the mean (0 for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().copied().collect::<KahanSum>().total() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).collect::<KahanSum>().total() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// One line per result: suite, scenario, n, sigma, replication counts, mean
/// MSE and its standard error.
pub fn summary_csv(results: &[SimResult]) -> String {
    let mut out = String::from("suite,scenario,n,order,sigma,reps,failures,mean_mse,std_error\n");
    for r in results {
        let order = match r.spec.method {
            Method::Tf { order } => order.to_string(),
            Method::Dcart => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6e},{:.6e}\n",
            r.scenario.suite(),
            r.scenario.id(),
            r.scenario.n(),
            order,
            r.sigma,
            r.reps(),
            r.failures(),
            r.mean_mse,
            r.std_error
        ));
    }
    out
}

/// Mean MSEs laid out with one row per `n` and one column per scenario;
/// missing cells are left empty.
pub fn table_csv(results: &[SimResult]) -> String {
    let mut ns: Vec<usize> = results.iter().map(|r| r.scenario.n()).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut ids: Vec<usize> = results.iter().map(|r| r.scenario.id()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut out = String::from("n");
    for id in &ids {
        out.push_str(&format!(",scenario{id}"));
    }
    out.push('\n');
    for n in ns {
        out.push_str(&n.to_string());
        for &id in &ids {
            out.push(',');
            if let Some(r) = results.iter().find(|r| r.scenario.n() == n && r.scenario.id() == id) {
                out.push_str(&format!("{:.6}", r.mean_mse));
            }
        }
        out.push('\n');
    }
    out
}

/// Audit trail: one line per replication with its seed and outcome.
pub fn replications_csv(results: &[SimResult]) -> String {
    let mut out = String::from("suite,scenario,n,replication,seed,mse,lambda,error\n");
    for r in results {
        for rep in &r.replications {
            let (mse, lambda, err) = match &rep.outcome {
                Ok(f) => (format!("{:.17e}", f.mse), f.lambda.to_string(), String::new()),
                Err(e) => (String::new(), String::new(), format!("\"{}\"", e.replace('"', "'"))),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.scenario.suite(),
                r.scenario.id(),
                r.scenario.n(),
                rep.index,
                rep.seed,
                mse,
                lambda,
                err
            ));
        }
    }
    out
}
